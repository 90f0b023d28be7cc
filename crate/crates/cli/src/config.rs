use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use nonlocal_rate::functions::{
    bump_1d, hat_1d, hat_ridge, indicator_1d, monomial_bump, radial_bump, sine_bump_1d,
    zero_field, GridData, ScalarField,
};
use nonlocal_rate::integrands::{builtin_integrand, ConvexIntegrand};
use nonlocal_rate::kernels::Kernel;
use nonlocal_rate::quadrature::{QuadratureScheme, ZBackend};
use serde::Serialize;

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Rate1d,
    Ratend,
    SliceCheck,
    KernelReport,
    H2Probe,
    BoundsAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Rate1d,
        Experiment::Ratend,
        Experiment::SliceCheck,
        Experiment::KernelReport,
        Experiment::H2Probe,
        Experiment::BoundsAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rate1d => "rate1d",
            Experiment::Ratend => "ratend",
            Experiment::SliceCheck => "slice-check",
            Experiment::KernelReport => "kernel-report",
            Experiment::H2Probe => "h2-probe",
            Experiment::BoundsAudit => "bounds-audit",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| config_err(format!("unknown experiment `{s}`")))
    }
}

/// `[field]`: a built-in profile with parameters, or a grid CSV.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSpec {
    pub name: String,
    pub dim: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
    pub exponents: Vec<u32>,
    pub path: Option<PathBuf>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<ScalarField> {
        let d = self.dim;
        let c = &self.center;
        let u = match self.name.as_str() {
            "zero" => zero_field(d)?,
            "sine" => sine_bump_1d(self.a, self.b)?,
            "indicator" => indicator_1d(self.a, self.b)?,
            "bump" if d == 1 => bump_1d(c[0], self.radius, self.amplitude)?,
            "bump" => radial_bump(c, self.radius, self.amplitude)?,
            "hat" if d == 1 => hat_1d(c[0], self.half_width, self.amplitude)?,
            "hat" => hat_ridge(c, self.half_width, self.radius, self.amplitude)?,
            "monomial_bump" => monomial_bump(c, self.radius, self.amplitude, &self.exponents)?,
            "csv" => {
                let path = self.path.as_ref().ok_or_else(|| config_err("field `csv` needs `path`"))?;
                ScalarField::from_grid(GridData::load_csv(path)?)?
            }
            other => return Err(config_err(format!("unknown field `{other}`"))),
        };
        if u.dim() != d {
            return Err(config_err(format!("field has dimension {}, config says {d}", u.dim())));
        }
        Ok(u)
    }
}

/// `[kernel]`: a built-in name with optional overrides.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSpec {
    pub name: String,
    pub dim: usize,
    pub cutoff: Option<f64>,
    pub inner: Option<f64>,
    pub odd_perturbation: Option<f64>,
    pub r0: Option<f64>,
    pub r1: Option<f64>,
}

impl KernelSpec {
    /// Builds and validates; a failed validation is a config error.
    pub fn build(&self) -> Result<Kernel> {
        let d = self.dim;
        let mut k = match (self.name.as_str(), self.cutoff, self.inner) {
            ("gaussian", Some(c), _) => Kernel::truncated_gaussian(d, c)?,
            ("annulus", _, Some(r)) => Kernel::annulus(d, r)?,
            (name, _, _) => Kernel::builtin(name, d)?,
        };
        if self.r0.is_some() || self.r1.is_some() {
            let (r0, r1) = k.positivity_annulus();
            k = k.with_positivity_annulus(self.r0.unwrap_or(r0), self.r1.unwrap_or(r1))?;
        }
        if let Some(eps) = self.odd_perturbation {
            k = k.with_odd_perturbation(eps)?;
        }
        k.validate()?;
        Ok(k)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub field: FieldSpec,
    pub integrand: String,
    pub kernel: KernelSpec,
    pub h_list: Vec<f64>,
    pub quadrature: QuadratureScheme,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Every key as read, for the report header.
    pub echo: BTreeMap<String, BTreeMap<String, String>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("experiment", &["name", "seed", "out"]),
    (
        "field",
        &["name", "dim", "center", "radius", "half_width", "amplitude", "a", "b", "exponents", "path"],
    ),
    ("integrand", &["name"]),
    ("kernel", &["name", "dim", "cutoff", "inner", "odd_perturbation", "r0", "r1"]),
    ("sweep", &["h"]),
    (
        "quadrature",
        &[
            "tol", "max_refinements", "gauss_nodes", "inner_nodes", "theta_nodes", "panel_width",
            "nd_panel_width", "nd_gauss_nodes", "radial_nodes", "radial_panels", "radial_grading",
            "effective_grading", "angular_nodes", "slice_dx", "kernel_tol", "parallel", "backend",
            "mc_samples", "mc_strata",
        ],
    ),
];

struct Sections(BTreeMap<String, BTreeMap<String, String>>);

impl Sections {
    fn raw(&self, sec: &str, key: &str) -> Option<&str> {
        self.0.get(sec).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, sec: &str, key: &str) -> Result<Option<T>> {
        self.raw(sec, key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| config_err(format!("[{sec}] {key} = `{v}` does not parse")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, sec: &str, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(sec, key)
            .map(|v| {
                v.split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<T>()
                            .map_err(|_| config_err(format!("[{sec}] {key}: `{p}` does not parse")))
                    })
                    .collect()
            })
            .transpose()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, experiment, base)
    }

    /// Relative paths (`out`, field `path`) resolve against `base`.
    pub fn parse(text: &str, experiment: Experiment, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (sec, props) in ini.iter() {
            let Some(sec) = sec else {
                if props.iter().next().is_some() {
                    return Err(config_err("keys outside a [section]"));
                }
                continue;
            };
            let allowed = KNOWN
                .iter()
                .find(|(s, _)| *s == sec)
                .ok_or_else(|| config_err(format!("unknown section [{sec}]")))?
                .1;
            let entry = map.entry(sec.to_string()).or_default();
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(config_err(format!("unknown key `{k}` in [{sec}]")));
                }
                entry.insert(k.to_string(), v.trim().to_string());
            }
        }
        let s = Sections(map);

        if let Some(name) = s.raw("experiment", "name") {
            if name != experiment.name() {
                return Err(config_err(format!(
                    "config is for `{name}` but `{experiment}` was requested"
                )));
            }
        }
        let seed = s.parse::<u64>("experiment", "seed")?;
        let out = s
            .raw("experiment", "out")
            .map(|o| base.join(o))
            .unwrap_or_else(|| base.join("out").join(experiment.name()));

        let center: Option<Vec<f64>> = s.list("field", "center")?;
        let dim = match (s.parse::<usize>("field", "dim")?, &center) {
            (Some(d), _) => d,
            (None, Some(c)) => c.len(),
            (None, None) => 1,
        };
        if !(1..=3).contains(&dim) {
            return Err(config_err(format!("field dim {dim} is outside 1..=3")));
        }
        let center = center.unwrap_or_else(|| vec![0.5; dim]);
        if center.len() != dim {
            return Err(config_err("field center length differs from dim"));
        }
        let radius = s.parse("field", "radius")?.unwrap_or(0.5);
        let field = FieldSpec {
            name: s.raw("field", "name").unwrap_or("bump").to_string(),
            dim,
            center,
            radius,
            half_width: s.parse("field", "half_width")?.unwrap_or(radius),
            amplitude: s.parse("field", "amplitude")?.unwrap_or(1.0),
            a: s.parse("field", "a")?.unwrap_or(0.0),
            b: s.parse("field", "b")?.unwrap_or(1.0),
            exponents: s.list("field", "exponents")?.unwrap_or_else(|| vec![0; dim]),
            path: s.raw("field", "path").map(|p| base.join(p)),
        };

        let kernel = KernelSpec {
            name: s.raw("kernel", "name").unwrap_or("ball").to_string(),
            dim: s.parse("kernel", "dim")?.unwrap_or(dim),
            cutoff: s.parse("kernel", "cutoff")?,
            inner: s.parse("kernel", "inner")?,
            odd_perturbation: s.parse("kernel", "odd_perturbation")?,
            r0: s.parse("kernel", "r0")?,
            r1: s.parse("kernel", "r1")?,
        };

        let mut q = QuadratureScheme::default();
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = s.parse("quadrature", stringify!($f))? { q.$f = v; }
            )*};
        }
        set!(
            tol, max_refinements, gauss_nodes, inner_nodes, theta_nodes, panel_width,
            nd_panel_width, nd_gauss_nodes, radial_nodes, radial_panels, radial_grading,
            effective_grading, angular_nodes, slice_dx, kernel_tol, parallel
        );
        match s.raw("quadrature", "backend").unwrap_or("tensor") {
            "tensor" => {}
            "monte_carlo" => {
                let seed = seed.ok_or_else(|| {
                    config_err("the monte_carlo backend needs [experiment] seed")
                })?;
                q.z_backend = ZBackend::MonteCarlo {
                    samples: s.parse("quadrature", "mc_samples")?.unwrap_or(4096),
                    strata: s.parse("quadrature", "mc_strata")?.unwrap_or(16),
                    seed,
                };
            }
            other => return Err(config_err(format!("unknown backend `{other}`"))),
        }

        let cfg = ExperimentConfig {
            experiment,
            field,
            integrand: s.raw("integrand", "name").unwrap_or("quadratic").to_string(),
            kernel,
            h_list: s.list("sweep", "h")?.unwrap_or_default(),
            quadrature: q,
            out,
            seed,
            echo: s.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `--seed` replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        if let ZBackend::MonteCarlo { seed: s, .. } = &mut self.quadrature.z_backend {
            *s = seed;
        }
        self
    }

    pub fn with_out(mut self, out: PathBuf) -> Self {
        self.out = out;
        self
    }

    /// Checks everything that does not need the output directory.
    pub fn validate(&self) -> Result<()> {
        let needs_sweep = self.experiment != Experiment::KernelReport;
        if needs_sweep && self.h_list.is_empty() {
            return Err(config_err("[sweep] h is required"));
        }
        if let Some(h) = self.h_list.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(config_err(format!("h = {h} is not positive")));
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_err("h list must be strictly decreasing"));
        }
        if matches!(self.quadrature.z_backend, ZBackend::MonteCarlo { .. }) && self.seed.is_none() {
            return Err(config_err("the monte_carlo backend needs a seed"));
        }
        self.quadrature.validate()?;
        self.integrand()?;
        Ok(())
    }

    pub fn integrand(&self) -> Result<ConvexIntegrand> {
        Ok(builtin_integrand(&self.integrand)?)
    }

    /// Creates the output directory and confirms it accepts files.
    pub fn prepare_out(&self) -> Result<()> {
        let probe = self.out.join(".write-test");
        fs::create_dir_all(&self.out)
            .and_then(|_| fs::write(&probe, b""))
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| config_err(format!("output directory {} is not writable: {e}", self.out.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, e: Experiment) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, e, Path::new("/tmp"))
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse(
            "[field]\nname = bump\ncenter = 0.5, 0.5\n[sweep]\nh = 0.2, 0.1\n[quadrature]\nnd_gauss_nodes = 8\n",
            Experiment::Ratend,
        )
        .unwrap();
        assert_eq!(c.field.dim, 2);
        assert_eq!(c.kernel.dim, 2);
        assert_eq!(c.h_list, vec![0.2, 0.1]);
        assert_eq!(c.quadrature.nd_gauss_nodes, 8);
        assert_eq!(c.out, Path::new("/tmp/out/ratend"));
        assert!(c.field.build().is_ok());
        assert!(c.kernel.build().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        let e = Experiment::Rate1d;
        assert!(parse("[sweep]\nh = 0.1, 0.2\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1, 0.1\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1, -0.05\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1\n[quadrature]\nbackend = monte_carlo\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1\n[bogus]\nx = 1\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1\n[field]\nradius = big\n", e).is_err());
        assert!(parse("[experiment]\nname = ratend\n[sweep]\nh = 0.1\n", e).is_err());
        assert!(parse("[sweep]\nh = 0.1\n[integrand]\nname = sextic\n", e).is_err());
        assert!(parse("[field]\nname = bump\n", e).is_err());
        let ok = "[experiment]\nseed = 3\n[sweep]\nh = 0.1\n[quadrature]\nbackend = monte_carlo\n";
        assert!(parse(ok, e).is_ok());
    }

    #[test]
    fn seed_override_reaches_backend() {
        let c = parse(
            "[experiment]\nseed = 3\n[sweep]\nh = 0.1\n[quadrature]\nbackend = monte_carlo\n",
            Experiment::Ratend,
        )
        .unwrap()
        .with_seed(99);
        assert!(matches!(c.quadrature.z_backend, ZBackend::MonteCarlo { seed: 99, .. }));
    }

    #[test]
    fn odd_kernel_fails_validation() {
        let c = parse(
            "[kernel]\nname = ball\ndim = 2\nodd_perturbation = 0.1\n",
            Experiment::KernelReport,
        )
        .unwrap();
        assert!(c.kernel.build().is_err());
    }
}
