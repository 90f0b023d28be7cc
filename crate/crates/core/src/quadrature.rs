//! Quadrature rules shared by every energy evaluator: Gauss-Legendre panels
//! aligned to breakpoints, sphere rules, radial rules, and compensated sums.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, Point, ORIGIN};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut s = NeumaierSum::default();
        for (x, w) in self.mapped(a, b) {
            s.add(w * f(x));
        }
        s.value()
    }
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared, lazily built Gauss-Legendre rule with `n` nodes.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
        .clone()
}

/// Neumaier's compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Sorted breakpoints of `[lo, hi]`: the endpoints plus every cut strictly
/// inside, with near-duplicates merged.
pub fn breakpoints<I: IntoIterator<Item = f64>>(lo: f64, hi: f64, cuts: I) -> Vec<f64> {
    let eps = 1e-13 * (hi - lo).abs().max(1.0);
    let mut pts: Vec<f64> = cuts
        .into_iter()
        .filter(|&c| c.is_finite() && c > lo + eps && c < hi - eps)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= eps);
    pts
}

/// Composite Gauss-Legendre nodes over consecutive breakpoints.  Each
/// segment is cut into `ceil(len / max_width) * 2^level` equal panels.
pub fn composite_nodes(
    breaks: &[f64],
    max_width: f64,
    n_gauss: usize,
    level: u32,
) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(n_gauss);
    let mut out = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let base = (len / max_width).ceil().max(1.0) as usize;
        let panels = base << level;
        let step = len / panels as f64;
        for p in 0..panels {
            let pa = a + p as f64 * step;
            let pb = if p + 1 == panels { b } else { pa + step };
            out.extend(rule.mapped(pa, pb));
        }
    }
    out
}

/// Result of a refinement loop: the finest value and the change from the
/// previous level, used as the error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Refined {
    pub value: f64,
    pub est_error: f64,
    pub levels: u32,
}

/// Halves panels (`level += 1`) until the relative change drops below `tol`.
pub fn refine_until<F>(tol: f64, max_refinements: u32, mut eval: F) -> Result<Refined>
where
    F: FnMut(u32) -> Result<f64>,
{
    let mut prev = eval(0)?;
    for level in 1..=max_refinements {
        let cur = eval(level)?;
        let change = (cur - prev).abs();
        if change <= tol * cur.abs().max(1e-300) || change < 1e-15 {
            return Ok(Refined {
                value: cur,
                est_error: change,
                levels: level,
            });
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "no convergence to relative tolerance {tol:e} after {max_refinements} refinements"
    )))
}

/// Adaptive Gauss-Legendre on `[a, b]` by recursive bisection: a panel is
/// accepted when the one-panel and two-half-panel estimates agree.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Option<f64> {
    let rule = gauss_legendre(16);
    let whole = rule.integrate(a, b, f);
    adaptive_step(f, &rule, a, b, whole, rel_tol, abs_tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    abs_tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let split = left + right;
    if (split - whole).abs() <= abs_tol.max(rel_tol * split.abs()) {
        return Some(split);
    }
    if depth == 0 {
        return None;
    }
    let l = adaptive_step(f, rule, a, m, left, rel_tol, abs_tol, depth - 1)?;
    let r = adaptive_step(f, rule, m, b, right, rel_tol, abs_tol, depth - 1)?;
    Some(l + r)
}

/// Surface measure of the unit sphere S^{d-1} (counting measure for d = 1).
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// Quadrature on S^{d-1}; weights sum to the sphere's surface measure.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub directions: Vec<Point>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `angular` is the node count for d = 2 and the azimuthal count for
    /// d = 3, where the polar angle uses `angular / 2` Gauss nodes in cos θ.
    pub fn new(dim: usize, angular: usize) -> Result<Self> {
        check_dim(dim)?;
        if angular < 2 {
            return Err(invalid("angular_nodes", "need at least 2"));
        }
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                directions.push([1.0, 0.0, 0.0]);
                directions.push([-1.0, 0.0, 0.0]);
                weights.extend([1.0, 1.0]);
            }
            2 => {
                let w = 2.0 * PI / angular as f64;
                for k in 0..angular {
                    let t = (k as f64 + 0.5) * w;
                    directions.push([t.cos(), t.sin(), 0.0]);
                    weights.push(w);
                }
            }
            _ => {
                let polar = gauss_legendre((angular / 2).max(2));
                let dphi = 2.0 * PI / angular as f64;
                for (&c, &wc) in polar.nodes.iter().zip(&polar.weights) {
                    let s = (1.0 - c * c).sqrt();
                    for k in 0..angular {
                        let phi = (k as f64 + 0.5) * dphi;
                        directions.push([s * phi.cos(), s * phi.sin(), c]);
                        weights.push(wc * dphi);
                    }
                }
            }
        }
        Ok(Self {
            dim,
            directions,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Average of `g` over the sphere.
    pub fn average<F: FnMut(&Point) -> f64>(&self, mut g: F) -> f64 {
        let total: f64 = self.weights.iter().sum();
        compensated_sum(self.directions.iter().zip(&self.weights).map(|(e, w)| w * g(e))) / total
    }
}

/// Gauss rule in the radial variable on `[r_lo, r_hi]`, split at `breaks`,
/// with geometric grading towards `r = 0` when `r_lo == 0`.  Nodes never
/// sit at `r = 0`.
pub fn radial_nodes(
    r_lo: f64,
    r_hi: f64,
    breaks: &[f64],
    n_gauss: usize,
    panels: usize,
    grading: u32,
) -> Vec<(f64, f64)> {
    let pts = breakpoints(r_lo, r_hi, breaks.iter().copied());
    let rule = gauss_legendre(n_gauss);
    let mut out = Vec::new();
    for (idx, seg) in pts.windows(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let panels = panels.max(1);
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let pa = a + p as f64 * step;
            let pb = a + (p + 1) as f64 * step;
            if idx == 0 && p == 0 && a == 0.0 && grading > 0 {
                // [0, pb] split as [pb/2^g, pb/2^{g-1}], ..., [pb/2, pb], plus [0, pb/2^g].
                let mut hi = pb;
                for _ in 0..grading {
                    let lo = 0.5 * hi;
                    out.extend(rule.mapped(lo, hi));
                    hi = lo;
                }
                out.extend(rule.mapped(0.0, hi));
            } else {
                out.extend(rule.mapped(pa, pb));
            }
        }
    }
    out
}

/// How the z-integral over the kernel support is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum ZBackend {
    /// Radial Gauss rule times a sphere rule.
    Tensor,
    /// Stratified radial Monte Carlo; strata are keyed by `(seed, index)`.
    MonteCarlo {
        samples: usize,
        strata: usize,
        seed: u64,
    },
}

/// Discretization contract for every integral in the crate.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureScheme {
    /// Relative tolerance for 1-D panel refinement.
    pub tol: f64,
    pub max_refinements: u32,
    /// Gauss nodes per x-panel in 1-D energies.
    pub gauss_nodes: usize,
    /// Gauss nodes per panel for the inner moving average.
    pub inner_nodes: usize,
    /// Gauss nodes in θ for the curvature weight λ_h.
    pub theta_nodes: usize,
    /// Largest x-panel width in 1-D energies.
    pub panel_width: f64,
    /// Largest x-panel width for d-dimensional tensor rules.
    pub nd_panel_width: f64,
    pub nd_gauss_nodes: usize,
    /// Gauss nodes per radial panel and radial panels per segment.
    pub radial_nodes: usize,
    pub radial_panels: usize,
    /// Geometric refinement levels of the innermost radial panel.
    pub radial_grading: u32,
    /// Grading used instead for z-rules weighted by the effective kernel,
    /// which is singular at the origin.
    pub effective_grading: u32,
    /// Sphere-rule resolution, see [`SphereRule::new`].
    pub angular_nodes: usize,
    /// ξ-grid spacing on hyperplanes in the slicing evaluator.
    pub slice_dx: f64,
    pub z_backend: ZBackend,
    /// Tolerance of the adaptive rule for the effective kernel.
    pub kernel_tol: f64,
    /// Run outer loops on the rayon pool (no effect without the `parallel` feature).
    pub parallel: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_refinements: 20,
            gauss_nodes: 16,
            inner_nodes: 16,
            theta_nodes: 32,
            panel_width: 0.05,
            nd_panel_width: 0.1,
            nd_gauss_nodes: 16,
            radial_nodes: 16,
            radial_panels: 1,
            radial_grading: 0,
            effective_grading: 4,
            angular_nodes: 32,
            slice_dx: 0.02,
            z_backend: ZBackend::Tensor,
            kernel_tol: 1e-13,
            parallel: true,
        }
    }
}

impl QuadratureScheme {
    pub fn validate(&self) -> Result<()> {
        crate::error::ensure_positive("tol", self.tol)?;
        crate::error::ensure_positive("panel_width", self.panel_width)?;
        crate::error::ensure_positive("nd_panel_width", self.nd_panel_width)?;
        crate::error::ensure_positive("slice_dx", self.slice_dx)?;
        crate::error::ensure_positive("kernel_tol", self.kernel_tol)?;
        for (name, n) in [
            ("gauss_nodes", self.gauss_nodes),
            ("inner_nodes", self.inner_nodes),
            ("theta_nodes", self.theta_nodes),
            ("nd_gauss_nodes", self.nd_gauss_nodes),
            ("radial_nodes", self.radial_nodes),
            ("radial_panels", self.radial_panels),
        ] {
            if n == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if self.angular_nodes < 2 {
            return Err(invalid("angular_nodes", "must be at least 2"));
        }
        if let ZBackend::MonteCarlo { samples, strata, .. } = self.z_backend {
            if strata == 0 || samples < strata {
                return Err(invalid("z_backend", "need samples >= strata >= 1"));
            }
        }
        Ok(())
    }
}

/// Tensor composite rule on a box: per-axis node lists combined lazily.
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub dim: usize,
    pub axes: Vec<Vec<(f64, f64)>>,
}

impl TensorRule {
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Compensated sum of `w * g(x)` over all tensor nodes.
    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut g: F) -> f64 {
        let mut s = NeumaierSum::default();
        let mut x = ORIGIN;
        match self.dim {
            1 => {
                for &(x0, w0) in &self.axes[0] {
                    x[0] = x0;
                    s.add(w0 * g(&x));
                }
            }
            2 => {
                for &(x0, w0) in &self.axes[0] {
                    x[0] = x0;
                    let mut inner = NeumaierSum::default();
                    for &(x1, w1) in &self.axes[1] {
                        x[1] = x1;
                        inner.add(w1 * g(&x));
                    }
                    s.add(w0 * inner.value());
                }
            }
            _ => {
                for &(x0, w0) in &self.axes[0] {
                    x[0] = x0;
                    let mut mid = NeumaierSum::default();
                    for &(x1, w1) in &self.axes[1] {
                        x[1] = x1;
                        let mut inner = NeumaierSum::default();
                        for &(x2, w2) in &self.axes[2] {
                            x[2] = x2;
                            inner.add(w2 * g(&x));
                        }
                        mid.add(w1 * inner.value());
                    }
                    s.add(w0 * mid.value());
                }
            }
        }
        s.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        for k in 0..10 {
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert_relative_eq!(rule.integrate(-1.0, 1.0, |x| x.powi(k)), exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn large_gauss_rule_is_accurate() {
        let rule = GaussLegendre::new(64);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert_relative_eq!(rule.integrate(0.0, PI, f64::sin), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn breakpoints_merge_and_clip() {
        let b = breakpoints(0.0, 1.0, [0.5, 0.5 + 1e-16, 2.0, -1.0, 0.25]);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn sphere_rules_have_correct_measure_and_second_moment() {
        for (dim, m2) in [(1, 1.0), (2, 0.5), (3, 1.0 / 3.0)] {
            let rule = SphereRule::new(dim, 16).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, sphere_area(dim), epsilon = 1e-12);
            // average of (e·p)^2 = |p|^2 / d
            let p = [1.0, 0.0, 0.0];
            assert_relative_eq!(
                rule.average(|e| crate::geometry::dot(e, &p).powi(2)),
                m2,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn radial_rule_handles_grading() {
        let nodes = radial_nodes(0.0, 1.0, &[0.5], 8, 2, 30);
        assert!(nodes.iter().all(|&(r, _)| r > 0.0));
        let s: f64 = nodes.iter().map(|&(r, w)| w * r.ln()).sum();
        assert_relative_eq!(s, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_integrates_log_singularity() {
        let v = adaptive_gauss(&|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-14, 60).unwrap();
        assert_relative_eq!(v, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn refinement_reports_convergence() {
        let r = refine_until(1e-10, 10, |lvl| {
            let nodes = composite_nodes(&[0.0, 1.0], 1.0, 2, lvl);
            Ok(nodes.iter().map(|&(x, w)| w * x.exp()).sum())
        })
        .unwrap();
        assert_relative_eq!(r.value, std::f64::consts::E - 1.0, epsilon = 1e-11);
        assert!(r.levels >= 1);
    }
}
