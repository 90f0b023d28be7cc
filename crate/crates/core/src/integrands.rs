//! Strongly convex integrands `f` and the averaged curvature weight λ_h.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Gauss nodes in θ for [`lambda_h`].
pub const THETA_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandKind {
    /// `t²`
    Quadratic,
    /// `cosh t − 1`
    Cosh,
    /// `t² + t⁴/12`
    Quartic,
}

impl IntegrandKind {
    pub const ALL: [IntegrandKind; 3] = [Self::Quadratic, Self::Cosh, Self::Quartic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Cosh => "cosh",
            Self::Quartic => "quartic",
        }
    }
}

impl fmt::Display for IntegrandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegrandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "integrand",
                name: s.to_string(),
            })
    }
}

/// Even, C², strongly convex `f` with `f(0) = f'(0) = 0` and `f'' ≥ gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexIntegrand {
    pub kind: IntegrandKind,
    pub gamma: f64,
    /// Upper bound `c` on `f''`, when one exists.
    pub f2_upper: Option<f64>,
}

pub fn builtin_integrand(name: &str) -> Result<ConvexIntegrand> {
    Ok(ConvexIntegrand::new(name.parse()?))
}

impl ConvexIntegrand {
    pub fn new(kind: IntegrandKind) -> Self {
        let (gamma, f2_upper) = match kind {
            IntegrandKind::Quadratic => (2.0, Some(2.0)),
            IntegrandKind::Cosh => (1.0, None),
            IntegrandKind::Quartic => (2.0, None),
        };
        Self {
            kind,
            gamma,
            f2_upper,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        match self.kind {
            IntegrandKind::Quadratic => t * t,
            IntegrandKind::Cosh => {
                // cosh t − 1 without cancellation near 0
                let s = (0.5 * t).sinh();
                2.0 * s * s
            }
            IntegrandKind::Quartic => {
                let t2 = t * t;
                t2 + t2 * t2 / 12.0
            }
        }
    }

    #[inline]
    pub fn df(&self, t: f64) -> f64 {
        match self.kind {
            IntegrandKind::Quadratic => 2.0 * t,
            IntegrandKind::Cosh => t.sinh(),
            IntegrandKind::Quartic => 2.0 * t + t * t * t / 3.0,
        }
    }

    #[inline]
    pub fn d2f(&self, t: f64) -> f64 {
        match self.kind {
            IntegrandKind::Quadratic => 2.0,
            IntegrandKind::Cosh => t.cosh(),
            IntegrandKind::Quartic => 2.0 + t * t,
        }
    }

    /// Checks `f(0) = f'(0) = 0`, `f'' ≥ γ`, `f(t) ≥ γt²/2` and `f'' ≤ c`
    /// on a logarithmic grid of `±t`.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Validation("gamma must be positive".into()));
        }
        if self.f(0.0) != 0.0 || self.df(0.0) != 0.0 {
            return Err(Error::Validation(format!(
                "{}: f(0) and f'(0) must vanish",
                self.name()
            )));
        }
        for k in -60..=20 {
            let mag = 10f64.powf(k as f64 / 10.0);
            for t in [mag, -mag] {
                let d2 = self.d2f(t);
                if d2 < self.gamma {
                    return Err(Error::Validation(format!(
                        "{}: f''({t}) = {d2} < gamma",
                        self.name()
                    )));
                }
                if self.f(t) < 0.5 * self.gamma * t * t * (1.0 - 1e-14) {
                    return Err(Error::Validation(format!(
                        "{}: f({t}) below gamma t^2/2",
                        self.name()
                    )));
                }
                if let Some(c) = self.f2_upper {
                    if d2 > c {
                        return Err(Error::Validation(format!(
                            "{}: f''({t}) = {d2} exceeds f2_upper",
                            self.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `∫_0^1 (1 − θ) f''((1 − θ) a + θ b) dθ`, so that
/// `f(b) − f(a) = f'(a)(b − a) + λ (b − a)²`.
#[inline]
pub fn lambda_h(fi: &ConvexIntegrand, a: f64, b: f64) -> f64 {
    lambda_h_with(fi, a, b, THETA_NODES)
}

pub fn lambda_h_with(fi: &ConvexIntegrand, a: f64, b: f64, n_theta: usize) -> f64 {
    let rule = gauss_legendre(n_theta);
    rule.integrate(0.0, 1.0, |th| (1.0 - th) * fi.d2f((1.0 - th) * a + th * b))
}
