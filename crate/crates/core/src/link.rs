//! Inverse link functions μ with their first two derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied (μ, μ′, μ″) triple.
#[derive(Clone)]
pub struct CustomLink {
    name: String,
    mu: ScalarFn,
    mu_prime: ScalarFn,
    mu_double_prime: ScalarFn,
}

impl fmt::Debug for CustomLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLink").field("name", &self.name).finish()
    }
}

/// Strictly increasing inverse link function.
#[derive(Debug, Clone, Default)]
pub enum Link {
    /// μ(x) = x.
    #[default]
    Identity,
    /// μ(x) = 1 / (1 + e^{−x}).
    Logit,
    /// μ(x) = 1 − exp(−eˣ).
    CloglogComplement,
    Custom(CustomLink),
}

/// Grid on which custom links are checked.
const CHECK_GRID: [f64; 9] = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Link {
    /// Parses a shipped link by name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "identity" => Some(Link::Identity),
            "logit" | "logistic" => Some(Link::Logit),
            "cloglog-complement" => Some(Link::CloglogComplement),
            _ => None,
        }
    }

    /// Wraps a custom triple after checking monotonicity and derivative
    /// consistency against central differences on a fixed grid.
    pub fn custom<F, G, H>(name: &str, mu: F, mu_prime: G, mu_double_prime: H) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let link = Link::Custom(CustomLink {
            name: name.to_string(),
            mu: Arc::new(mu),
            mu_prime: Arc::new(mu_prime),
            mu_double_prime: Arc::new(mu_double_prime),
        });
        link.check_derivatives(&CHECK_GRID, 1e-6)?;
        Ok(link)
    }

    pub fn name(&self) -> &str {
        match self {
            Link::Identity => "identity",
            Link::Logit => "logit",
            Link::CloglogComplement => "cloglog-complement",
            Link::Custom(c) => &c.name,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Link::Identity)
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Logit => logistic(x),
            Link::CloglogComplement => -(-x.exp()).exp_m1(),
            Link::Custom(c) => (c.mu)(x),
        }
    }

    #[inline]
    pub fn mu_prime(&self, x: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logit => {
                let m = logistic(x);
                m * (1.0 - m)
            }
            Link::CloglogComplement => (x - x.exp()).exp(),
            Link::Custom(c) => (c.mu_prime)(x),
        }
    }

    #[inline]
    pub fn mu_double_prime(&self, x: f64) -> f64 {
        match self {
            Link::Identity => 0.0,
            Link::Logit => {
                let m = logistic(x);
                m * (1.0 - m) * (1.0 - 2.0 * m)
            }
            Link::CloglogComplement => (1.0 - x.exp()) * (x - x.exp()).exp(),
            Link::Custom(c) => (c.mu_double_prime)(x),
        }
    }

    /// Solves μ(x) = y; `None` when `y` is outside the range of μ.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        match self {
            Link::Identity => Some(y),
            Link::Logit => (y > 0.0 && y < 1.0).then(|| (y / (1.0 - y)).ln()),
            Link::CloglogComplement => (y > 0.0 && y < 1.0).then(|| (-(-y).ln_1p()).ln()),
            Link::Custom(_) => {
                let (mut lo, mut hi) = (-50.0, 50.0);
                if !(self.mu(lo) < y && y < self.mu(hi)) {
                    return None;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.mu(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }

    /// Checks μ′ > 0 and that μ′, μ″ match central differences of μ and μ′
    /// to relative tolerance `rtol` at each grid point.
    pub fn check_derivatives(&self, grid: &[f64], rtol: f64) -> Result<()> {
        const H: f64 = 1e-5;
        for &x in grid {
            let d1 = self.mu_prime(x);
            if d1.is_nan() || d1 <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "link `{}`: mu' must be positive, got {d1} at {x}",
                    self.name()
                )));
            }
            let fd1 = (self.mu(x + H) - self.mu(x - H)) / (2.0 * H);
            let fd2 = (self.mu_prime(x + H) - self.mu_prime(x - H)) / (2.0 * H);
            let d2 = self.mu_double_prime(x);
            // Absolute floor covers rounding in the differences where μ is flat.
            let floor = 1e-9;
            if (fd1 - d1).abs() > rtol * d1.abs() + floor || (fd2 - d2).abs() > rtol * d2.abs() + floor {
                return Err(Error::InvalidParameter(format!(
                    "link `{}`: derivatives inconsistent with mu at {x}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}
