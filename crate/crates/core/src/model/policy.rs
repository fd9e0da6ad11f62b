//! Law of the intervention strength `x`.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::ModelError;
use crate::rng;

/// Distribution of the PM's intervention strength.
///
/// Only the first two moments enter the closed forms. The three families cover a
/// deterministic strength, flat uncertainty and bell-shaped uncertainty; each has
/// bounded support so draws never leave `[-x̄, x̄]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyStrengthDist {
    PointMass { value: f64 },
    Uniform { low: f64, high: f64 },
    /// `N(loc, scale²)` conditioned on `[low, high]`.
    TruncatedNormal {
        loc: f64,
        scale: f64,
        low: f64,
        high: f64,
    },
}

impl PolicyStrengthDist {
    pub fn point_mass(value: f64) -> Result<Self, ModelError> {
        let d = Self::PointMass { value };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, ModelError> {
        let d = Self::Uniform { low, high };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_normal(loc: f64, scale: f64, low: f64, high: f64) -> Result<Self, ModelError> {
        let d = Self::TruncatedNormal {
            loc,
            scale,
            low,
            high,
        };
        d.validate()?;
        Ok(d)
    }

    /// Point mass when `sigma2 == 0`, otherwise the uniform law centred on `mu`
    /// with variance `sigma2`.
    pub fn with_moments(mu: f64, sigma2: f64) -> Result<Self, ModelError> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(ModelError::domain("sigma2", sigma2, "finite and >= 0"));
        }
        if sigma2 == 0.0 {
            Self::point_mass(mu)
        } else {
            let half = (3.0 * sigma2).sqrt();
            Self::uniform(mu - half, mu + half)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidDistribution(msg.to_string()));
        match *self {
            Self::PointMass { value } => {
                if !value.is_finite() {
                    return bad("point_mass value must be finite");
                }
            }
            Self::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad("uniform requires finite low < high");
                }
            }
            Self::TruncatedNormal {
                loc,
                scale,
                low,
                high,
            } => {
                if !(loc.is_finite() && scale.is_finite() && scale > 0.0) {
                    return bad("truncated_normal requires finite loc and scale > 0");
                }
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad("truncated_normal requires finite low < high");
                }
                let (_, _, mass) = truncation(loc, scale, low, high);
                if !(mass > 1e-300) {
                    return bad("truncated_normal interval carries no probability mass");
                }
            }
        }
        Ok(())
    }

    /// `μ = E(x)`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::PointMass { value } => value,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::TruncatedNormal {
                loc,
                scale,
                low,
                high,
            } => {
                let (a, b, mass) = truncation(loc, scale, low, high);
                let std = Normal::standard();
                loc + scale * (std.pdf(a) - std.pdf(b)) / mass
            }
        }
    }

    /// `σ² = Var(x)`.
    pub fn variance(&self) -> f64 {
        match *self {
            Self::PointMass { .. } => 0.0,
            Self::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Self::TruncatedNormal {
                loc,
                scale,
                low,
                high,
            } => {
                let (a, b, mass) = truncation(loc, scale, low, high);
                let std = Normal::standard();
                let (pa, pb) = (std.pdf(a), std.pdf(b));
                // a·φ(a) with a = ±inf is never reached: bounds are finite.
                let shift = (pa - pb) / mass;
                let var = scale * scale * (1.0 + (a * pa - b * pb) / mass - shift * shift);
                var.max(0.0)
            }
        }
    }

    /// `E(x²) = σ² + μ²`.
    pub fn second_moment(&self) -> f64 {
        let mu = self.mean();
        self.variance() + mu * mu
    }

    /// Support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::PointMass { value } => (value, value),
            Self::Uniform { low, high } | Self::TruncatedNormal { low, high, .. } => (low, high),
        }
    }

    /// Smallest `x̄` with support inside `[-x̄, x̄]`.
    pub fn bound(&self) -> f64 {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    pub fn sampler(&self) -> PolicySampler {
        match *self {
            Self::PointMass { value } => PolicySampler::Constant(value),
            Self::Uniform { low, high } => PolicySampler::Uniform { low, high },
            Self::TruncatedNormal {
                loc,
                scale,
                low,
                high,
            } => {
                let (a, b, _) = truncation(loc, scale, low, high);
                let std = Normal::standard();
                // Invert in the tail closer to the mass so the CDF keeps precision.
                let reflect = a > 0.0;
                let (ca, cb) = if reflect {
                    (std.cdf(-b), std.cdf(-a))
                } else {
                    (std.cdf(a), std.cdf(b))
                };
                PolicySampler::TruncatedNormal {
                    loc,
                    scale,
                    low,
                    high,
                    cdf_low: ca,
                    cdf_span: cb - ca,
                    reflect,
                }
            }
        }
    }
}

/// Standardised bounds and the probability mass between them.
fn truncation(loc: f64, scale: f64, low: f64, high: f64) -> (f64, f64, f64) {
    let std = Normal::standard();
    let a = (low - loc) / scale;
    let b = (high - loc) / scale;
    let mass = if a > 0.0 { std.sf(a) - std.sf(b) } else { std.cdf(b) - std.cdf(a) };
    (a, b, mass)
}

/// Draws from a [`PolicyStrengthDist`] with the inversion constants precomputed.
#[derive(Debug, Clone, Copy)]
pub enum PolicySampler {
    Constant(f64),
    Uniform {
        low: f64,
        high: f64,
    },
    TruncatedNormal {
        loc: f64,
        scale: f64,
        low: f64,
        high: f64,
        cdf_low: f64,
        cdf_span: f64,
        reflect: bool,
    },
}

impl PolicySampler {
    /// False for the point mass, which consumes no uniforms.
    pub fn uses_randomness(&self) -> bool {
        !matches!(self, Self::Constant(_))
    }

    #[inline]
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::Uniform { low, high } => low + (high - low) * rng::open_unit(rng),
            Self::TruncatedNormal {
                loc,
                scale,
                low,
                high,
                cdf_low,
                cdf_span,
                reflect,
            } => {
                let u = cdf_low + cdf_span * rng::open_unit(rng);
                let z = rng::normal_quantile(u);
                let z = if reflect { -z } else { z };
                (loc + scale * z).clamp(low, high)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_moments() {
        let d = PolicyStrengthDist::point_mass(1.5).unwrap();
        assert_eq!(d.mean(), 1.5);
        assert_eq!(d.variance(), 0.0);
        assert_eq!(d.second_moment(), 2.25);
        assert_eq!(d.bound(), 1.5);
    }

    #[test]
    fn uniform_moments() {
        let d = PolicyStrengthDist::uniform(0.0, 2.0).unwrap();
        assert_eq!(d.mean(), 1.0);
        assert!((d.variance() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.bound(), 2.0);
    }

    #[test]
    fn with_moments_reproduces_mean_and_variance() {
        let d = PolicyStrengthDist::with_moments(0.7, 0.3).unwrap();
        assert!((d.mean() - 0.7).abs() < 1e-15);
        assert!((d.variance() - 0.3).abs() < 1e-14);
        assert!(matches!(
            PolicyStrengthDist::with_moments(0.7, 0.0).unwrap(),
            PolicyStrengthDist::PointMass { .. }
        ));
        assert!(PolicyStrengthDist::with_moments(0.7, -1.0).is_err());
    }

    // Moments checked against numerical integration of the truncated density.
    #[test]
    fn truncated_normal_moments_match_quadrature() {
        let (loc, scale, low, high) = (1.0, 0.5, -3.0, 3.0);
        let d = PolicyStrengthDist::truncated_normal(loc, scale, low, high).unwrap();
        let n = Normal::new(loc, scale).unwrap();
        let steps = 200_000;
        let h = (high - low) / steps as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=steps {
            let x = low + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let p = n.pdf(x) * w * h;
            z += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        let mean = m1 / z;
        let var = m2 / z - mean * mean;
        assert!((d.mean() - mean).abs() < 1e-9, "{} vs {}", d.mean(), mean);
        assert!((d.variance() - var).abs() < 1e-9, "{} vs {}", d.variance(), var);

        // Tight truncation shifts the moments visibly.
        let t = PolicyStrengthDist::truncated_normal(0.0, 1.0, 0.5, 2.0).unwrap();
        assert!(t.mean() > 0.5 && t.mean() < 2.0);
        assert!(t.variance() < 1.0 / 12.0 * 1.5f64.powi(2) + 1e-12);
    }

    #[test]
    fn far_tail_truncation_is_stable() {
        let d = PolicyStrengthDist::truncated_normal(0.0, 1.0, 8.0, 9.0).unwrap();
        let mu = d.mean();
        assert!(mu > 8.0 && mu < 8.2, "{mu}");
        let s = d.sampler();
        let mut r = rng::substream(3, 0);
        for _ in 0..1000 {
            let x = s.draw(&mut r);
            assert!((8.0..=9.0).contains(&x));
        }
    }

    #[test]
    fn invalid_families_rejected() {
        assert!(PolicyStrengthDist::uniform(1.0, 1.0).is_err());
        assert!(PolicyStrengthDist::truncated_normal(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(PolicyStrengthDist::truncated_normal(0.0, 1.0, 40.0, 41.0).is_err());
        assert!(PolicyStrengthDist::point_mass(f64::NAN).is_err());
    }

    #[test]
    fn serde_tagging() {
        let d: PolicyStrengthDist =
            serde_json::from_str(r#"{"kind":"uniform","low":0,"high":2}"#).unwrap();
        assert_eq!(d, PolicyStrengthDist::Uniform { low: 0.0, high: 2.0 });
        let err = serde_json::from_str::<PolicyStrengthDist>(r#"{"kind":"point_mass","valu":1}"#);
        assert!(err.is_err());
    }
}
