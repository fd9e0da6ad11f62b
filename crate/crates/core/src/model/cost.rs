use serde::{Deserialize, Serialize};

use super::ModelError;

/// Convex cost of signal precision, `C(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModel {
    /// `c·k`
    Linear { c: f64 },
    /// `(c/2)·k²`
    Quadratic { c: f64 },
    /// `c·k^p`, `p ≥ 1`
    Power { c: f64, p: f64 },
}

impl CostModel {
    pub fn linear(c: f64) -> Result<Self, ModelError> {
        let m = Self::Linear { c };
        m.validate()?;
        Ok(m)
    }

    pub fn quadratic(c: f64) -> Result<Self, ModelError> {
        let m = Self::Quadratic { c };
        m.validate()?;
        Ok(m)
    }

    pub fn power(c: f64, p: f64) -> Result<Self, ModelError> {
        let m = Self::Power { c, p };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let c = self.coefficient();
        if !(c > 0.0 && c.is_finite()) {
            return Err(ModelError::InvalidCost(format!("coefficient must be finite and > 0, got {c}")));
        }
        if let Self::Power { p, .. } = *self {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(ModelError::InvalidCost(format!("power exponent must be >= 1, got {p}")));
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Quadratic { .. } => "quadratic",
            Self::Power { .. } => "power",
        }
    }

    pub fn coefficient(&self) -> f64 {
        match *self {
            Self::Linear { c } | Self::Quadratic { c } | Self::Power { c, .. } => c,
        }
    }

    /// Same family with coefficient `c`.
    pub fn with_coefficient(&self, c: f64) -> Result<Self, ModelError> {
        let m = match *self {
            Self::Linear { .. } => Self::Linear { c },
            Self::Quadratic { .. } => Self::Quadratic { c },
            Self::Power { p, .. } => Self::Power { c, p },
        };
        m.validate()?;
        Ok(m)
    }

    /// `C(k)`.
    pub fn value(&self, k: f64) -> f64 {
        match *self {
            Self::Linear { c } => c * k,
            Self::Quadratic { c } => 0.5 * c * k * k,
            Self::Power { c, p } => c * k.powf(p),
        }
    }

    /// `C′(k)` for `k > 0`.
    pub fn marginal(&self, k: f64) -> f64 {
        match *self {
            Self::Linear { c } => c,
            Self::Quadratic { c } => c * k,
            Self::Power { c, p } => c * p * k.powf(p - 1.0),
        }
    }

    /// Right derivative `C′(0⁺)`.
    pub fn marginal_at_zero(&self) -> f64 {
        match *self {
            Self::Linear { c } => c,
            Self::Quadratic { .. } => 0.0,
            Self::Power { c, p } => {
                if p == 1.0 {
                    c
                } else {
                    0.0
                }
            }
        }
    }
}
