//! Density-to-coefficient interpolation.
//!
//! The penalized law `kappa(s) = (1 - exp(-a s))^(-p)` is strictly decreasing
//! and blows up at `s = 0`; the saturating variant `(1 - exp(-a s))^p` is its
//! reciprocal, increasing and bounded by one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Densities below this value are raised to it before `kappa` is evaluated.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaVariant {
    /// `(1 - exp(-a s))^(-p)`.
    Decaying,
    /// `(1 - exp(-a s))^p`.
    Saturating,
    /// `kappa == 1`, `kappa' == 0`. Used for verification problems.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaParams {
    pub a: f64,
    pub p: f64,
    pub variant: KappaVariant,
    /// Factor applied to `kappa'(rho) * energy density` when forming the
    /// sensitivity. `-0.5` is the exact derivative of the discrete objective.
    #[serde(default = "default_sensitivity_scale")]
    pub sensitivity_scale: f64,
}

fn default_sensitivity_scale() -> f64 {
    -0.5
}

impl KappaParams {
    pub fn new(a: f64, p: f64, variant: KappaVariant) -> Result<Self> {
        let params = Self {
            a,
            p,
            variant,
            sensitivity_scale: default_sensitivity_scale(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Heat-conduction defaults: `a = 1.3`, `p = 3`.
    pub fn heat_default() -> Self {
        Self::new(1.3, 3.0, KappaVariant::Decaying).expect("valid defaults")
    }

    /// Elasticity defaults: `a = 2.0`, `p = 3`.
    pub fn elastic_default() -> Self {
        Self::new(2.0, 3.0, KappaVariant::Decaying).expect("valid defaults")
    }

    pub fn unit() -> Self {
        Self::new(1.0, 1.0, KappaVariant::Unit).expect("valid defaults")
    }

    pub fn with_sensitivity_scale(mut self, scale: f64) -> Self {
        self.sensitivity_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("a", format!("must be positive, got {}", self.a)));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid("p", format!("must be positive, got {}", self.p)));
        }
        if !self.sensitivity_scale.is_finite() {
            return Err(invalid("sensitivity_scale", "must be finite"));
        }
        Ok(())
    }

    fn check(&self, s: f64) -> Result<()> {
        if !s.is_finite() || (self.variant != KappaVariant::Unit && s <= 0.0) {
            return Err(Error::DensityDomain { value: s });
        }
        Ok(())
    }

    pub fn kappa(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        // 1 - exp(-a s) without cancellation for small a s.
        let base = -(-self.a * s).exp_m1();
        Ok(match self.variant {
            KappaVariant::Decaying => base.powf(-self.p),
            KappaVariant::Saturating => base.powf(self.p),
            KappaVariant::Unit => 1.0,
        })
    }

    pub fn kappa_prime(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let decay = (-self.a * s).exp();
        let base = -(-self.a * s).exp_m1();
        Ok(match self.variant {
            KappaVariant::Decaying => -self.p * self.a * decay * base.powf(-self.p - 1.0),
            KappaVariant::Saturating => self.p * self.a * decay * base.powf(self.p - 1.0),
            KappaVariant::Unit => 0.0,
        })
    }
}
