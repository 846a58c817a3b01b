//! Physical parameters and the global unit convention.
//!
//! All internal computation happens in units with `m·Ω = 1`, where the two
//! length scales collapse onto the couplings: `ℓθ² = θ` and `ℓħ² = ħ`.
//! [`PhysParams::normalized`] performs that rescaling once, up front; every
//! other module consumes normalized parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("hbar must be non-negative, got {0}")]
    NegativeHbar(f64),
}

/// Physical constants of the model plus the two derived length scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Particle mass.
    pub m: f64,
    /// Trap angular frequency.
    pub omega: f64,
    /// Coupling action θ (sets the droplet area quantum).
    pub theta: f64,
    /// Quantum action ħ (may be zero in classical runs).
    pub hbar: f64,
}

impl PhysParams {
    pub fn new(m: f64, omega: f64, theta: f64, hbar: f64) -> Result<Self, ParamError> {
        for (name, value) in [("m", m), ("omega", omega), ("theta", theta), ("hbar", hbar)] {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name, value });
            }
        }
        for (name, value) in [("m", m), ("omega", omega), ("theta", theta)] {
            if value <= 0.0 {
                return Err(ParamError::NonPositive { name, value });
            }
        }
        if hbar < 0.0 {
            return Err(ParamError::NegativeHbar(hbar));
        }
        Ok(PhysParams {
            m,
            omega,
            theta,
            hbar,
        })
    }

    /// Unit parameter set: m = Ω = θ = ħ = 1.
    pub fn unit() -> Self {
        PhysParams {
            m: 1.0,
            omega: 1.0,
            theta: 1.0,
            hbar: 1.0,
        }
    }

    /// `ℓθ = sqrt(θ/(mΩ))`.
    pub fn ell_theta(&self) -> f64 {
        (self.theta / (self.m * self.omega)).sqrt()
    }

    /// `ℓħ = sqrt(ħ/(mΩ))`.
    pub fn ell_hbar(&self) -> f64 {
        (self.hbar / (self.m * self.omega)).sqrt()
    }

    /// Rescale to the internal `mΩ = 1` convention, preserving Ω and both
    /// length scales. Idempotent: a normalized set maps to itself.
    pub fn normalized(&self) -> PhysParams {
        let m_omega = self.m * self.omega;
        PhysParams {
            m: 1.0 / self.omega,
            omega: self.omega,
            theta: self.theta / m_omega,
            hbar: self.hbar / m_omega,
        }
    }

    /// True when `mΩ = 1` to round-off.
    pub fn is_normalized(&self) -> bool {
        (self.m * self.omega - 1.0).abs() < 1e-12
    }
}

/// Validated normalization entry point used by the CLI.
pub fn normalize_units(params: PhysParams) -> Result<PhysParams, ParamError> {
    // Re-run validation so raw config values get rejected here.
    PhysParams::new(params.m, params.omega, params.theta, params.hbar)?;
    Ok(params.normalized())
}

/// Tolerances and size knobs shared by the numerical routines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NumericConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Side length of square phase-space grids.
    pub grid_size: usize,
    /// Fock truncation level Λ.
    pub truncation: usize,
}

impl NumericConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(value > 0.0) {
                return Err(ParamError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iterations: 10_000,
            grid_size: 256,
            truncation: 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_params_are_fixed_by_normalization() {
        let p = PhysParams::unit();
        let n = normalize_units(p).unwrap();
        assert_eq!(p, n);
        assert_eq!(n.ell_theta(), 1.0);
        assert_eq!(n.ell_hbar(), 1.0);
    }

    #[test]
    fn normalization_preserves_length_scales() {
        let p = PhysParams::new(2.0, 0.5, 3.0, 1.0).unwrap();
        let n = normalize_units(p).unwrap();
        assert!((n.m * n.omega - 1.0).abs() < 1e-15);
        assert!((n.ell_theta().powi(2) - 3.0).abs() < 1e-12);
        assert!((n.ell_hbar().powi(2) - 1.0).abs() < 1e-12);
        assert!((n.ell_theta() - p.ell_theta()).abs() < 1e-12);
        assert!((n.ell_hbar() - p.ell_hbar()).abs() < 1e-12);
        assert!((n.omega - p.omega).abs() < 1e-15);
    }

    #[test]
    fn normalization_is_idempotent() {
        let p = PhysParams::new(7.0, 0.3, 2.0, 0.4).unwrap();
        let once = normalize_units(p).unwrap();
        let twice = normalize_units(once).unwrap();
        assert!((once.m - twice.m).abs() < 1e-15);
        assert!((once.theta - twice.theta).abs() < 1e-15);
        assert!((once.hbar - twice.hbar).abs() < 1e-15);
    }

    #[test]
    fn negative_omega_rejected() {
        assert!(PhysParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        let bad = PhysParams {
            m: 1.0,
            omega: -1.0,
            theta: 1.0,
            hbar: 1.0,
        };
        assert!(normalize_units(bad).is_err());
    }

    #[test]
    fn zero_hbar_allowed() {
        let p = PhysParams::new(1.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(p.ell_hbar(), 0.0);
    }
}
