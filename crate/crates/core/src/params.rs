//! Physical parameters of the atom–cavity–pump system.
//!
//! Everything is stored in SI units with angular frequencies in rad/s.
//! Configuration files use ordinary frequencies in MHz; see
//! [`mhz`] / [`to_mhz`] for the conversion ω = 2πν.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ordinary frequency in MHz to angular frequency in rad/s.
pub fn mhz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e6
}

/// Angular frequency in rad/s to ordinary frequency in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Atom–cavity coupling at an antinode (rad/s).
    pub g0: f64,
    /// Cavity field decay rate κ (rad/s); the linewidth is 2κ.
    pub kappa: f64,
    /// Population decay rate of the excited level (rad/s).
    pub gamma: f64,
    /// Fraction of spontaneous decay ending in |u⟩.
    pub branch_u: f64,
    /// Fraction of spontaneous decay ending in |g⟩.
    pub branch_g: f64,
    /// Peak pump Rabi frequency (rad/s).
    pub omega0: f64,
    /// Cavity mode waist (m).
    pub w_c: f64,
    /// Pump beam waist (m).
    pub w_p: f64,
    /// Atomic velocity (m/s).
    pub v: f64,
    /// Pump displacement downstream of the cavity axis (m).
    pub delta_x: f64,
    /// Pump detuning (rad/s).
    pub delta_p: f64,
    /// Cavity detuning (rad/s).
    pub delta_c: f64,
    /// Optical wavelength setting the standing-wave period (m).
    pub lambda_opt: f64,
    /// Photon-number truncation.
    pub n_max: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g0: mhz(4.5),
            kappa: mhz(2.5) / 2.0,
            gamma: mhz(6.0),
            branch_u: 0.5,
            branch_g: 0.5,
            omega0: mhz(30.0),
            w_c: 35e-6,
            w_p: 50e-6,
            v: 2.0,
            delta_x: 45e-6 * 2.0,
            delta_p: 0.0,
            delta_c: 0.0,
            lambda_opt: 780.24e-9,
            n_max: 1,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("g0", self.g0),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("omega0", self.omega0),
        ];
        for (name, value) in nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(invalid(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        let positive = [
            ("w_c", self.w_c),
            ("w_p", self.w_p),
            ("v", self.v),
            ("lambda_opt", self.lambda_opt),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(invalid(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("delta_x", self.delta_x),
            ("delta_p", self.delta_p),
            ("delta_c", self.delta_c),
        ] {
            if !value.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if self.n_max < 1 {
            return Err(invalid("n_max must be at least 1"));
        }
        for (name, b) in [("branch_u", self.branch_u), ("branch_g", self.branch_g)] {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {b}")));
            }
        }
        if (self.branch_u + self.branch_g - 1.0).abs() > 1e-12 {
            return Err(invalid(format!(
                "branch_u + branch_g must equal 1, got {}",
                self.branch_u + self.branch_g
            )));
        }
        Ok(())
    }

    /// Pump delay δx/v (s).
    pub fn delay(&self) -> f64 {
        self.delta_x / self.v
    }

    /// Returns a copy whose pump displacement corresponds to `delay` seconds.
    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delta_x = delay * self.v;
        self
    }

    pub fn with_detunings(mut self, delta_p: f64, delta_c: f64) -> Self {
        self.delta_p = delta_p;
        self.delta_c = delta_c;
        self
    }
}
