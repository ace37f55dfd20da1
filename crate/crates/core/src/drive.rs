//! Time-dependent coupling envelopes seen by an atom in transit, and the
//! feasibility diagnostics for the Raman passage.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::params::SystemParams;

/// Atom position relative to the cavity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryOffsets {
    /// Position along the cavity axis (m); 0 is an antinode.
    pub x_axial: f64,
    /// Offset along the pump propagation direction (m); 0 is on the cavity axis.
    pub y_transverse: f64,
}

impl GeometryOffsets {
    pub const ON_AXIS: Self = Self {
        x_axial: 0.0,
        y_transverse: 0.0,
    };

    pub fn new(x_axial: f64, y_transverse: f64) -> Self {
        Self {
            x_axial,
            y_transverse,
        }
    }

    /// Same point with `x_axial` reduced into `[-λ/2, λ/2)`.
    pub fn reduced(self, lambda: f64) -> Self {
        let x = (self.x_axial + 0.5 * lambda).rem_euclid(lambda) - 0.5 * lambda;
        Self { x_axial: x, ..self }
    }
}

/// Cavity coupling g(t) (rad/s): half the vacuum Rabi frequency.
pub fn cavity_coupling(t: f64, params: &SystemParams, geom: &GeometryOffsets) -> f64 {
    let standing = (2.0 * PI * geom.x_axial / params.lambda_opt).cos();
    let transverse = (-(geom.y_transverse / params.w_c).powi(2)).exp();
    let transit = (-(t * params.v / params.w_c).powi(2)).exp();
    params.g0 * standing * transverse * transit
}

/// Pump Rabi frequency Ω_P(t) (rad/s). Independent of `y_transverse`.
pub fn pump_rabi(t: f64, params: &SystemParams, geom: &GeometryOffsets) -> f64 {
    let transverse = (-(geom.x_axial / params.w_p).powi(2)).exp();
    let transit = (-((t * params.v - params.delta_x) / params.w_p).powi(2)).exp();
    params.omega0 * transverse * transit
}

/// Source of the instantaneous `(g, Ω_P)` pair driving the Hamiltonian.
pub trait Drive: Sync {
    fn envelopes(&self, t: f64) -> (f64, f64);

    /// Natural integration window for this drive.
    fn span(&self, cutoff: f64) -> (f64, f64);
}

/// Atom crossing cavity mode and pump beam at constant velocity.
#[derive(Debug, Clone, Copy)]
pub struct Transit {
    pub params: SystemParams,
    pub geom: GeometryOffsets,
}

impl Transit {
    pub fn new(params: SystemParams, geom: GeometryOffsets) -> Self {
        Self { params, geom }
    }
}

impl Drive for Transit {
    fn envelopes(&self, t: f64) -> (f64, f64) {
        (
            cavity_coupling(t, &self.params, &self.geom),
            pump_rabi(t, &self.params, &self.geom),
        )
    }

    /// Window where either Gaussian exceeds `cutoff` of its peak, extended
    /// by five cavity lifetimes so the last photon can leave.
    fn span(&self, cutoff: f64) -> (f64, f64) {
        let p = &self.params;
        let reach = (-cutoff.ln()).max(0.0).sqrt();
        let cav = reach * p.w_c / p.v;
        let pump_lo = (p.delta_x - reach * p.w_p) / p.v;
        let pump_hi = (p.delta_x + reach * p.w_p) / p.v;
        let tail = if p.kappa > 0.0 {
            5.0 / (2.0 * p.kappa)
        } else {
            0.0
        };
        ((-cav).min(pump_lo), cav.max(pump_hi) + tail)
    }
}

/// Time-independent envelopes over a fixed window starting at zero.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub g: f64,
    pub omega: f64,
    pub duration: f64,
}

impl Drive for Constant {
    fn envelopes(&self, _t: f64) -> (f64, f64) {
        (self.g, self.omega)
    }

    fn span(&self, _cutoff: f64) -> (f64, f64) {
        (0.0, self.duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// |Δ_C − Δ_P| < 2κ
    pub raman_ok: bool,
    /// 2g₀w_C/v
    pub adiabatic_cavity: f64,
    /// Ω₀w_P/v
    pub adiabatic_pump: f64,
    /// Cavity transit time w_C/v (s).
    pub interaction_time: f64,
    /// Cavity photon lifetime (2κ)⁻¹ (s).
    pub cavity_lifetime: f64,
    /// Interaction time exceeds the photon lifetime by at least a factor ten.
    pub emission_time_ok: bool,
}

pub fn feasibility(params: &SystemParams) -> Feasibility {
    let interaction_time = params.w_c / params.v;
    let cavity_lifetime = 1.0 / (2.0 * params.kappa);
    Feasibility {
        raman_ok: (params.delta_c - params.delta_p).abs() < 2.0 * params.kappa,
        adiabatic_cavity: 2.0 * params.g0 * params.w_c / params.v,
        adiabatic_pump: params.omega0 * params.w_p / params.v,
        interaction_time,
        cavity_lifetime,
        emission_time_ok: interaction_time >= 10.0 * cavity_lifetime,
    }
}
