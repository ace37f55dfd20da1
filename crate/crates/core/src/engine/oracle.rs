//! Piecewise-constant exponential propagator used as an independent check
//! on the adaptive integrator. On each step of width `dt` a constant
//! generator is formed and its exact superoperator exponential applied:
//!
//! * [`OracleScheme::Frozen`]: the Liouvillian at the step midpoint
//!   (second order in `dt`).
//! * [`OracleScheme::Magnus4`]: the two-point Gauss Magnus generator
//!   `h/2 (L₁ + L₂) + √3 h²/12 [L₂, L₁]` (fourth order).
//!
//! Accumulators use the trapezoid rule.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{expectation, DensityState, Trajectory};
use crate::drive::{Drive, GeometryOffsets, Transit};
use crate::error::{invalid, Result};
use crate::model::{CMatrix, Model};
use crate::params::SystemParams;

/// Liouvillian for fixed envelopes as a D²×D² matrix acting on the
/// column-major vectorisation of ρ.
pub fn superoperator(model: &Model, g: f64, omega: f64) -> CMatrix {
    let d = model.dim();
    let id = CMatrix::identity(d, d);
    let h_eff = model.h.at(g, omega) + &model.damping;
    let mi = Complex64::new(0.0, -1.0);
    // vec(AρB) = (Bᵀ ⊗ A) vec(ρ)
    let mut l = (id.kronecker(&h_eff) - h_eff.conjugate().kronecker(&id)).map(|z| z * mi);
    for c in &model.collapse {
        l += c.op.conjugate().kronecker(&c.op);
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleScheme {
    Frozen,
    #[default]
    Magnus4,
}

pub fn oracle_propagate(
    params: &SystemParams,
    geom: &GeometryOffsets,
    dt: f64,
    rho0: &CMatrix,
) -> Result<Trajectory> {
    let model = Model::new(*params)?;
    let drive = Transit::new(*params, *geom);
    oracle_propagate_drive(&model, &drive, dt, rho0, OracleScheme::default(), 1e-4)
}

pub fn oracle_propagate_drive(
    model: &Model,
    drive: &dyn Drive,
    dt: f64,
    rho0: &CMatrix,
    scheme: OracleScheme,
    span_cutoff: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("oracle step must be positive, got {dt}")));
    }
    let d = model.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(invalid("initial state dimension mismatch"));
    }
    let (t0, t1) = drive.span(span_cutoff);
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let p = &model.params;

    let rates = |rho: &CMatrix| {
        (
            2.0 * p.kappa * expectation(&model.ops.number, rho),
            p.gamma * expectation(&model.ops.proj_e, rho),
        )
    };

    let mut state = DensityState::new(rho0.clone(), t0);
    let mut vec_rho = DVector::from_column_slice(rho0.as_slice());
    let mut snapshots = Vec::with_capacity(steps + 1);
    snapshots.push(state.clone());
    let (mut r_emit, mut r_spont) = rates(&state.rho);

    for k in 0..steps {
        let ta = t0 + k as f64 * dt;
        let tb = if k + 1 == steps {
            t1
        } else {
            t0 + (k + 1) as f64 * dt
        };
        let h = tb - ta;
        let generator = match scheme {
            OracleScheme::Frozen => {
                let (g, omega) = drive.envelopes(0.5 * (ta + tb));
                superoperator(model, g, omega) * Complex64::new(h, 0.0)
            }
            OracleScheme::Magnus4 => {
                let off = h * 3f64.sqrt() / 6.0;
                let mid = 0.5 * (ta + tb);
                let (g1, o1) = drive.envelopes(mid - off);
                let (g2, o2) = drive.envelopes(mid + off);
                let l1 = superoperator(model, g1, o1);
                let l2 = superoperator(model, g2, o2);
                let comm = &l2 * &l1 - &l1 * &l2;
                (l1 + l2) * Complex64::new(0.5 * h, 0.0)
                    + comm * Complex64::new(3f64.sqrt() * h * h / 12.0, 0.0)
            }
        };
        let prop = generator.exp();
        vec_rho = prop * vec_rho;
        let rho = CMatrix::from_column_slice(d, d, vec_rho.as_slice());
        let (e, s) = rates(&rho);
        state = DensityState {
            rho,
            t: tb,
            acc_emit: state.acc_emit + 0.5 * h * (r_emit + e),
            acc_spont: state.acc_spont + 0.5 * h * (r_spont + s),
        };
        r_emit = e;
        r_spont = s;
        snapshots.push(state.clone());
    }
    Ok(Trajectory::from_snapshots(
        model.basis(),
        snapshots,
        Default::default(),
    ))
}
