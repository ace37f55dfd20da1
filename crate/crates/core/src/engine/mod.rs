//! Lindblad master-equation integration over an atom transit.
//!
//! The density matrix and two scalar accumulators (emitted photon
//! probability and spontaneous-event count) are integrated together as one
//! ODE system with an adaptive Dormand–Prince pair. [`oracle_propagate`]
//! provides an independent piecewise-constant exponential propagator used
//! for cross-checks.

pub mod dopri;
mod kernel;
mod oracle;

pub use oracle::{oracle_propagate, oracle_propagate_drive, superoperator, OracleScheme};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive::{Constant, Drive, GeometryOffsets, Transit};
use crate::error::{invalid, Error, Result};
use crate::model::{Basis, BasisState, CMatrix, Level, Model};
use crate::params::SystemParams;

pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: CMatrix,
    /// Time (s).
    pub t: f64,
    /// ∫ 2κ⟨a†a⟩ dt
    pub acc_emit: f64,
    /// ∫ Γ P_e dt
    pub acc_spont: f64,
}

impl DensityState {
    pub fn new(rho: CMatrix, t: f64) -> Self {
        Self {
            rho,
            t,
            acc_emit: 0.0,
            acc_spont: 0.0,
        }
    }

    pub fn pure(basis: &Basis, state: BasisState, t: f64) -> Result<Self> {
        Ok(Self::new(basis.projector(state)?, t))
    }

    /// `|u,0⟩⟨u,0|`, the state of an atom entering an empty cavity.
    pub fn initial(basis: &Basis, t: f64) -> Self {
        Self::pure(basis, BasisState::new(Level::U, 0), t).expect("(u,0) is always in the basis")
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.rho, &self.rho.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()).scale(0.5);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks trace, Hermiticity and positivity against the module tolerances.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return Err(format!("hermiticity error {herm:e}"));
        }
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(format!("trace {tr} deviates from 1"));
        }
        // ρ + εI admits a Cholesky factorisation iff λ_min(ρ) > −ε.
        let shifted = (&self.rho + self.rho.adjoint()).scale(0.5)
            + CMatrix::identity(self.dim(), self.dim()).scale(POSITIVITY_TOL);
        if shifted.cholesky().is_none() {
            return Err(format!("negative eigenvalue {:e}", self.min_eigenvalue()));
        }
        if self.acc_emit < -POSITIVITY_TOL || self.acc_spont < -POSITIVITY_TOL {
            return Err("negative accumulator".into());
        }
        Ok(())
    }

    pub(crate) fn symmetrize(&mut self) {
        self.rho = (&self.rho + self.rho.adjoint()).scale(0.5);
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Trace distance ½‖ρ − σ‖₁ between two density matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()).scale(0.5);
    0.5 * h
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest allowed step (s).
    pub max_step: f64,
    /// Envelope fraction of peak that bounds the automatic time span.
    pub span_cutoff: f64,
    /// Keep every n-th accepted step as a snapshot.
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.5e-6,
            span_cutoff: 1e-4,
            snapshot_stride: 1,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("span_cutoff", self.span_cutoff),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(invalid("max_step must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride must be at least 1"));
        }
        Ok(())
    }

    fn tolerances(&self) -> dopri::Tolerances {
        dopri::Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub p_emit: f64,
    pub p_spont: f64,
    pub final_populations: Vec<(BasisState, f64)>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<DensityState>,
    pub summary: Summary,
    pub stats: dopri::Stats,
}

impl Trajectory {
    pub(crate) fn from_snapshots(
        basis: &Basis,
        snapshots: Vec<DensityState>,
        stats: dopri::Stats,
    ) -> Self {
        let last = snapshots
            .last()
            .expect("trajectory has at least one snapshot");
        let final_populations = basis
            .states()
            .enumerate()
            .map(|(i, s)| (s, last.rho[(i, i)].re))
            .collect();
        let summary = Summary {
            p_emit: last.acc_emit,
            p_spont: last.acc_spont,
            final_populations,
        };
        Self {
            snapshots,
            summary,
            stats,
        }
    }

    pub fn last(&self) -> &DensityState {
        self.snapshots.last().unwrap()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// Time derivative of a [`DensityState`].
#[derive(Debug, Clone)]
pub struct Derivative {
    pub rho: CMatrix,
    pub emit: f64,
    pub spont: f64,
}

/// Master-equation right-hand side at `state.t` under `drive`.
pub fn lindblad_rhs(model: &Model, drive: &dyn Drive, state: &DensityState) -> Result<Derivative> {
    if state
        .rho
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NumericalDomain { t: state.t });
    }
    let (g, omega) = drive.envelopes(state.t);
    Ok(rhs_at(model, &state.rho, g, omega))
}

fn rhs_at(model: &Model, rho: &CMatrix, g: f64, omega: f64) -> Derivative {
    let p = &model.params;
    Derivative {
        rho: model.liouvillian_apply(rho, g, omega),
        emit: 2.0 * p.kappa * expectation(&model.ops.number, rho),
        spont: p.gamma * expectation(&model.ops.proj_e, rho),
    }
}

/// Tr(A ρ), real part.
pub fn expectation(op: &CMatrix, rho: &CMatrix) -> f64 {
    let n = rho.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (op[(i, j)] * rho[(j, i)]).re;
        }
    }
    acc
}

/// Packing of a [`DensityState`] into the flat integrator vector:
/// real parts, imaginary parts (column-major), then the two accumulators.
struct Layout {
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.d * self.d + 2
    }

    fn pack(&self, rho: &CMatrix, emit: f64, spont: f64, out: &mut [f64]) {
        let dd = self.d * self.d;
        for (k, z) in rho.iter().enumerate() {
            out[k] = z.re;
            out[dd + k] = z.im;
        }
        out[2 * dd] = emit;
        out[2 * dd + 1] = spont;
    }

    fn unpack(&self, y: &[f64]) -> (CMatrix, f64, f64) {
        let dd = self.d * self.d;
        let rho = CMatrix::from_iterator(
            self.d,
            self.d,
            (0..dd).map(|k| Complex64::new(y[k], y[dd + k])),
        );
        (rho, y[2 * dd], y[2 * dd + 1])
    }
}

/// Where to record snapshots along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Every n-th accepted step.
    Stride(usize),
    /// Exactly these times (the integrator lands on each of them).
    Times(Vec<f64>),
}

/// Atom transit with the default initial state `|u,0⟩`.
pub fn propagate_default(
    params: &SystemParams,
    geom: &GeometryOffsets,
    integ: &IntegratorConfig,
) -> Result<Trajectory> {
    let basis = Basis::new(params.n_max)?;
    propagate(params, geom, integ, &DensityState::initial(&basis, 0.0).rho)
}

/// Integrates one atom transit starting from `rho0` at the beginning of the
/// automatic time span.
pub fn propagate(
    params: &SystemParams,
    geom: &GeometryOffsets,
    integ: &IntegratorConfig,
    rho0: &CMatrix,
) -> Result<Trajectory> {
    let model = Model::new(*params)?;
    let drive = Transit::new(*params, *geom);
    propagate_drive(
        &model,
        &drive,
        integ,
        rho0,
        Sampling::Stride(integ.snapshot_stride),
    )
}

/// General driver: any [`Drive`], any initial matrix, chosen sampling.
pub fn propagate_drive(
    model: &Model,
    drive: &dyn Drive,
    integ: &IntegratorConfig,
    rho0: &CMatrix,
    sampling: Sampling,
) -> Result<Trajectory> {
    integ.validate()?;
    let d = model.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(invalid(format!(
            "initial state is {}×{}, model dimension is {d}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    let (t0, t1) = drive.span(integ.span_cutoff);
    let initial = DensityState::new(rho0.clone(), t0);
    initial
        .check_invariants()
        .map_err(|reason| invalid(format!("initial state: {reason}")))?;

    let layout = Layout { d };
    let mut y = vec![0.0; layout.len()];
    layout.pack(&initial.rho, 0.0, 0.0, &mut y);

    let (stride, stops) = match sampling {
        Sampling::Stride(s) => (s.max(1), Vec::new()),
        Sampling::Times(ts) => (usize::MAX, ts),
    };
    let mut snapshots = vec![initial];
    let mut accepted = 0usize;
    let mut last_acc = (0.0, 0.0);

    let mut kernel = kernel::Kernel::new(model);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (g, omega) = drive.envelopes(t);
        kernel.rhs(g, omega, y, dy);
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain { t });
        }
        Ok(())
    };
    let on_accept = |t: f64, y: &mut [f64], at_stop: bool| -> Result<()> {
        accepted += 1;
        let (rho, emit, spont) = layout.unpack(y);
        let mut state = DensityState {
            rho,
            t,
            acc_emit: emit,
            acc_spont: spont,
        };
        state.symmetrize();
        layout.pack(&state.rho, emit, spont, y);
        state
            .check_invariants()
            .map_err(|reason| Error::IntegratorFailure { t, reason })?;
        // Monotone up to the integrator's absolute error floor.
        let slack = |v: f64| 10.0 * (integ.abs_tol + integ.rel_tol * v.abs());
        let (prev_emit, prev_spont) = last_acc;
        if state.acc_emit < prev_emit - slack(prev_emit)
            || state.acc_spont < prev_spont - slack(prev_spont)
        {
            return Err(Error::IntegratorFailure {
                t,
                reason: "accumulator decreased".into(),
            });
        }
        // Sub-tolerance dips are integration noise on a monotone integral.
        state.acc_emit = state.acc_emit.max(prev_emit);
        state.acc_spont = state.acc_spont.max(prev_spont);
        last_acc = (state.acc_emit, state.acc_spont);
        layout.pack(&state.rho, state.acc_emit, state.acc_spont, y);
        let record =
            at_stop || t >= t1 || (stride != usize::MAX && accepted.is_multiple_of(stride));
        if record && t > snapshots.last().unwrap().t {
            snapshots.push(state);
        }
        Ok(())
    };
    let stats = dopri::integrate(rhs, t0, t1, &mut y, &stops, &integ.tolerances(), on_accept)?;
    Ok(Trajectory::from_snapshots(model.basis(), snapshots, stats))
}

/// Emission probability into the cavity for an atom starting in `|e,0⟩`
/// held at constant coupling `g` with no pump and a resonant cavity.
pub fn excited_emission(params: &SystemParams, g: f64, integ: &IntegratorConfig) -> Result<f64> {
    let params = SystemParams {
        delta_c: 0.0,
        ..*params
    };
    let model = Model::new(params)?;
    let slowest = [
        2.0 * params.kappa,
        params.gamma,
        2.0 * params.kappa + params.gamma,
    ]
    .into_iter()
    .filter(|r| *r > 0.0)
    .fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return Ok(0.0);
    }
    // The excitation decays at least at rate min(2κ, Γ)/2 in every coupling regime.
    let duration = 80.0 / slowest;
    let drive = Constant {
        g,
        omega: 0.0,
        duration,
    };
    let rho0 = model.basis().projector(BasisState::new(Level::E, 0))?;
    let integ = IntegratorConfig {
        max_step: duration / 200.0,
        ..*integ
    };
    let traj = propagate_drive(&model, &drive, &integ, &rho0, Sampling::Stride(usize::MAX))?;
    Ok(traj.summary.p_emit)
}
