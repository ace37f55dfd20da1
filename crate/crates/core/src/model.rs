//! Λ-type three-level atom coupled to one truncated cavity mode.
//!
//! Basis ordering is photon-major: for each photon number `n` the three
//! atomic levels appear as `u, e, g`, giving
//! `(u,0),(e,0),(g,0),(u,1),(e,1),(g,1),…` with dimension `3(n_max+1)`.
//!
//! All Hamiltonians are returned as H/ħ in rad/s.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::SystemParams;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    U,
    E,
    G,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::U, Level::E, Level::G];

    fn offset(self) -> usize {
        match self {
            Level::U => 0,
            Level::E => 1,
            Level::G => 2,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::U => "u",
            Level::E => "e",
            Level::G => "g",
        })
    }
}

/// One product state `|level, n⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub level: Level,
    pub photons: usize,
}

impl BasisState {
    pub const fn new(level: Level, photons: usize) -> Self {
        Self { level, photons }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.level, self.photons)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    n_max: usize,
}

impl Basis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("photon truncation n_max must be at least 1"));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        3 * (self.n_max + 1)
    }

    /// Position of `state` in the canonical order, or `None` above the truncation.
    pub fn index(&self, state: BasisState) -> Option<usize> {
        (state.photons <= self.n_max).then(|| 3 * state.photons + state.level.offset())
    }

    pub fn state(&self, index: usize) -> Option<BasisState> {
        (index < self.dim()).then(|| BasisState::new(Level::ALL[index % 3], index / 3))
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(|i| self.state(i).unwrap())
    }

    fn idx(&self, level: Level, n: usize) -> usize {
        3 * n + level.offset()
    }

    /// Pure-state density matrix `|s⟩⟨s|`.
    pub fn projector(&self, state: BasisState) -> Result<CMatrix> {
        let i = self
            .index(state)
            .ok_or_else(|| invalid(format!("state {state} outside truncated basis")))?;
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        m[(i, i)] = ONE;
        Ok(m)
    }
}

/// Operators on the full atom ⊗ photon space, in [`Basis`] order.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub basis: Basis,
    /// Cavity annihilation operator.
    pub a: CMatrix,
    pub a_dag: CMatrix,
    /// a†a
    pub number: CMatrix,
    pub proj_u: CMatrix,
    pub proj_e: CMatrix,
    pub proj_g: CMatrix,
    /// |e⟩⟨g|
    pub sigma_eg: CMatrix,
    /// |e⟩⟨u|
    pub sigma_eu: CMatrix,
}

impl OperatorSet {
    pub fn new(basis: Basis) -> Self {
        let d = basis.dim();
        let n_max = basis.n_max();
        let mut a = CMatrix::zeros(d, d);
        let mut proj = [
            CMatrix::zeros(d, d),
            CMatrix::zeros(d, d),
            CMatrix::zeros(d, d),
        ];
        let mut sigma_eg = CMatrix::zeros(d, d);
        let mut sigma_eu = CMatrix::zeros(d, d);
        for n in 0..=n_max {
            for level in Level::ALL {
                let i = basis.idx(level, n);
                proj[level.offset()][(i, i)] = ONE;
                if n >= 1 {
                    a[(basis.idx(level, n - 1), i)] = Complex64::new((n as f64).sqrt(), 0.0);
                }
            }
            sigma_eg[(basis.idx(Level::E, n), basis.idx(Level::G, n))] = ONE;
            sigma_eu[(basis.idx(Level::E, n), basis.idx(Level::U, n))] = ONE;
        }
        let a_dag = a.adjoint();
        let number = &a_dag * &a;
        let [proj_u, proj_e, proj_g] = proj;
        Self {
            basis,
            a,
            a_dag,
            number,
            proj_u,
            proj_e,
            proj_g,
            sigma_eg,
            sigma_eu,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Collapse channel of the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Photon leaving through the mirrors, √(2κ)·a.
    CavityEmission,
    /// Spontaneous decay e → u.
    DecayToU,
    /// Spontaneous decay e → g.
    DecayToG,
}

#[derive(Debug, Clone)]
pub struct CollapseOperator {
    pub channel: Channel,
    pub op: CMatrix,
}

/// H/ħ for instantaneous coupling `g_t` and pump Rabi frequency `omega_t`.
pub fn hamiltonian(
    params: &SystemParams,
    ops: &OperatorSet,
    g_t: f64,
    omega_t: f64,
) -> Result<CMatrix> {
    if params.n_max != ops.basis.n_max() {
        return Err(invalid(format!(
            "operator basis has n_max = {}, parameters request {}",
            ops.basis.n_max(),
            params.n_max
        )));
    }
    if !g_t.is_finite() || !omega_t.is_finite() {
        return Err(invalid("coupling envelopes must be finite"));
    }
    let parts = HamiltonianParts::new(params, ops);
    Ok(parts.at(g_t, omega_t))
}

/// H/ħ split by time dependence so that H(t) is a cheap linear combination.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    /// Δ_P Σ|u,n⟩⟨u,n| + Δ_C Σ|g,n⟩⟨g,n|
    pub detuning: CMatrix,
    /// |e⟩⟨g|a + a†|g⟩⟨e|
    pub cavity: CMatrix,
    /// ½(|e⟩⟨u| + |u⟩⟨e|)
    pub pump: CMatrix,
}

impl HamiltonianParts {
    pub fn new(params: &SystemParams, ops: &OperatorSet) -> Self {
        let detuning = ops.proj_u.scale(params.delta_p) + ops.proj_g.scale(params.delta_c);
        let jc = &ops.sigma_eg * &ops.a;
        let cavity = &jc + jc.adjoint();
        let pump = (&ops.sigma_eu + ops.sigma_eu.adjoint()).scale(0.5);
        Self {
            detuning,
            cavity,
            pump,
        }
    }

    pub fn at(&self, g_t: f64, omega_t: f64) -> CMatrix {
        let mut h = self.detuning.clone();
        h.zip_zip_apply(&self.cavity, &self.pump, |h, c, p| {
            *h += c * g_t + p * omega_t
        });
        h
    }
}

pub fn collapse_operators(
    params: &SystemParams,
    ops: &OperatorSet,
) -> Result<Vec<CollapseOperator>> {
    params.validate()?;
    let to_u = ops.sigma_eu.adjoint();
    let to_g = ops.sigma_eg.adjoint();
    Ok(vec![
        CollapseOperator {
            channel: Channel::CavityEmission,
            op: ops.a.scale((2.0 * params.kappa).sqrt()),
        },
        CollapseOperator {
            channel: Channel::DecayToU,
            op: to_u.scale((params.branch_u * params.gamma).sqrt()),
        },
        CollapseOperator {
            channel: Channel::DecayToG,
            op: to_g.scale((params.branch_g * params.gamma).sqrt()),
        },
    ])
}

/// Instantaneous dark state `(2g|u,0⟩ − Ω|g,1⟩)/√(4g² + Ω²)`.
pub fn dark_state(basis: &Basis, g_t: f64, omega_t: f64) -> Result<CVector> {
    let norm = (4.0 * g_t * g_t + omega_t * omega_t).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::UndefinedState(
            "dark state requires a non-zero cavity coupling or pump".into(),
        ));
    }
    let mut v = CVector::zeros(basis.dim());
    v[basis.idx(Level::U, 0)] = Complex64::new(2.0 * g_t / norm, 0.0);
    v[basis.idx(Level::G, 1)] = Complex64::new(-omega_t / norm, 0.0);
    Ok(v)
}

/// Fully assembled model: operators, Hamiltonian pieces and collapse channels.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: SystemParams,
    pub ops: OperatorSet,
    pub h: HamiltonianParts,
    pub collapse: Vec<CollapseOperator>,
    /// −(i/2) Σ c†c, the anti-Hermitian part of the effective Hamiltonian.
    pub(crate) damping: CMatrix,
}

impl Model {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let ops = OperatorSet::new(Basis::new(params.n_max)?);
        let h = HamiltonianParts::new(&params, &ops);
        let collapse = collapse_operators(&params, &ops)?;
        let d = ops.dim();
        let mut damping = CMatrix::zeros(d, d);
        for c in &collapse {
            damping += c.op.adjoint() * &c.op;
        }
        let damping = damping.scale(0.5).map(|z| z * Complex64::new(0.0, -1.0));
        Ok(Self {
            params,
            ops,
            h,
            collapse,
            damping,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.ops.basis
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    /// Lindblad generator applied to `rho` for fixed envelopes.
    pub fn liouvillian_apply(&self, rho: &CMatrix, g_t: f64, omega_t: f64) -> CMatrix {
        let h_eff = self.h.at(g_t, omega_t) + &self.damping;
        let mi = Complex64::new(0.0, -1.0);
        // −i(H_eff ρ − ρ H_eff†) + Σ c ρ c†
        let mut out = (&h_eff * rho - rho * h_eff.adjoint()).map(|z| z * mi);
        for c in &self.collapse {
            out += &c.op * rho * c.op.adjoint();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mhz;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_order() {
        let b = Basis::new(1).unwrap();
        assert_eq!(b.dim(), 6);
        assert_eq!(b.index(BasisState::new(Level::G, 1)), Some(5));
        assert_eq!(b.index(BasisState::new(Level::E, 0)), Some(1));
        assert_eq!(Basis::new(2).unwrap().dim(), 9);
        for i in 0..6 {
            assert_eq!(b.index(b.state(i).unwrap()), Some(i));
        }
        assert_eq!(b.index(BasisState::new(Level::U, 2)), None);
        assert!(Basis::new(0).is_err());
    }

    #[test]
    fn ladder_and_projectors() {
        for n_max in 1..4 {
            let ops = OperatorSet::new(Basis::new(n_max).unwrap());
            let comm = &ops.a * &ops.a_dag - &ops.a_dag * &ops.a;
            let b = ops.basis;
            for s in b.states() {
                let i = b.index(s).unwrap();
                if s.photons < n_max {
                    assert!((comm[(i, i)] - ONE).norm() < 1e-14);
                }
            }
            for p in [&ops.proj_u, &ops.proj_e, &ops.proj_g] {
                assert!(max_abs(&(p * p - p)) == 0.0);
                assert!(max_abs(&(p - p.adjoint())) == 0.0);
            }
        }
    }

    #[test]
    fn hamiltonian_elements() {
        let p = SystemParams::default();
        let ops = OperatorSet::new(Basis::new(1).unwrap());
        let zero = hamiltonian(&p, &ops, 0.0, 0.0).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
        let g = 1.234e7;
        let h = hamiltonian(&p, &ops, g, 3.0e7).unwrap();
        assert_eq!(h[(1, 5)], Complex64::new(g, 0.0));
        assert_eq!(h[(1, 0)], Complex64::new(1.5e7, 0.0));
        assert_eq!(max_abs(&(&h - h.adjoint())), 0.0);

        let p2 = SystemParams { n_max: 2, ..p };
        assert!(hamiltonian(&p2, &ops, g, 0.0).is_err());
    }

    #[test]
    fn collapse_limits() {
        let ops = OperatorSet::new(Basis::new(1).unwrap());
        let p = SystemParams {
            kappa: 0.0,
            ..Default::default()
        };
        let c = collapse_operators(&p, &ops).unwrap();
        assert_eq!(max_abs(&c[0].op), 0.0);
        let p = SystemParams {
            branch_u: 1.0,
            branch_g: 0.0,
            ..Default::default()
        };
        let c = collapse_operators(&p, &ops).unwrap();
        assert_eq!(c[2].channel, Channel::DecayToG);
        assert_eq!(max_abs(&c[2].op), 0.0);
    }

    #[test]
    fn dark_state_limits() {
        let b = Basis::new(1).unwrap();
        let v = dark_state(&b, 1.0e7, 0.0).unwrap();
        assert!((v[0] - ONE).norm() < 1e-15);
        let v = dark_state(&b, 1.0e7, 2.0e7).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].re - s).abs() < 1e-15 && (v[5].re + s).abs() < 1e-15);
        assert!(matches!(
            dark_state(&b, 0.0, 0.0),
            Err(Error::UndefinedState(_))
        ));
    }

    #[test]
    fn dark_state_is_eigenvector_on_raman_resonance() {
        let delta = mhz(-7.0);
        let p = SystemParams::default().with_detunings(delta, delta);
        let ops = OperatorSet::new(Basis::new(1).unwrap());
        let (g, om) = (mhz(3.1), mhz(17.0));
        let h = hamiltonian(&p, &ops, g, om).unwrap();
        let a0 = dark_state(&ops.basis, g, om).unwrap();
        let hv = &h * &a0;
        assert!(hv[1].norm() < 1e-6);
        let resid = (&hv - a0.scale(delta)).norm();
        assert!(resid <= 1e-12 * h.norm());
    }
}
