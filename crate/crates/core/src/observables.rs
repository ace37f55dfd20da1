//! Scalar diagnostics extracted from density states and trajectories.

use crate::drive::{Drive, GeometryOffsets, Transit};
use crate::engine::{expectation, DensityState, Trajectory};
use crate::error::{Error, Result};
use crate::model::{dark_state, BasisState, Model};

/// Photon emission rate 2κ⟨a†a⟩ (1/s).
pub fn photon_emission_rate(state: &DensityState, model: &Model) -> f64 {
    2.0 * model.params.kappa * expectation(&model.ops.number, &state.rho)
}

/// Diagonal of ρ in basis order.
pub fn populations(state: &DensityState, model: &Model) -> Vec<(BasisState, f64)> {
    model
        .basis()
        .states()
        .enumerate()
        .map(|(i, s)| (s, state.rho[(i, i)].re))
        .collect()
}

pub fn population(state: &DensityState, model: &Model, s: BasisState) -> f64 {
    model.basis().index(s).map_or(0.0, |i| state.rho[(i, i)].re)
}

/// ⟨a⁰(t)|ρ|a⁰(t)⟩ for the instantaneous dark state of an atom at `geom`.
pub fn dark_state_fidelity(
    state: &DensityState,
    model: &Model,
    geom: &GeometryOffsets,
) -> Result<f64> {
    let drive = Transit::new(model.params, *geom);
    dark_state_fidelity_with(state, model, &drive)
}

pub fn dark_state_fidelity_with(
    state: &DensityState,
    model: &Model,
    drive: &dyn Drive,
) -> Result<f64> {
    let (g, omega) = drive.envelopes(state.t);
    // Underflowed envelopes leave the dark state undefined.
    if g == 0.0 && omega == 0.0 {
        return Err(Error::UndefinedState(format!(
            "both envelopes vanish at t = {:e} s",
            state.t
        )));
    }
    let a0 = dark_state(model.basis(), g, omega)?;
    Ok((a0.adjoint() * &state.rho * &a0)[(0, 0)].re)
}

/// Trapezoid integral of the emission rate over the trajectory snapshots.
pub fn integrated_emission(traj: &Trajectory, model: &Model) -> f64 {
    traj.snapshots
        .windows(2)
        .map(|w| {
            0.5 * (w[1].t - w[0].t)
                * (photon_emission_rate(&w[0], model) + photon_emission_rate(&w[1], model))
        })
        .sum()
}

/// Full width at half maximum of the emission-rate pulse (s), from linear
/// interpolation between snapshots. `None` if the rate never rises.
pub fn emission_fwhm(traj: &Trajectory, model: &Model) -> Option<f64> {
    let rates: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.t, photon_emission_rate(s, model)))
        .collect();
    let (imax, &(_, peak)) = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    if peak <= 0.0 {
        return None;
    }
    let half = 0.5 * peak;
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 + (half - a.1) * (b.0 - a.0) / (b.1 - a.1);
    let left = (1..=imax)
        .rev()
        .find(|&i| rates[i - 1].1 < half)
        .map(|i| cross(rates[i - 1], rates[i]))?;
    let right = (imax..rates.len() - 1)
        .find(|&i| rates[i + 1].1 < half)
        .map(|i| cross(rates[i], rates[i + 1]))?;
    Some(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{propagate_default, IntegratorConfig};
    use crate::model::{CMatrix, Level};
    use crate::params::SystemParams;
    use num_complex::Complex64;

    fn model() -> Model {
        Model::new(SystemParams::default()).unwrap()
    }

    #[test]
    fn rate_limits() {
        let m = model();
        let u0 = DensityState::initial(m.basis(), 0.0);
        assert_eq!(photon_emission_rate(&u0, &m), 0.0);
        let g1 = DensityState::pure(m.basis(), BasisState::new(Level::G, 1), 0.0).unwrap();
        assert!((photon_emission_rate(&g1, &m) - 2.0 * m.params.kappa).abs() < 1e-6);
    }

    #[test]
    fn population_limits() {
        let m = model();
        let u0 = DensityState::initial(m.basis(), 0.0);
        let pops = populations(&u0, &m);
        assert_eq!(pops[0], (BasisState::new(Level::U, 0), 1.0));
        assert!(pops[1..].iter().all(|p| p.1 == 0.0));
        let mixed = DensityState::new(
            CMatrix::identity(6, 6).map(|z| z / Complex64::new(6.0, 0.0)),
            0.0,
        );
        for (_, p) in populations(&mixed, &m) {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fidelity_limits() {
        let m = model();
        let geom = GeometryOffsets::ON_AXIS;
        // cavity peak, pump still ~e^-3.24 weak
        let u0 = DensityState::initial(m.basis(), -40e-6);
        assert!(dark_state_fidelity(&u0, &m, &geom).unwrap() > 0.99);
        let e0 = DensityState::pure(m.basis(), BasisState::new(Level::E, 0), 0.0).unwrap();
        assert_eq!(dark_state_fidelity(&e0, &m, &geom).unwrap(), 0.0);
        let far = DensityState::initial(m.basis(), 1.0);
        assert!(matches!(
            dark_state_fidelity(&far, &m, &geom),
            Err(Error::UndefinedState(_))
        ));
    }

    #[test]
    fn accumulator_matches_trapezoid_of_rate() {
        let m = model();
        let traj = propagate_default(
            &m.params,
            &GeometryOffsets::ON_AXIS,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let trap = integrated_emission(&traj, &m);
        assert!(
            (trap - traj.summary.p_emit).abs() <= 1e-3 * traj.summary.p_emit,
            "{trap} vs {}",
            traj.summary.p_emit
        );
        let last = traj.last();
        let g0 = population(last, &m, BasisState::new(Level::G, 0));
        assert!(g0 > 0.9, "{g0}");
        let fwhm = emission_fwhm(&traj, &m).unwrap();
        assert!(fwhm > 5e-6 && fwhm < 30e-6, "{fwhm}");
    }
}
