#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vstirap::drive::{Constant, Transit};
use vstirap::engine::{
    lindblad_rhs, oracle_propagate_drive, propagate_drive, trace_distance, OracleScheme, Sampling,
};
use vstirap::ensemble::{average_map, count_spectrum, EmissionMap, EnsembleConfig};
use vstirap::model::{dark_state, CMatrix, Model};
use vstirap::{
    mhz, propagate_default, BasisState, DensityState, GeometryOffsets, IntegratorConfig, Level,
    SystemParams,
};

pub type Check = Result<String, String>;

pub fn random_density(d: usize, rng: &mut impl Rng) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let p = &a * a.adjoint();
    let tr = p.trace().re;
    p / Complex64::new(tr, 0.0)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Propagations in several regimes with every accepted step kept; each
/// snapshot must satisfy the trace, Hermiticity and positivity invariants.
pub fn invariants_every_step() -> Check {
    let base = SystemParams::default();
    let lambda = base.lambda_opt;
    let cases = [
        ("resonant", base, GeometryOffsets::ON_AXIS),
        (
            "detuned",
            base.with_detunings(mhz(-15.0), mhz(-15.0)),
            GeometryOffsets::ON_AXIS,
        ),
        (
            "off-axis",
            base.with_detunings(mhz(3.0), mhz(-2.0)),
            GeometryOffsets::new(lambda / 8.0, 20e-6),
        ),
        (
            "n_max 2",
            SystemParams { n_max: 2, ..base },
            GeometryOffsets::ON_AXIS,
        ),
    ];
    let integ = IntegratorConfig::default();
    let mut steps = 0;
    let mut worst_trace: f64 = 0.0;
    for (name, p, g) in cases {
        let traj = propagate_default(&p, &g, &integ).map_err(|e| format!("{name}: {e}"))?;
        for s in &traj.snapshots {
            s.check_invariants()
                .map_err(|r| format!("{name} at t = {:e}: {r}", s.t))?;
            worst_trace = worst_trace.max((s.trace().re - 1.0).abs());
        }
        steps += traj.snapshots.len();
    }
    Ok(format!(
        "{steps} snapshots, max |tr ρ − 1| = {worst_trace:.1e}"
    ))
}

/// tr(dρ/dt) vanishes on random states, relative to the largest rate.
pub fn trace_preservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = SystemParams {
            delta_p: mhz(rng.gen_range(-20.0..20.0)),
            delta_c: mhz(rng.gen_range(-20.0..20.0)),
            ..Default::default()
        };
        let model = Model::new(p).unwrap();
        let g = rng.gen_range(0.0..p.g0);
        let omega = rng.gen_range(0.0..p.omega0);
        let drive = Constant {
            g,
            omega,
            duration: 1e-6,
        };
        let state = DensityState::new(random_density(model.dim(), &mut rng), 0.0);
        let d = lindblad_rhs(&model, &drive, &state).map_err(|e| e.to_string())?;
        let scale = [
            p.g0,
            p.omega0,
            p.kappa,
            p.gamma,
            p.delta_p.abs(),
            p.delta_c.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(d.rho.trace().norm() / scale);
    }
    ensure(
        worst <= 1e-12,
        format!("max |tr dρ/dt| / rate = {worst:.1e} over 200 states"),
    )
}

/// Normalisation, zero excited amplitude and the eigenvector property of
/// the dark state on Raman resonance.
pub fn dark_state_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut norm_err, mut e0_amp, mut resid): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let delta = mhz(rng.gen_range(-20.0..20.0));
        let p = SystemParams::default().with_detunings(delta, delta);
        let model = Model::new(p).unwrap();
        let (g, omega) = (rng.gen_range(1e5..p.g0), rng.gen_range(1e5..p.omega0));
        let a0 = dark_state(model.basis(), g, omega).map_err(|e| e.to_string())?;
        norm_err = norm_err.max((a0.norm() - 1.0).abs());
        let ie = model.basis().index(BasisState::new(Level::E, 0)).unwrap();
        e0_amp = e0_amp.max(a0[ie].norm());
        let h = model.h.at(g, omega);
        let ha: DVector<Complex64> = &h * &a0;
        let e = a0.dotc(&ha);
        resid = resid.max((ha - &a0 * e).norm() / h.norm());
    }
    ensure(
        norm_err <= 1e-12 && e0_amp == 0.0 && resid <= 1e-12,
        format!(
            "|‖a⁰‖ − 1| = {norm_err:.1e}, ⟨e0|a⁰⟩ = {e0_amp:.1e}, eigen residual = {resid:.1e}"
        ),
    )
}

/// Adaptive run against the piecewise-constant exponential propagator at
/// dt = 10 ns, compared at common times.
pub fn oracle_equivalence() -> Check {
    let p = SystemParams::default();
    let model = Model::new(p).unwrap();
    let drive = Transit::new(p, GeometryOffsets::ON_AXIS);
    let rho0 = DensityState::initial(model.basis(), 0.0).rho;
    let integ = IntegratorConfig::default();
    let oracle = oracle_propagate_drive(
        &model,
        &drive,
        10e-9,
        &rho0,
        OracleScheme::Magnus4,
        integ.span_cutoff,
    )
    .map_err(|e| e.to_string())?;
    let picks: Vec<&DensityState> = oracle.snapshots.iter().skip(1).step_by(200).collect();
    let times: Vec<f64> = picks.iter().map(|s| s.t).collect();
    let adaptive = propagate_drive(
        &model,
        &drive,
        &integ,
        &rho0,
        Sampling::Times(times.clone()),
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for o in picks {
        if let Some(a) = adaptive
            .snapshots
            .iter()
            .find(|s| (s.t - o.t).abs() < 1e-15)
        {
            worst = worst.max(trace_distance(&a.rho, &o.rho));
            compared += 1;
        }
    }
    ensure(
        compared == times.len() && worst <= 1e-6,
        format!(
            "{compared}/{} common times, max trace distance {worst:.1e}",
            times.len()
        ),
    )
}

/// With κ = Γ = 0 the state stays pure.
pub fn purity_closed_system() -> Check {
    let p = SystemParams {
        kappa: 0.0,
        gamma: 0.0,
        ..Default::default()
    };
    let integ = IntegratorConfig {
        abs_tol: 1e-12,
        ..Default::default()
    };
    let traj =
        propagate_default(&p, &GeometryOffsets::ON_AXIS, &integ).map_err(|e| e.to_string())?;
    let worst = traj
        .snapshots
        .iter()
        .map(|s| (1.0 - s.purity()).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("max |1 − tr ρ²| = {worst:.1e}"))
}

pub fn n_max_convergence() -> Check {
    let integ = IntegratorConfig::default();
    let p1 = propagate_default(&SystemParams::default(), &GeometryOffsets::ON_AXIS, &integ)
        .map_err(|e| e.to_string())?;
    let p2 = propagate_default(
        &SystemParams {
            n_max: 2,
            ..Default::default()
        },
        &GeometryOffsets::ON_AXIS,
        &integ,
    )
    .map_err(|e| e.to_string())?;
    let diff = (p1.summary.p_emit - p2.summary.p_emit).abs();
    ensure(
        diff < 1e-4,
        format!("|P(n_max=1) − P(n_max=2)| = {diff:.1e}"),
    )
}

pub fn tolerance_robustness() -> Check {
    let p = SystemParams::default().with_detunings(mhz(-15.0), mhz(-15.0));
    let loose = IntegratorConfig::default();
    let tight = IntegratorConfig {
        rel_tol: 1e-10,
        ..loose
    };
    let a = propagate_default(&p, &GeometryOffsets::ON_AXIS, &loose).map_err(|e| e.to_string())?;
    let b = propagate_default(&p, &GeometryOffsets::ON_AXIS, &tight).map_err(|e| e.to_string())?;
    let diff = (a.summary.p_emit - b.summary.p_emit).abs();
    ensure(
        diff < 1e-6,
        format!("|P(rel 1e-8) − P(rel 1e-10)| = {diff:.1e}"),
    )
}

pub fn small_ensemble() -> EnsembleConfig {
    EnsembleConfig {
        cache_nx: 3,
        cache_ny: 2,
        mc_samples: 2000,
        drops: 5,
        ..Default::default()
    }
}

/// Same seed, same counts and averages; a different seed changes them.
pub fn monte_carlo_reproducibility() -> Check {
    let p = SystemParams::default().with_delay(35e-6);
    let integ = IntegratorConfig::default();
    let c = small_ensemble();
    let grid = [mhz(-2.0), 0.0, mhz(2.0)];
    let run = |c: &EnsembleConfig| {
        count_spectrum(&p, &integ, c, &grid, 0.0, 35e-6).map_err(|e| e.to_string())
    };
    let a = run(&c)?;
    let b = run(&c)?;
    let other = run(&EnsembleConfig {
        rng_seed: c.rng_seed + 1,
        ..c
    })?;
    let map = EmissionMap::build(&p, &integ, &c).map_err(|e| e.to_string())?;
    let m1 = average_map(&map, &c, c.mc_samples, 3);
    let m2 = average_map(&map, &c, c.mc_samples, 3);
    ensure(
        a == b && m1 == m2 && a.bins != other.bins,
        format!(
            "repeat identical: {}, mean identical: {}, reseed differs: {}",
            a == b,
            m1 == m2,
            a.bins != other.bins
        ),
    )
}

pub fn property_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("invariants at every step", invariants_every_step()),
        ("trace preservation", trace_preservation()),
        ("dark-state identities", dark_state_identities()),
        ("oracle equivalence", oracle_equivalence()),
        ("purity when κ = Γ = 0", purity_closed_system()),
        ("n_max convergence", n_max_convergence()),
        ("tolerance robustness", tolerance_robustness()),
        ("Monte Carlo reproducibility", monte_carlo_reproducibility()),
    ]
}
