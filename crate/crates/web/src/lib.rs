//! Browser bindings. Every export takes the system parameters as a JSON
//! object in laboratory units (the `system` section of a run config; missing
//! keys take their defaults) and returns JSON for plotting.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vstirap::config::SystemSection;
use vstirap::drive::{Drive, Transit};
use vstirap::observables::{dark_state_fidelity_with, photon_emission_rate, population};
use vstirap::sweeps::{self, linspace, LorentzianFit};
use vstirap::{
    mhz, propagate_default, to_mhz, BasisState, GeometryOffsets, IntegratorConfig, Level, Model,
    SystemParams,
};

/// Snapshots kept per transit for plotting.
const TRACE_POINTS: usize = 400;

fn params(json: &str) -> Result<SystemParams, String> {
    let section: SystemSection = if json.trim().is_empty() {
        SystemSection::default()
    } else {
        serde_json::from_str(json).map_err(|e| e.to_string())?
    };
    let p = section.to_params();
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct TransitTrace {
    pub t_us: Vec<f64>,
    pub g_mhz: Vec<f64>,
    pub omega_mhz: Vec<f64>,
    pub rate_per_us: Vec<f64>,
    pub pop_u0: Vec<f64>,
    pub pop_excited: Vec<f64>,
    pub pop_g1: Vec<f64>,
    pub pop_g0: Vec<f64>,
    /// Null where both envelopes vanish.
    pub dark_fidelity: Vec<Option<f64>>,
    pub p_emit: f64,
    pub p_spont: f64,
}

pub fn transit_json(system: &str) -> Result<String, String> {
    let p = params(system)?;
    let integ = IntegratorConfig::default();
    let traj =
        propagate_default(&p, &GeometryOffsets::ON_AXIS, &integ).map_err(|e| e.to_string())?;
    let model = Model::new(p).map_err(|e| e.to_string())?;
    let drive = Transit::new(p, GeometryOffsets::ON_AXIS);
    let stride = traj.snapshots.len().div_ceil(TRACE_POINTS).max(1);
    let mut out = TransitTrace {
        t_us: vec![],
        g_mhz: vec![],
        omega_mhz: vec![],
        rate_per_us: vec![],
        pop_u0: vec![],
        pop_excited: vec![],
        pop_g1: vec![],
        pop_g0: vec![],
        dark_fidelity: vec![],
        p_emit: traj.summary.p_emit,
        p_spont: traj.summary.p_spont,
    };
    let pop = |s, level, n| population(s, &model, BasisState::new(level, n));
    let n_max = p.n_max;
    let last = traj.snapshots.len() - 1;
    let picks = (0..last).step_by(stride).chain(std::iter::once(last));
    for s in picks.map(|k| &traj.snapshots[k]) {
        let (g, om) = drive.envelopes(s.t);
        out.t_us.push(s.t * 1e6);
        out.g_mhz.push(to_mhz(g));
        out.omega_mhz.push(to_mhz(om));
        out.rate_per_us.push(photon_emission_rate(s, &model) * 1e-6);
        out.pop_u0.push(pop(s, Level::U, 0));
        out.pop_excited
            .push((0..=n_max).map(|n| pop(s, Level::E, n)).sum());
        out.pop_g1.push(pop(s, Level::G, 1));
        out.pop_g0.push(pop(s, Level::G, 0));
        out.dark_fidelity
            .push(dark_state_fidelity_with(s, &model, &drive).ok());
    }
    to_json(&out)
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub converged: Vec<bool>,
    pub fit: Option<LorentzianFit>,
}

pub fn delay_scan_json(
    system: &str,
    start_us: f64,
    stop_us: f64,
    points: usize,
) -> Result<String, String> {
    let p = params(system)?;
    if !(2..=201).contains(&points) {
        return Err("points must lie in 2..=201".into());
    }
    let delays: Vec<f64> = linspace(start_us, stop_us, points)
        .iter()
        .map(|d| d * 1e-6)
        .collect();
    let r =
        sweeps::delay_scan(&p, &IntegratorConfig::default(), &delays).map_err(|e| e.to_string())?;
    to_json(&Curve {
        x: r.axes[0].values.clone(),
        y: r.values,
        converged: r.converged,
        fit: None,
    })
}

/// p_emit versus Δ_P over Δ_C ± `half_span_mhz`, at the delay in `system`.
pub fn pump_spectrum_json(
    system: &str,
    half_span_mhz: f64,
    points: usize,
) -> Result<String, String> {
    let p = params(system)?;
    if !(5..=201).contains(&points) || !(half_span_mhz > 0.0) {
        return Err("need 5..=201 points and a positive span".into());
    }
    let dc = to_mhz(p.delta_c);
    let grid: Vec<f64> = linspace(dc - half_span_mhz, dc + half_span_mhz, points)
        .into_iter()
        .map(mhz)
        .collect();
    let r = sweeps::pump_spectrum(
        &p,
        &IntegratorConfig::default(),
        p.delta_c,
        &grid,
        p.delay(),
    )
    .map_err(|e| e.to_string())?;
    let fit = sweeps::lorentzian_fit(&r);
    to_json(&Curve {
        x: r.axes[0].values.clone(),
        y: r.values,
        converged: r.converged,
        fit: Some(fit),
    })
}

/// Default `system` section as JSON, for populating the form.
#[wasm_bindgen]
pub fn default_system() -> String {
    serde_json::to_string_pretty(&SystemSection::default()).expect("plain struct serialises")
}

#[wasm_bindgen]
pub fn transit(system: &str) -> Result<String, JsError> {
    transit_json(system).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn delay_scan(
    system: &str,
    start_us: f64,
    stop_us: f64,
    points: usize,
) -> Result<String, JsError> {
    delay_scan_json(system, start_us, stop_us, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn pump_spectrum(system: &str, half_span_mhz: f64, points: usize) -> Result<String, JsError> {
    pump_spectrum_json(system, half_span_mhz, points).map_err(|e| JsError::new(&e))
}
