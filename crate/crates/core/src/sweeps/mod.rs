//! Parameter scans over single-atom transits: pump delay, axial position,
//! pump/cavity detuning, and the excited-atom emission estimate.
//!
//! Every grid point is an independent [`propagate`] call. Points are
//! evaluated in parallel (with the `parallel` feature) and gathered in
//! axis order, so results do not depend on scheduling.

mod lorentzian;

pub use lorentzian::{fit_lorentzian, LorentzianFit};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::drive::GeometryOffsets;
use crate::engine::{excited_emission, propagate_default, IntegratorConfig};
use crate::error::{invalid, Result};
use crate::params::{mhz, to_mhz, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    /// Grid values in `unit`.
    pub values: Vec<f64>,
}

impl Axis {
    fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }
}

/// Scalar results on a rectangular grid; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub quantity: String,
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
    pub errors: Vec<Option<String>>,
    pub params: SystemParams,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    /// Axis coordinates of flat index `k`.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        let mut rem = k;
        let mut out = vec![0.0; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[i] = axis.values[rem % n];
            rem /= n;
        }
        out
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut k = 0;
        for (axis, &i) in self.axes.iter().zip(idx) {
            k = k * axis.values.len() + i;
        }
        self.values[k]
    }

    /// Index of the largest converged value; ties go to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, (&v, &ok)) in self.values.iter().zip(&self.converged).enumerate() {
            if ok && best.is_none_or(|b| v > self.values[b]) {
                best = Some(k);
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{}_{}", a.name, a.unit.to_lowercase()))
            .collect();
        writeln!(w, "{},{},converged", header.join(","), self.quantity)?;
        for k in 0..self.values.len() {
            let coords: Vec<String> = self.coords(k).iter().map(|c| c.to_string()).collect();
            writeln!(
                w,
                "{},{},{}",
                coords.join(","),
                self.values[k],
                self.converged[k] as u8
            )?;
        }
        Ok(())
    }
}

pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Emission probability of one transit, or the failure reason.
fn point(
    params: &SystemParams,
    geom: &GeometryOffsets,
    integ: &IntegratorConfig,
) -> std::result::Result<f64, String> {
    propagate_default(params, geom, integ)
        .map(|t| t.summary.p_emit)
        .map_err(|e| e.to_string())
}

fn collect(
    quantity: &str,
    axes: Vec<Axis>,
    params: SystemParams,
    results: Vec<std::result::Result<f64, String>>,
) -> SweepResult {
    let mut values = Vec::with_capacity(results.len());
    let mut converged = Vec::with_capacity(results.len());
    let mut errors = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => {
                values.push(v);
                converged.push(true);
                errors.push(None);
            }
            Err(e) => {
                values.push(f64::NAN);
                converged.push(false);
                errors.push(Some(e));
            }
        }
    }
    SweepResult {
        quantity: quantity.into(),
        axes,
        values,
        converged,
        errors,
        params,
    }
}

fn check_nonempty(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} grid contains non-finite values")));
    }
    Ok(())
}

/// p_emit versus pump delay δx/v (s) for an atom on the cavity axis at an antinode.
pub fn delay_scan(
    params: &SystemParams,
    integ: &IntegratorConfig,
    delays: &[f64],
) -> Result<SweepResult> {
    params.validate()?;
    check_nonempty("delay", delays)?;
    let results = par_map(delays, |&d| {
        point(&params.with_delay(d), &GeometryOffsets::ON_AXIS, integ)
    });
    let axis = Axis::new("delay", "us", delays.iter().map(|d| d * 1e6).collect());
    Ok(collect("p_emit", vec![axis], *params, results))
}

/// p_emit versus position along the cavity axis (m) at a fixed delay.
pub fn axial_scan(
    params: &SystemParams,
    integ: &IntegratorConfig,
    positions: &[f64],
    delay: f64,
) -> Result<SweepResult> {
    params.validate()?;
    check_nonempty("axial", positions)?;
    let half = 0.5 * params.lambda_opt;
    if let Some(x) = positions.iter().find(|x| x.abs() > half * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "axial position {x:e} m outside [-λ/2, λ/2]"
        )));
    }
    let p = params.with_delay(delay);
    let results = par_map(positions, |&x| {
        point(&p, &GeometryOffsets::new(x, 0.0), integ)
    });
    let axis = Axis::new("x", "nm", positions.iter().map(|x| x * 1e9).collect());
    Ok(collect("p_emit", vec![axis], p, results))
}

/// p_emit on a (Δ_P, Δ_C) grid (rad/s); Δ_C varies fastest.
pub fn detuning_map(
    params: &SystemParams,
    integ: &IntegratorConfig,
    grid_p: &[f64],
    grid_c: &[f64],
    delay: f64,
) -> Result<SweepResult> {
    params.validate()?;
    check_nonempty("pump detuning", grid_p)?;
    check_nonempty("cavity detuning", grid_c)?;
    let p = params.with_delay(delay);
    let pairs: Vec<(f64, f64)> = grid_p
        .iter()
        .flat_map(|&dp| grid_c.iter().map(move |&dc| (dp, dc)))
        .collect();
    let results = par_map(&pairs, |&(dp, dc)| {
        point(&p.with_detunings(dp, dc), &GeometryOffsets::ON_AXIS, integ)
    });
    let axes = vec![
        Axis::new(
            "delta_p",
            "MHz",
            grid_p.iter().map(|&w| to_mhz(w)).collect(),
        ),
        Axis::new(
            "delta_c",
            "MHz",
            grid_c.iter().map(|&w| to_mhz(w)).collect(),
        ),
    ];
    Ok(collect("p_emit", axes, p, results))
}

/// p_emit versus pump detuning at fixed cavity detuning.
pub fn pump_spectrum(
    params: &SystemParams,
    integ: &IntegratorConfig,
    delta_c: f64,
    grid_p: &[f64],
    delay: f64,
) -> Result<SweepResult> {
    params.validate()?;
    check_nonempty("pump detuning", grid_p)?;
    let p = SystemParams {
        delta_c,
        ..params.with_delay(delay)
    };
    let results = par_map(grid_p, |&dp| {
        point(
            &SystemParams { delta_p: dp, ..p },
            &GeometryOffsets::ON_AXIS,
            integ,
        )
    });
    let axis = Axis::new(
        "delta_p",
        "MHz",
        grid_p.iter().map(|&w| to_mhz(w)).collect(),
    );
    Ok(collect("p_emit", vec![axis], p, results))
}

/// Lorentzian fit of a one-dimensional sweep over its axis units.
pub fn lorentzian_fit(curve: &SweepResult) -> LorentzianFit {
    if curve.axes.len() != 1 {
        return fit_lorentzian(&[], &[]);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = curve.axes[0]
        .values
        .iter()
        .zip(&curve.values)
        .zip(&curve.converged)
        .filter(|(_, &ok)| ok)
        .map(|((&x, &y), _)| (x, y))
        .unzip();
    fit_lorentzian(&x, &y)
}

/// Probability that an atom prepared in `|e,0⟩` at an antinode, with
/// constant coupling g₀, no pump and a resonant cavity, emits its photon
/// into the cavity mode.
pub fn purcell_emission(params: &SystemParams, integ: &IntegratorConfig) -> Result<f64> {
    if params.g0 == 0.0 {
        return Ok(0.0);
    }
    excited_emission(params, params.g0, integ)
}

/// Evenly spaced `n` points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Default scan grids.
pub mod grids {
    use super::*;

    /// −20 … 80 µs in 2.5 µs steps.
    pub fn delays() -> Vec<f64> {
        (0..=40).map(|i| (-20.0 + 2.5 * i as f64) * 1e-6).collect()
    }

    /// 64 points over one λ/2 period centred on an antinode.
    pub fn axial(lambda: f64) -> Vec<f64> {
        (0..64)
            .map(|i| -0.25 * lambda + 0.5 * lambda * i as f64 / 64.0)
            .collect()
    }

    /// −20 … +20 MHz, 41 points (rad/s).
    pub fn detunings() -> Vec<f64> {
        (0..=40).map(|i| mhz(-20.0 + i as f64)).collect()
    }
}
