//! Least-squares Lorentzian line fitting by damped Gauss–Newton
//! (Levenberg–Marquardt) iteration.
//!
//! Model: `offset + amplitude · γ² / ((x − center)² + γ²)`, FWHM = 2γ.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        lorentzian(
            x,
            &Vector4::new(self.center, 0.5 * self.fwhm, self.amplitude, self.offset),
        )
    }

    fn failed(message: impl Into<String>) -> Self {
        Self {
            center: f64::NAN,
            fwhm: f64::NAN,
            amplitude: f64::NAN,
            offset: f64::NAN,
            residual_norm: f64::NAN,
            iterations: 0,
            converged: false,
            message: message.into(),
        }
    }
}

fn lorentzian(x: f64, p: &Vector4<f64>) -> f64 {
    let (c, g, a, o) = (p[0], p[1], p[2], p[3]);
    let d = x - c;
    o + a * g * g / (d * d + g * g)
}

fn jacobian_row(x: f64, p: &Vector4<f64>) -> Vector4<f64> {
    let (c, g, a) = (p[0], p[1], p[2]);
    let d = x - c;
    let q = d * d + g * g;
    Vector4::new(
        2.0 * a * g * g * d / (q * q),
        2.0 * a * g * d * d / (q * q),
        g * g / q,
        1.0,
    )
}

fn cost(x: &[f64], y: &[f64], p: &Vector4<f64>) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - lorentzian(xi, p)).powi(2))
        .sum()
}

/// Initial guess from the data's peak and half-prominence width.
fn initial_guess(x: &[f64], y: &[f64]) -> Vector4<f64> {
    let mut imax = 0;
    for i in 1..y.len() {
        if y[i] > y[imax] {
            imax = i;
        }
    }
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y[imax];
    let half = ymin + 0.5 * (ymax - ymin);
    let interp = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=imax)
        .rev()
        .find(|&i| y[i - 1] < half)
        .map(|i| interp(i - 1, i));
    let right = (imax..y.len() - 1)
        .find(|&i| y[i + 1] < half)
        .map(|i| interp(i, i + 1));
    let span = (x[x.len() - 1] - x[0]).abs();
    let hwhm = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => x[imax] - l,
        (None, Some(r)) => r - x[imax],
        (None, None) => 0.1 * span,
    };
    let hwhm = if hwhm > 0.0 { hwhm } else { 0.1 * span };
    Vector4::new(x[imax], hwhm, ymax - ymin, ymin)
}

pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> LorentzianFit {
    if x.len() != y.len() {
        return LorentzianFit::failed("x and y lengths differ");
    }
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < 5 {
        return LorentzianFit::failed(format!("need at least 5 finite points, got {}", pts.len()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ymax - ymin <= f64::EPSILON * ymax.abs().max(1e-300) {
        return LorentzianFit::failed("data are constant");
    }

    let mut p = initial_guess(&x, &y);
    let mut c = cost(&x, &y, &p);
    let y_scale: f64 = y.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&xi, &yi) in x.iter().zip(&y) {
            let row = jacobian_row(xi, &p);
            let r = yi - lorentzian(xi, &p);
            jtj += row * row.transpose();
            jtr += row * r;
        }
        if c <= 1e-28 * y_scale {
            converged = true;
            message = "exact fit".into();
            break;
        }
        // Cosine between the residual and each Jacobian column.
        let rnorm = c.sqrt();
        let grad = (0..4)
            .map(|j| {
                if jtj[(j, j)] > 0.0 {
                    jtr[j].abs() / (jtj[(j, j)].sqrt() * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if grad <= GRAD_TOL {
            converged = true;
            message = "gradient criterion met".into();
            break;
        }
        let mut stepped = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for j in 0..4 {
                damped[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let Some(delta) = damped.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let tc = cost(&x, &y, &trial);
            if tc.is_finite() && tc < c {
                let rel_step = (0..4)
                    .map(|j| delta[j].abs() / (trial[j].abs() + 1e-300))
                    .fold(0.0, f64::max);
                p = trial;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if rel_step < 1e-14 {
                    converged = true;
                    message = "parameter step below tolerance".into();
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !stepped {
            message = "no descent direction (singular or degenerate data)".into();
            break;
        }
    }
    if !(p[1].is_finite() && p[1] != 0.0) {
        converged = false;
        message = "width collapsed".into();
    }
    LorentzianFit {
        center: p[0],
        fwhm: 2.0 * p[1].abs(),
        amplitude: p[2],
        offset: p[3],
        residual_norm: c.sqrt(),
        iterations,
        converged,
        message,
    }
}
