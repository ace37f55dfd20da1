//! Dormand–Prince 5(4) embedded Runge–Kutta pair with proportional step
//! size control, operating on a flat `f64` state. The local error is
//! measured in the max norm.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, landing exactly on every
/// time in `stops` (sorted, inside the interval) and on `t1`.
///
/// `on_accept(t, y, hit_stop)` runs after every accepted step and may
/// modify `y` in place; the derivative is then re-evaluated.
pub fn integrate<F, H>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    stops: &[f64],
    tol: &Tolerances,
    mut on_accept: H,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    H: FnMut(f64, &mut [f64], bool) -> Result<()>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stats = Stats::default();

    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(stats);
    }
    let min_step = 1e-13 * span;

    let mut t = t0;
    f(t, y, &mut k[0])?;
    stats.evaluations += 1;

    let mut h = initial_step(y, &k[0], tol).min(tol.max_step).min(span);
    let mut stop_iter = stops
        .iter()
        .copied()
        .filter(|&s| s > t0 && s < t1)
        .peekable();
    let mut next_stop = stop_iter.next();

    while t < t1 {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::IntegratorFailure {
                t,
                reason: format!("exceeded {} steps", tol.max_steps),
            });
        }
        let target = next_stop.unwrap_or(t1);
        let mut hit = false;
        let mut h_try = h;
        if t + h_try >= target || target - (t + h_try) < 1e-3 * h_try {
            h_try = target - t;
            hit = true;
        }
        if h_try < min_step && !hit {
            return Err(Error::Stiffness { t, h: h_try });
        }

        for s in 1..7 {
            stage.copy_from_slice(y);
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for (st, kv) in stage.iter_mut().zip(kj) {
                        *st += h_try * a * kv;
                    }
                }
            }
            f(t + C[s] * h_try, &stage, &mut k[s])?;
            stats.evaluations += 1;
        }
        // 7th stage was evaluated at the 5th-order solution.
        y_new.copy_from_slice(&stage);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            e *= h_try;
            let scale = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            let r = (e / scale).abs();
            err = if r.is_nan() { f64::NAN } else { err.max(r) };
        }
        if !err.is_finite() {
            return Err(Error::NumericalDomain { t });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit { target } else { t + h_try };
            y.copy_from_slice(&y_new);
            let stopped = hit && next_stop.is_some();
            if stopped {
                next_stop = stop_iter.next();
            }
            on_accept(t, y, stopped || t >= t1)?;
            f(t, y, &mut k[0])?;
            stats.evaluations += 1;
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            // Landing on a stop truncates the step; grow from the attempted size.
            let base = if hit { h.max(h_try) } else { h_try };
            h = (base * factor).min(tol.max_step);
        } else {
            stats.rejected += 1;
            h = h_try * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            if h < min_step {
                return Err(Error::Stiffness { t, h });
            }
        }
    }
    Ok(stats)
}

fn initial_step(y: &[f64], dy: &[f64], tol: &Tolerances) -> f64 {
    let n = y.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(dy) {
        let sc = tol.abs + tol.rel * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * tol.max_step
    } else {
        0.01 * d0 / d1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances {
            rel: 1e-10,
            abs: 1e-12,
            max_step: 1.0,
            max_steps: 100_000,
        }
    }

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            5.0,
            &mut y,
            &[],
            &tol(),
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_hits_stops() {
        let mut y = [1.0, 0.0];
        let stops = [0.5, 1.0, 2.0];
        let mut seen = Vec::new();
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            3.0,
            &mut y,
            &stops,
            &tol(),
            |t, y, stop| {
                if stop {
                    seen.push((t, y[0]));
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(
            seen.iter().map(|s| s.0).collect::<Vec<_>>(),
            vec![0.5, 1.0, 2.0, 3.0]
        );
        for (t, x) in seen {
            assert!((x - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // Fixed-ish steps via max_step with loose tolerance: error ratio ≈ 32 on halving.
        let run = |h: f64| {
            let tol = Tolerances {
                rel: 1.0,
                abs: 1.0,
                max_step: h,
                max_steps: 1_000_000,
            };
            let mut y = [1.0];
            integrate(
                |t, y, dy| {
                    dy[0] = y[0] * t.cos();
                    Ok(())
                },
                0.0,
                2.0,
                &mut y,
                &[],
                &tol,
                |_, _, _| Ok(()),
            )
            .unwrap();
            (y[0] - 2.0f64.sin().exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 20.0 && ratio < 50.0, "ratio {ratio}");
    }

    #[test]
    fn nan_reports_domain_error() {
        let mut y = [1.0];
        let r = integrate(
            |_, _, dy| {
                dy[0] = f64::NAN;
                Ok(())
            },
            0.0,
            1.0,
            &mut y,
            &[],
            &tol(),
            |_, _, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::NumericalDomain { .. })));
    }
}
