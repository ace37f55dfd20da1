//! Many-atom statistics: atoms crossing the slit at random positions, the
//! photon detection chain and detector dark counts.
//!
//! Single-atom emission probabilities are tabulated on an (x, y) grid over
//! one standing-wave half period and the slit half-width, then bilinearly
//! interpolated. Monte Carlo draws use ChaCha8 streams derived from one
//! master seed, one stream per spectrum bin.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::drive::GeometryOffsets;
use crate::engine::{propagate_default, IntegratorConfig};
use crate::error::{invalid, Result};
use crate::params::{to_mhz, SystemParams};
use crate::sweeps::{fit_lorentzian, par_map, LorentzianFit};

/// Distribution of the transverse offset behind the slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransverseProfile {
    Uniform,
    /// Gaussian of the given standard deviation (m), clipped to the slit.
    ClippedGaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Slit half-width along the pump direction (m).
    pub slit_halfwidth: f64,
    /// Atoms per second crossing slit and pump.
    pub atom_rate: f64,
    pub drops: u32,
    /// Recording window per drop (s).
    pub record_window: f64,
    pub detection_efficiency: f64,
    /// Detector dark count rate (1/s).
    pub dark_count_rate: f64,
    pub rng_seed: u64,
    /// Emission map grid points along the axis (over λ/2).
    pub cache_nx: usize,
    /// Emission map grid points across the slit (over [0, half-width]).
    pub cache_ny: usize,
    pub mc_samples: usize,
    pub transverse: TransverseProfile,
    /// Pin every atom to this axial position (m) instead of sampling it.
    pub axial_position: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            slit_halfwidth: 50e-6,
            atom_rate: 12e3,
            drops: 50,
            record_window: 2.6e-3,
            detection_efficiency: 0.40,
            dark_count_rate: 390.0,
            rng_seed: 0x5EED_2000,
            cache_nx: 33,
            cache_ny: 17,
            mc_samples: 100_000,
            transverse: TransverseProfile::Uniform,
            axial_position: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slit_halfwidth >= 0.0 && self.slit_halfwidth.is_finite()) {
            return Err(invalid("slit_halfwidth must be non-negative"));
        }
        for (name, v) in [
            ("atom_rate", self.atom_rate),
            ("record_window", self.record_window),
            ("dark_count_rate", self.dark_count_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(invalid("detection_efficiency must lie in [0, 1]"));
        }
        if self.cache_nx < 2 || self.cache_ny < 2 {
            return Err(invalid("emission map needs at least 2×2 points"));
        }
        if self.mc_samples == 0 {
            return Err(invalid("mc_samples must be positive"));
        }
        if let TransverseProfile::ClippedGaussian { sigma } = self.transverse {
            if !(sigma > 0.0) {
                return Err(invalid("clipped Gaussian sigma must be positive"));
            }
        }
        Ok(())
    }

    /// Total observation time drops × window (s).
    pub fn observation_time(&self) -> f64 {
        f64::from(self.drops) * self.record_window
    }

    /// Expected number of atoms over the whole observation.
    pub fn expected_atoms(&self) -> f64 {
        self.atom_rate * self.observation_time()
    }

    /// Expected dark counts over the whole observation.
    pub fn expected_dark_counts(&self) -> f64 {
        self.dark_count_rate * self.observation_time()
    }
}

/// Random atom position: axial uniform over one λ/2 period, transverse
/// across the slit.
pub fn sample_atom<R: Rng + ?Sized>(
    rng: &mut R,
    config: &EnsembleConfig,
    lambda: f64,
) -> GeometryOffsets {
    let x = match config.axial_position {
        Some(x) => x,
        None => rng.gen::<f64>() * 0.5 * lambda,
    };
    let h = config.slit_halfwidth;
    let y = match config.transverse {
        _ if h == 0.0 => 0.0,
        TransverseProfile::Uniform => rng.gen_range(-h..=h),
        TransverseProfile::ClippedGaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            loop {
                let y: f64 = normal.sample(rng);
                if y.abs() <= h {
                    break y;
                }
            }
        }
    };
    GeometryOffsets::new(x, y)
}

/// Tabulated single-atom emission probability over atom position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionMap {
    pub lambda: f64,
    /// Axial grid over [0, λ/2] (m).
    pub xs: Vec<f64>,
    /// Transverse grid over [0, slit half-width] (m).
    pub ys: Vec<f64>,
    /// Row-major, y fastest. NaN where the propagation failed.
    pub values: Vec<f64>,
    pub failures: Vec<String>,
}

impl EmissionMap {
    pub fn build(
        params: &SystemParams,
        integ: &IntegratorConfig,
        config: &EnsembleConfig,
    ) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let lambda = params.lambda_opt;
        let xs = crate::sweeps::linspace(0.0, 0.5 * lambda, config.cache_nx);
        let ys = if config.slit_halfwidth > 0.0 {
            crate::sweeps::linspace(0.0, config.slit_halfwidth, config.cache_ny)
        } else {
            vec![0.0]
        };
        let points: Vec<(f64, f64)> = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .collect();
        let results = par_map(&points, |&(x, y)| {
            propagate_default(params, &GeometryOffsets::new(x, y), integ).map(|t| t.summary.p_emit)
        });
        let mut values = Vec::with_capacity(points.len());
        let mut failures = Vec::new();
        for ((x, y), r) in points.iter().zip(results) {
            match r {
                Ok(v) => values.push(v),
                Err(e) => {
                    failures.push(format!("x = {x:e} m, y = {y:e} m: {e}"));
                    values.push(f64::NAN);
                }
            }
        }
        if values.iter().all(|v| v.is_nan()) {
            return Err(invalid("every emission map point failed"));
        }
        Ok(Self {
            lambda,
            xs,
            ys,
            values,
            failures,
        })
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    fn bracket(grid: &[f64], v: f64) -> (usize, f64) {
        if grid.len() == 1 {
            return (0, 0.0);
        }
        let step = grid[1] - grid[0];
        let pos = ((v - grid[0]) / step).clamp(0.0, (grid.len() - 1) as f64);
        let i = (pos.floor() as usize).min(grid.len() - 2);
        (i, pos - i as f64)
    }

    /// Bilinear interpolation; failed corners are dropped and the
    /// remaining weights renormalised.
    pub fn at(&self, geom: &GeometryOffsets) -> f64 {
        let x = geom.x_axial.rem_euclid(0.5 * self.lambda);
        let y = geom.y_transverse.abs();
        let (i, fx) = Self::bracket(&self.xs, x);
        let (j, fy) = Self::bracket(&self.ys, y);
        let j1 = (j + 1).min(self.ys.len() - 1);
        let corners = [
            (i, j, (1.0 - fx) * (1.0 - fy)),
            (i + 1, j, fx * (1.0 - fy)),
            (i, j1, (1.0 - fx) * fy),
            (i + 1, j1, fx * fy),
        ];
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (a, b, w) in corners {
            let v = self.value(a, b);
            if !v.is_nan() && w > 0.0 {
                acc += w * v;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
    pub excluded_points: usize,
}

/// Monte Carlo average of a tabulated emission map over the atom distribution.
pub fn average_map(
    map: &EmissionMap,
    config: &EnsembleConfig,
    samples: usize,
    seed: u64,
) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford: stable when every sample is (nearly) equal
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=samples {
        let p = map.at(&sample_atom(&mut rng, config, map.lambda));
        let d = p - mean;
        mean += d / k as f64;
        m2 += d * (p - mean);
    }
    let n = samples as f64;
    let var = if samples > 1 { m2 / (n - 1.0) } else { 0.0 };
    Estimate {
        mean,
        std_err: (var / n).sqrt(),
        samples,
        excluded_points: map.failures.len(),
    }
}

/// Average emission probability per atom crossing slit and pump.
pub fn mean_emission(
    params: &SystemParams,
    integ: &IntegratorConfig,
    config: &EnsembleConfig,
    delay: f64,
) -> Result<Estimate> {
    let map = EmissionMap::build(&params.with_delay(delay), integ, config)?;
    Ok(average_map(
        &map,
        config,
        config.mc_samples,
        config.rng_seed,
    ))
}

/// Probability that a second atom arrives while one is generating its
/// photon: rate × generation time, valid while the product is small.
pub fn two_atom_overlap(atom_rate: f64, generation_fwhm: f64) -> Result<f64> {
    if !(atom_rate >= 0.0 && atom_rate.is_finite()) {
        return Err(invalid("atom rate must be non-negative"));
    }
    if !(generation_fwhm > 0.0 && generation_fwhm.is_finite()) {
        return Err(invalid("generation time must be positive"));
    }
    Ok(atom_rate * generation_fwhm)
}

/// Photon generation rate implied by a detected count over an observation time.
pub fn generation_rate(detected: f64, observation_time: f64, detection_efficiency: f64) -> f64 {
    detected / observation_time / detection_efficiency
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// Pump detuning (rad/s).
    pub delta_p: f64,
    pub n_atoms: u64,
    pub n_generated: u64,
    pub n_detected: u64,
    pub n_dark: u64,
    pub total_counts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSpectrum {
    pub delta_c: f64,
    pub delay: f64,
    pub observation_time: f64,
    pub seed: u64,
    pub bins: Vec<CountRecord>,
    pub excluded_points: usize,
}

impl CountSpectrum {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "bin,n_atoms,n_generated,n_detected,n_dark,total,delta_p_mhz"
        )?;
        for (i, b) in self.bins.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                b.n_atoms,
                b.n_generated,
                b.n_detected,
                b.n_dark,
                b.total_counts,
                to_mhz(b.delta_p)
            )?;
        }
        Ok(())
    }
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as u64
}

/// Simulated detector record for one pump detuning bin.
pub fn simulate_bin<R: Rng + ?Sized>(
    rng: &mut R,
    map: &EmissionMap,
    config: &EnsembleConfig,
    delta_p: f64,
) -> CountRecord {
    let n_atoms = poisson(rng, config.expected_atoms());
    let mut n_generated = 0;
    let mut n_detected = 0;
    for _ in 0..n_atoms {
        let geom = sample_atom(rng, config, map.lambda);
        let p = map.at(&geom).clamp(0.0, 1.0);
        if rng.gen_bool(p) {
            n_generated += 1;
            if rng.gen_bool(config.detection_efficiency) {
                n_detected += 1;
            }
        }
    }
    let n_dark = poisson(rng, config.expected_dark_counts());
    CountRecord {
        delta_p,
        n_atoms,
        n_generated,
        n_detected,
        n_dark,
        total_counts: n_detected + n_dark,
    }
}

/// Count spectrum versus pump detuning (rad/s) at fixed cavity detuning.
pub fn count_spectrum(
    params: &SystemParams,
    integ: &IntegratorConfig,
    config: &EnsembleConfig,
    grid_p: &[f64],
    delta_c: f64,
    delay: f64,
) -> Result<CountSpectrum> {
    config.validate()?;
    if grid_p.is_empty() {
        return Err(invalid("pump detuning grid is empty"));
    }
    let base = SystemParams {
        delta_c,
        ..params.with_delay(delay)
    };
    let mut bins = Vec::with_capacity(grid_p.len());
    let mut excluded = 0;
    for (k, &dp) in grid_p.iter().enumerate() {
        let map = EmissionMap::build(
            &SystemParams {
                delta_p: dp,
                ..base
            },
            integ,
            config,
        )?;
        excluded += map.failures.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(k as u64 + 1);
        bins.push(simulate_bin(&mut rng, &map, config, dp));
    }
    Ok(CountSpectrum {
        delta_c,
        delay,
        observation_time: config.observation_time(),
        seed: config.rng_seed,
        bins,
        excluded_points: excluded,
    })
}

/// Lorentzian fit of total counts versus Δ_P (MHz); the offset absorbs dark counts.
pub fn fit_spectrum(spectrum: &CountSpectrum) -> LorentzianFit {
    let x: Vec<f64> = spectrum.bins.iter().map(|b| to_mhz(b.delta_p)).collect();
    let y: Vec<f64> = spectrum
        .bins
        .iter()
        .map(|b| b.total_counts as f64)
        .collect();
    fit_lorentzian(&x, &y)
}
