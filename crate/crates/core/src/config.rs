//! Run configuration in laboratory units (MHz with ω = 2πν, µm, µs, m/s).

#[cfg(feature = "cli")]
use std::path::Path;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
#[cfg(feature = "cli")]
use serde_json::Value;

use crate::drive::GeometryOffsets;
use crate::engine::IntegratorConfig;
use crate::ensemble::{EnsembleConfig, TransverseProfile};
use crate::error::{Error, Result};
use crate::params::{mhz, to_mhz, SystemParams};
use crate::sweeps::linspace;

/// Environment variable naming the directory searched for configs.
pub const CONFIG_DIR_VAR: &str = "VSTIRAP_CONFIG_DIR";
/// Config picked up from [`CONFIG_DIR_VAR`] when `--config` is absent.
pub const DEFAULT_CONFIG_NAME: &str = "vstirap.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub g0_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub branch_u: f64,
    pub branch_g: f64,
    pub omega0_mhz: f64,
    pub w_c_um: f64,
    pub w_p_um: f64,
    pub v_m_per_s: f64,
    /// Pump delay δx/v.
    pub delay_us: f64,
    pub delta_p_mhz: f64,
    pub delta_c_mhz: f64,
    pub lambda_nm: f64,
    pub n_max: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self::from_params(&SystemParams::default())
    }
}

impl SystemSection {
    pub fn from_params(p: &SystemParams) -> Self {
        Self {
            g0_mhz: to_mhz(p.g0),
            kappa_mhz: to_mhz(p.kappa),
            gamma_mhz: to_mhz(p.gamma),
            branch_u: p.branch_u,
            branch_g: p.branch_g,
            omega0_mhz: to_mhz(p.omega0),
            w_c_um: p.w_c * 1e6,
            w_p_um: p.w_p * 1e6,
            v_m_per_s: p.v,
            delay_us: p.delay() * 1e6,
            delta_p_mhz: to_mhz(p.delta_p),
            delta_c_mhz: to_mhz(p.delta_c),
            lambda_nm: p.lambda_opt * 1e9,
            n_max: p.n_max,
        }
    }

    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            g0: mhz(self.g0_mhz),
            kappa: mhz(self.kappa_mhz),
            gamma: mhz(self.gamma_mhz),
            branch_u: self.branch_u,
            branch_g: self.branch_g,
            omega0: mhz(self.omega0_mhz),
            w_c: self.w_c_um * 1e-6,
            w_p: self.w_p_um * 1e-6,
            v: self.v_m_per_s,
            delta_x: self.delay_us * 1e-6 * self.v_m_per_s,
            delta_p: mhz(self.delta_p_mhz),
            delta_c: mhz(self.delta_c_mhz),
            lambda_opt: self.lambda_nm * 1e-9,
            n_max: self.n_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step_us: f64,
    pub span_cutoff: f64,
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step_us: c.max_step * 1e6,
            span_cutoff: c.span_cutoff,
            snapshot_stride: c.snapshot_stride,
            max_steps: c.max_steps,
        }
    }
}

impl IntegratorSection {
    pub fn to_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step_us * 1e-6,
            span_cutoff: self.span_cutoff,
            snapshot_stride: self.snapshot_stride,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Offset from an antinode along the cavity axis.
    pub x_nm: f64,
    /// Offset from the cavity axis along the pump direction.
    pub y_um: f64,
}

impl GeometrySection {
    pub fn to_offsets(&self) -> GeometryOffsets {
        GeometryOffsets::new(self.x_nm * 1e-9, self.y_um * 1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransverseSection {
    Uniform,
    ClippedGaussian { sigma_um: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub slit_halfwidth_um: f64,
    pub atom_rate_per_s: f64,
    pub drops: u32,
    pub record_window_ms: f64,
    pub detection_efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub cache_nx: usize,
    pub cache_ny: usize,
    /// Emission map size used per bin of the count spectrum.
    pub spectrum_cache_nx: usize,
    pub spectrum_cache_ny: usize,
    pub mc_samples: usize,
    pub transverse: TransverseSection,
    pub axial_position_nm: Option<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let c = EnsembleConfig::default();
        Self {
            slit_halfwidth_um: c.slit_halfwidth * 1e6,
            atom_rate_per_s: c.atom_rate,
            drops: c.drops,
            record_window_ms: c.record_window * 1e3,
            detection_efficiency: c.detection_efficiency,
            dark_count_rate_hz: c.dark_count_rate,
            cache_nx: c.cache_nx,
            cache_ny: c.cache_ny,
            spectrum_cache_nx: 9,
            spectrum_cache_ny: 5,
            mc_samples: c.mc_samples,
            transverse: TransverseSection::Uniform,
            axial_position_nm: None,
        }
    }
}

impl EnsembleSection {
    pub fn to_config(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            slit_halfwidth: self.slit_halfwidth_um * 1e-6,
            atom_rate: self.atom_rate_per_s,
            drops: self.drops,
            record_window: self.record_window_ms * 1e-3,
            detection_efficiency: self.detection_efficiency,
            dark_count_rate: self.dark_count_rate_hz,
            rng_seed: seed,
            cache_nx: self.cache_nx,
            cache_ny: self.cache_ny,
            mc_samples: self.mc_samples,
            transverse: match self.transverse {
                TransverseSection::Uniform => TransverseProfile::Uniform,
                TransverseSection::ClippedGaussian { sigma_um } => {
                    TransverseProfile::ClippedGaussian {
                        sigma: sigma_um * 1e-6,
                    }
                }
            },
            axial_position: self.axial_position_nm.map(|x| x * 1e-9),
        }
    }

    pub fn spectrum_config(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            cache_nx: self.spectrum_cache_nx,
            cache_ny: self.spectrum_cache_ny,
            ..self.to_config(seed)
        }
    }
}

/// Inclusive evenly spaced range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// A grid given either as explicit values or as a [`Span`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Span(Span),
}

impl Grid {
    pub fn span(start: f64, stop: f64, points: usize) -> Self {
        Grid::Span(Span {
            start,
            stop,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Span(s) => linspace(s.start, s.stop, s.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepsSection {
    /// Delay used by the axial, detuning, spectrum and ensemble runs.
    pub fixed_delay_us: f64,
    pub delays_us: Grid,
    /// Defaults to 64 points over one λ/2 period centred on an antinode.
    pub axial_nm: Option<Grid>,
    pub delta_p_mhz: Grid,
    pub delta_c_mhz: Grid,
    /// Pump detunings for spectra, relative to the cavity detuning.
    pub spectrum_offsets_mhz: Grid,
}

impl Default for SweepsSection {
    fn default() -> Self {
        Self {
            fixed_delay_us: 35.0,
            delays_us: Grid::span(-20.0, 80.0, 41),
            axial_nm: None,
            delta_p_mhz: Grid::span(-20.0, 20.0, 41),
            delta_c_mhz: Grid::span(-20.0, 20.0, 41),
            spectrum_offsets_mhz: Grid::span(-20.0, 20.0, 41),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub integrator: IntegratorSection,
    pub geometry: GeometrySection,
    pub ensemble: EnsembleSection,
    pub sweeps: SweepsSection,
    pub output: OutputSection,
    pub seed: u64,
    /// Worker threads for sweeps; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemSection::default(),
            integrator: IntegratorSection::default(),
            geometry: GeometrySection::default(),
            ensemble: EnsembleSection::default(),
            sweeps: SweepsSection::default(),
            output: OutputSection::default(),
            seed: EnsembleConfig::default().rng_seed,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> SystemParams {
        self.system.to_params()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params().validate().map_err(cfg)?;
        self.integrator.to_config().validate().map_err(cfg)?;
        self.ensemble.to_config(self.seed).validate().map_err(cfg)?;
        self.ensemble
            .spectrum_config(self.seed)
            .validate()
            .map_err(cfg)?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(feature = "cli")]
impl RunConfig {
    /// Read a config (or the `resolved_config` of a manifest), apply
    /// `key.path=value` overrides and validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        let mut value = serde_json::to_value(&base)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = serde_path_to_error::deserialize(value)
            .map_err(|e| Error::Config(format!("override: {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config document; errors name the JSON path and position.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(inner) = value.get("resolved_config") {
            return serde_path_to_error::deserialize(inner).map_err(|e| {
                Error::Config(format!("resolved_config.{}: {}", e.path(), e.inner()))
            });
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))
    }
}

#[cfg(feature = "cli")]
/// Config file to use: an explicit path (also tried relative to the config
/// directory), else the default file in the config directory if present.
pub fn resolve_path(explicit: Option<&Path>) -> Option<PathBuf> {
    let dir = std::env::var_os(CONFIG_DIR_VAR).map(PathBuf::from);
    match explicit {
        Some(p) if p.exists() || p.is_absolute() => Some(p.to_path_buf()),
        Some(p) => match dir {
            Some(d) if d.join(p).exists() => Some(d.join(p)),
            _ => Some(p.to_path_buf()),
        },
        None => dir
            .map(|d| d.join(DEFAULT_CONFIG_NAME))
            .filter(|p| p.exists()),
    }
}

#[cfg(feature = "cli")]
fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override `{spec}` is not of the form key.path=value"
        ))
    })?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!(
            "override key `{key}` has an empty segment"
        )));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override `{key}`: `{}` is not a section",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}
