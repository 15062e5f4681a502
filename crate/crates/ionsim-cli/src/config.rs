//! Run configuration: defaults, file layer, flag layer, and resolution.
//!
//! Precedence is fixed: built-in defaults, then the `--config` file, then
//! command-line flags. A file may be either a bare configuration object or
//! a sidecar emitted by an earlier run (detected by its `schema_version`
//! and `config` keys), so every output can be fed straight back in.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ionsim::{HilbertConfig, IntensityNoise, ModelParams, PhaseNoise, SidebandKind, TimeGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit codes: 2 config, 3 numerical invariant, 4 fit.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("{context}: {err}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ionsim::Error> for CliError {
    fn from(err: ionsim::Error) -> Self {
        use ionsim::Error::*;
        let code = match &err {
            InvalidParameter { .. } => 2,
            FitNonConvergence { .. }
            | ShortTrace { .. }
            | NonpositiveRate { .. }
            | TooFewLevels { .. } => 4,
            _ => 3,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

pub fn parse_sideband(s: &str) -> Result<SidebandKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| {
        format!(
            "unknown sideband '{s}' (expected carrier, red-sideband, \
             blue-sideband, or second-red-sideband)"
        )
    })
}

/// One configuration layer; every field optional. Unknown keys are
/// rejected so a typo fails loudly instead of silently using a default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sideband: Option<SidebandKind>,
    pub n_init: Option<usize>,
    pub eta: Option<f64>,
    pub scaled: Option<bool>,
    pub omega0_hz: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub t0: Option<f64>,
    pub tmax: Option<f64>,
    pub points: Option<usize>,
    pub dt: Option<f64>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub n_max: Option<usize>,
    pub step_factor: Option<f64>,
    pub n_from: Option<usize>,
    pub n_to: Option<usize>,
    pub t_pulse: Option<f64>,
    pub n_samples: Option<usize>,
    pub out: Option<String>,
    pub format: Option<OutputFormat>,
}

impl FileConfig {
    /// Overlays `other` on top of `self`; set fields win.
    fn overlay(mut self, other: FileConfig) -> FileConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            sideband, n_init, eta, scaled, omega0_hz, gamma, lambda, t0, tmax, points, dt, n_traj,
            seed, n_max, step_factor, n_from, n_to, t_pulse, n_samples, out, format
        );
        self
    }
}

/// Fully resolved run configuration, always in scaled units (tau =
/// Omega0 t, Omega0 = 1). Embedded verbatim in every output file; feeding
/// it back through `--config` reproduces the run byte for byte.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub sideband: SidebandKind,
    pub n_init: usize,
    pub eta: f64,
    /// Always true after resolution; physical-mode inputs are converted
    /// once, at parse time.
    pub scaled: bool,
    /// Drive frequency in Hz when the run was given in physical units;
    /// retained for the record only.
    pub omega0_hz: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub t0: f64,
    pub tmax: f64,
    pub points: usize,
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub n_max: usize,
    pub step_factor: f64,
    pub n_from: usize,
    pub n_to: usize,
    pub t_pulse: f64,
    pub n_samples: usize,
    pub out: String,
    pub format: OutputFormat,
}

fn read_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    let is_sidecar = value.get("schema_version").is_some() && value.get("config").is_some();
    if is_sidecar {
        let config = value.get("config").cloned().expect("checked above");
        serde_json::from_value(config).map_err(|e| {
            CliError::config(format!("config {} (sidecar config block): {e}", path.display()))
        })
    } else {
        // Parse from the source text so errors carry line and column.
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }
}

/// Builds the final configuration and re-validates every precondition the
/// library modules impose, so a bad run dies here with exit code 2 rather
/// than mid-integration.
pub fn resolve(
    config_path: Option<&Path>,
    flags: FileConfig,
    default_out: &str,
) -> Result<ResolvedConfig, CliError> {
    let mut merged = FileConfig::default();
    if let Some(path) = config_path {
        merged = merged.overlay(read_config_file(path)?);
    }
    merged = merged.overlay(flags);

    let scaled_input = merged.scaled.unwrap_or(true);
    let omega0_hz = merged.omega0_hz;
    if !scaled_input {
        // Physical mode: times in seconds, gamma in seconds, lambda in
        // 1/s, drive frequency in Hz. Only user-supplied values are
        // converted; defaults are defined in scaled units already.
        let f = omega0_hz
            .ok_or_else(|| CliError::config("physical mode (scaled = false) requires omega0_hz"))?;
        if !(f.is_finite() && f > 0.0) {
            return Err(CliError::config(format!(
                "omega0_hz must be finite and positive, got {f}"
            )));
        }
        let w0 = 2.0 * std::f64::consts::PI * f;
        for field in [
            &mut merged.t0,
            &mut merged.tmax,
            &mut merged.dt,
            &mut merged.t_pulse,
            &mut merged.gamma,
        ]
        .into_iter()
        .flatten()
        {
            *field *= w0;
        }
        if let Some(v) = &mut merged.lambda {
            *v /= w0;
        }
    }

    // Exactly one noise channel may be active. A lone lambda silences the
    // default gamma so `--lambda 0.1` means a pure dephasing run.
    let (gamma, lambda) = match (merged.gamma, merged.lambda) {
        (None, None) => (0.041, 0.0),
        (Some(g), None) => (g, 0.0),
        (None, Some(l)) => (0.0, l),
        (Some(g), Some(l)) => {
            if g > 0.0 && l > 0.0 {
                return Err(CliError::config(
                    "gamma and lambda are mutually exclusive; set at most one of them nonzero",
                ));
            }
            (g, l)
        }
    };

    let cfg = ResolvedConfig {
        sideband: merged.sideband.unwrap_or(SidebandKind::BlueSideband),
        n_init: merged.n_init.unwrap_or(0),
        eta: merged.eta.unwrap_or(0.2),
        scaled: true,
        omega0_hz,
        gamma,
        lambda,
        t0: merged.t0.unwrap_or(0.0),
        tmax: merged.tmax.unwrap_or(50.0),
        points: merged.points.unwrap_or(501),
        dt: merged.dt.unwrap_or(1e-3),
        n_traj: merged.n_traj.unwrap_or(10_000),
        seed: merged.seed.unwrap_or(1),
        n_max: merged.n_max.unwrap_or(8),
        step_factor: merged.step_factor.unwrap_or(0.05),
        n_from: merged.n_from.unwrap_or(0),
        n_to: merged.n_to.unwrap_or(5),
        t_pulse: merged.t_pulse.unwrap_or(2.0 * std::f64::consts::PI),
        n_samples: merged.n_samples.unwrap_or(10_000),
        out: merged.out.unwrap_or_else(|| default_out.to_owned()),
        format: merged.format.unwrap_or(OutputFormat::Csv),
    };

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let hilbert = HilbertConfig::new(cfg.n_max).map_err(CliError::from_config_err)?;
    ModelParams::new(1.0, cfg.eta, hilbert).map_err(CliError::from_config_err)?;
    TimeGrid::new(cfg.t0, cfg.tmax, cfg.points).map_err(CliError::from_config_err)?;
    IntensityNoise::new(cfg.gamma).map_err(CliError::from_config_err)?;
    PhaseNoise::new(cfg.lambda).map_err(CliError::from_config_err)?;
    if cfg.n_init > cfg.n_max {
        return Err(CliError::config(format!(
            "n_init = {} exceeds the truncation n_max = {}",
            cfg.n_init, cfg.n_max
        )));
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(CliError::config(format!(
            "dt must be finite and positive, got {}",
            cfg.dt
        )));
    }
    if cfg.n_traj == 0 {
        return Err(CliError::config("n_traj must be at least 1"));
    }
    if !(cfg.step_factor.is_finite() && cfg.step_factor > 0.0 && cfg.step_factor <= 0.1) {
        return Err(CliError::config(format!(
            "step_factor must lie in (0, 0.1], got {}",
            cfg.step_factor
        )));
    }
    if cfg.n_from > cfg.n_to {
        return Err(CliError::config(format!(
            "n_from = {} exceeds n_to = {}",
            cfg.n_from, cfg.n_to
        )));
    }
    if cfg.n_to > cfg.n_max {
        return Err(CliError::config(format!(
            "sweep level n_to = {} exceeds the truncation n_max = {}",
            cfg.n_to, cfg.n_max
        )));
    }
    if !(cfg.t_pulse.is_finite() && cfg.t_pulse > 0.0) {
        return Err(CliError::config(format!(
            "t_pulse must be finite and positive, got {}",
            cfg.t_pulse
        )));
    }
    if cfg.n_samples < 2 {
        return Err(CliError::config("n_samples must be at least 2"));
    }
    Ok(())
}

impl CliError {
    /// Library validation hit during config resolution is a config error
    /// regardless of which variant it surfaced as.
    fn from_config_err(err: ionsim::Error) -> Self {
        CliError::config(err.to_string())
    }
}
