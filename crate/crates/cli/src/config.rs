//! Run configuration: one JSON document with a schema version and one
//! parameter block per command. Physical quantities are SI with the unit in
//! the key name.

use crate::CliError;
use combnoise_core::dcs::Strategy;
use combnoise_core::envelope::Shape;
use combnoise_core::ofd::SumPolicy;
use combnoise_core::states::QuantumSpec;
use combnoise_core::stochastic::{CycloPreset, TraceConfig, THREE_SIGMA};
use combnoise_core::validation::{Fault, ValidationConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the built-in cyclostationary parameter set.
pub const CYCLO_PRESET: &str = "gaussian-1550";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub ofd_sweep: OfdSweepConfig,
    #[serde(default)]
    pub dcs_advantage: DcsAdvantageConfig,
    #[serde(default)]
    pub cyclo_trace: CycloTraceConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            format: Format::Csv,
            out_dir: None,
            ofd_sweep: OfdSweepConfig::default(),
            dcs_advantage: DcsAdvantageConfig::default(),
            cyclo_trace: CycloTraceConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdSweepConfig {
    pub shapes: Vec<Shape>,
    pub m_rms_min: f64,
    pub m_rms_max: f64,
    pub points: usize,
    pub policy: SumPolicy,
    pub photon_flux_per_s: f64,
    pub state: QuantumSpec,
}

impl Default for OfdSweepConfig {
    fn default() -> Self {
        OfdSweepConfig {
            shapes: Shape::ALL.to_vec(),
            m_rms_min: 10.0,
            m_rms_max: 100.0,
            points: 25,
            policy: SumPolicy::SupportOnly,
            photon_flux_per_s: 1e16,
            state: QuantumSpec::vacuum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcsAdvantageConfig {
    pub gain_db: f64,
    /// Intact-to-absorbed line ratios 2N.
    pub ratios: Vec<u32>,
    pub strategies: Vec<Strategy>,
    pub depth_min_db: f64,
    pub depth_max_db: f64,
    pub depth_step_db: f64,
    /// Append a κ = 0 row per curve.
    pub full_absorption: bool,
    /// α_S²/α_L².
    pub signal_to_lo_power_ratio: f64,
}

impl Default for DcsAdvantageConfig {
    fn default() -> Self {
        DcsAdvantageConfig {
            gain_db: 15.0,
            ratios: vec![10, 100],
            strategies: Strategy::ALL.to_vec(),
            depth_min_db: 0.0,
            depth_max_db: 30.0,
            depth_step_db: 1.0,
            full_absorption: true,
            signal_to_lo_power_ratio: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycloTraceConfig {
    /// Named parameter set; mutually exclusive with `params`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<CycloParams>,
    /// Points of the analytic trace; one full period at the sample rate when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_points: Option<usize>,
    /// Skip the sampled series and its PSD estimate.
    pub analytic_only: bool,
    /// Coverage of the PSD intervals; ±3σ when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycloParams {
    pub wavelength_m: f64,
    pub power_w: f64,
    pub half_lines: i64,
    /// Gaussian width in line-index units.
    pub sigma_lines: f64,
    pub gains: Vec<f64>,
    pub offset_hz: f64,
    pub delta_rep_hz: f64,
    pub rep_rate_hz: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub rbw_hz: f64,
}

impl Default for CycloParams {
    fn default() -> Self {
        CycloParams::from(&CycloPreset::default())
    }
}

impl From<&CycloPreset> for CycloParams {
    fn from(p: &CycloPreset) -> Self {
        CycloParams {
            wavelength_m: p.wavelength_m,
            power_w: p.power_w,
            half_lines: p.half_lines,
            sigma_lines: p.sigma,
            gains: p.gains.clone(),
            offset_hz: p.offset_hz,
            delta_rep_hz: p.delta_rep_hz,
            rep_rate_hz: p.rep_rate_hz,
            sample_rate_hz: p.trace.sample_rate,
            duration_s: p.trace.duration,
            rbw_hz: p.trace.rbw,
        }
    }
}

impl CycloParams {
    pub fn to_preset(&self, seed: u64) -> CycloPreset {
        CycloPreset {
            wavelength_m: self.wavelength_m,
            power_w: self.power_w,
            half_lines: self.half_lines,
            sigma: self.sigma_lines,
            gains: self.gains.clone(),
            offset_hz: self.offset_hz,
            delta_rep_hz: self.delta_rep_hz,
            rep_rate_hz: self.rep_rate_hz,
            trace: TraceConfig {
                sample_rate: self.sample_rate_hz,
                duration: self.duration_s,
                seed,
                rbw: self.rbw_hz,
            },
        }
    }
}

impl CycloTraceConfig {
    /// Resolve the preset-or-params choice into concrete parameters.
    pub fn resolve(&self, seed: u64) -> Result<CycloPreset, CliError> {
        let params = match (&self.preset, &self.params) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage(
                    "cyclo_trace: give either `preset` or `params`, not both",
                ))
            }
            (Some(name), None) if name != CYCLO_PRESET => {
                return Err(CliError::usage(format!(
                    "unknown cyclo_trace preset `{name}`; known: {CYCLO_PRESET}"
                )))
            }
            (_, Some(p)) => p.clone(),
            (_, None) => CycloParams::default(),
        };
        if params.gains.is_empty() {
            return Err(CliError::usage("cyclo_trace: gains must not be empty"));
        }
        if let Some(g) = params.gains.iter().find(|g| !(**g >= 1.0 && g.is_finite())) {
            return Err(CliError::usage(format!(
                "cyclo_trace: gain must be ≥ 1, got {g}"
            )));
        }
        if !(params.delta_rep_hz > 0.0) {
            return Err(CliError::usage(
                "cyclo_trace: delta_rep_hz must be positive",
            ));
        }
        if let Some(c) = self.psd_confidence {
            if !(c > 0.0 && c < 1.0) {
                return Err(CliError::usage(format!(
                    "cyclo_trace: psd_confidence must lie in (0, 1), got {c}"
                )));
            }
        }
        let preset = params.to_preset(seed);
        preset.trace.validate()?;
        Ok(preset)
    }

    pub fn confidence(&self) -> f64 {
        self.psd_confidence.unwrap_or(THREE_SIGMA)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub instances: usize,
    pub mc_configs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<Fault>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        let d = ValidationConfig::default();
        ValidateConfig {
            instances: d.instances,
            mc_configs: d.mc_configs,
            inject_fault: None,
        }
    }
}

impl ValidateConfig {
    pub fn with_seed(&self, seed: u64) -> ValidationConfig {
        ValidationConfig {
            instances: self.instances,
            mc_configs: self.mc_configs,
            seed,
            inject_fault: self.inject_fault,
        }
    }
}

/// Parse a config document. A manifest written by a previous run is
/// accepted too, in which case its embedded config is used.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::usage(format!("config is not valid JSON: {e}")))?;
    if value.get("manifest_version").is_some() {
        value = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| CliError::usage("manifest has no `config` block"))?;
    }
    let cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| CliError::usage(format!("bad config: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.cyclo_trace.params = Some(CycloParams::default());
        cfg.validate.inject_fault = Some(Fault::EprWeightSignFlip);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(matches!(
            parse(r#"{"schema_version": 2}"#),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse(r#"{"schema_version": 1, "ofd_sweep": {"m_rms": 3}}"#),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(parse("not json"), Err(CliError::Usage(_))));
    }

    #[test]
    fn cyclo_preset_and_params_conflict() {
        let both = CycloTraceConfig {
            preset: Some(CYCLO_PRESET.into()),
            params: Some(CycloParams::default()),
            ..Default::default()
        };
        assert!(matches!(both.resolve(0), Err(CliError::Usage(_))));
        let unknown = CycloTraceConfig {
            preset: Some("nope".into()),
            ..Default::default()
        };
        assert!(matches!(unknown.resolve(0), Err(CliError::Usage(_))));
        let resolved = CycloTraceConfig::default().resolve(9).unwrap();
        assert_eq!(
            resolved,
            CycloPreset {
                trace: TraceConfig {
                    seed: 9,
                    ..CycloPreset::default().trace
                },
                ..CycloPreset::default()
            }
        );
    }
}
