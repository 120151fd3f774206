//! The four commands. Each writes its tables and a manifest into the output
//! directory and returns a summary of what it found.

use crate::config::{DcsAdvantageConfig, OfdSweepConfig, RunConfig};
use crate::output::{number, write_atomic, Cell, Table};
use crate::CliError;
use combnoise_core::dcs::{advantage_curve, SampleResponse};
use combnoise_core::ofd::{log_grid, loglog_slope, sweep_suppression};
use combnoise_core::stochastic::{
    estimate_psd, sample_photocurrent, sample_times, variance_trace, McComparison, VarianceTrace,
};
use combnoise_core::validation;
use log::info;
use serde_json::{json, Map, Value};
use std::path::Path;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    OfdSweep,
    DcsAdvantage,
    CycloTrace,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::OfdSweep => "ofd-sweep",
            Command::DcsAdvantage => "dcs-advantage",
            Command::CycloTrace => "cyclo-trace",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: Command,
    /// Written file names relative to the output directory, manifest last.
    pub files: Vec<String>,
    pub summary: Value,
    /// False only when a validation check failed.
    pub passed: bool,
}

struct Produced {
    files: Vec<String>,
    summary: Value,
    passed: bool,
}

/// Run `command` with a resolved config, writing into `out_dir`.
pub fn execute(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    info!("{} -> {}", command.name(), out_dir.display());
    let produced = match command {
        Command::OfdSweep => ofd_sweep(&cfg.ofd_sweep, cfg, out_dir)?,
        Command::DcsAdvantage => dcs_advantage(&cfg.dcs_advantage, cfg, out_dir)?,
        Command::CycloTrace => cyclo_trace(cfg, out_dir)?,
        Command::Validate => validate(cfg, out_dir)?,
    };
    let echoed = RunConfig {
        out_dir: None,
        ..cfg.clone()
    };
    let manifest = json!({
        "manifest_version": MANIFEST_VERSION,
        "tool": concat!("combnoise ", env!("CARGO_PKG_VERSION")),
        "command": command.name(),
        "config": echoed,
        "outputs": produced.files,
        "summary": produced.summary,
        "passed": produced.passed,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(out_dir, MANIFEST, text.as_bytes())?;
    let mut files = produced.files;
    files.push(MANIFEST.into());
    Ok(Outcome {
        command,
        files,
        summary: produced.summary,
        passed: produced.passed,
    })
}

fn ofd_sweep(c: &OfdSweepConfig, cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    if c.shapes.is_empty() {
        return Err(CliError::usage("ofd_sweep: shape list is empty"));
    }
    if !(c.photon_flux_per_s > 0.0 && c.photon_flux_per_s.is_finite()) {
        return Err(CliError::usage(
            "ofd_sweep: photon_flux_per_s must be positive",
        ));
    }
    let grid = log_grid(c.m_rms_min, c.m_rms_max, c.points)
        .map_err(|e| CliError::usage(format!("ofd_sweep: {e}")))?;
    let points = sweep_suppression(&c.shapes, &grid, &c.state, c.policy, c.photon_flux_per_s)?;

    let mut table = Table::new(vec!["shape", "param", "M_rms", "R", "eta", "policy"]);
    for p in &points {
        table.push(vec![
            Cell::Text(p.shape.name().into()),
            Cell::Num(p.param),
            Cell::Num(p.m_rms),
            Cell::Num(p.r),
            Cell::Num(p.eta),
            Cell::Text(p.policy.name().into()),
        ]);
    }
    let mut slopes = Map::new();
    for &shape in &c.shapes {
        let own: Vec<_> = points
            .iter()
            .filter(|p| p.shape == shape)
            .cloned()
            .collect();
        let slope = if own.len() >= 2 {
            loglog_slope(&own).map(number).unwrap_or(Value::Null)
        } else {
            Value::Null
        };
        slopes.insert(shape.name().into(), slope);
    }
    let max_r = points.iter().map(|p| p.r).fold(f64::NEG_INFINITY, f64::max);
    let file = table.write(dir, "ofd_sweep", cfg.format)?;
    Ok(Produced {
        files: vec![file],
        summary: json!({ "points": points.len(), "loglog_slopes": slopes, "max_R": number(max_r) }),
        passed: true,
    })
}

fn depth_grid(c: &DcsAdvantageConfig) -> Result<Vec<f64>, CliError> {
    let (lo, hi, step) = (c.depth_min_db, c.depth_max_db, c.depth_step_db);
    if !(lo >= 0.0 && hi >= lo && hi.is_finite() && step > 0.0) {
        return Err(CliError::usage(format!(
            "dcs_advantage: bad depth grid {lo}..{hi} dB step {step}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let mut depths: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
    if c.full_absorption {
        depths.push(f64::INFINITY);
    }
    Ok(depths)
}

fn dcs_advantage(
    c: &DcsAdvantageConfig,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<Produced, CliError> {
    if !(c.gain_db >= 0.0 && c.gain_db.is_finite()) {
        return Err(CliError::usage(format!(
            "dcs_advantage: gain_db must be ≥ 0, got {}",
            c.gain_db
        )));
    }
    if c.ratios.is_empty() || c.strategies.is_empty() {
        return Err(CliError::usage(
            "dcs_advantage: ratios and strategies must not be empty",
        ));
    }
    if let Some(r) = c.ratios.iter().find(|r| **r < 2 || **r % 2 != 0) {
        return Err(CliError::usage(format!(
            "dcs_advantage: ratio {r} is not an even number ≥ 2"
        )));
    }
    if !(c.signal_to_lo_power_ratio >= 0.0 && c.signal_to_lo_power_ratio.is_finite()) {
        return Err(CliError::usage(
            "dcs_advantage: signal_to_lo_power_ratio must be ≥ 0",
        ));
    }
    let depths = depth_grid(c)?;
    let g = 10f64.powf(c.gain_db / 10.0);
    let (alpha_s, alpha_l) = (c.signal_to_lo_power_ratio.sqrt(), 1.0);

    let mut table = Table::new(vec![
        "depth_db",
        "strategy",
        "ratio",
        "G_db",
        "advantage_db",
    ]);
    let mut curves = Vec::new();
    for &ratio in &c.ratios {
        for &strategy in &c.strategies {
            let rows = advantage_curve(ratio / 2, &depths, g, alpha_s, alpha_l, strategy)?;
            for r in &rows {
                table.push(vec![
                    Cell::Num(r.depth_db),
                    Cell::Text(strategy.name().into()),
                    Cell::Int(r.ratio.into()),
                    Cell::Num(r.g_db),
                    Cell::Num(r.advantage_db),
                ]);
            }
            let full = rows
                .iter()
                .find(|r| r.depth_db.is_infinite())
                .map(|r| number(r.advantage_db));
            curves.push(json!({
                "ratio": ratio,
                "strategy": strategy.name(),
                "first_depth_advantage_db": number(rows[0].advantage_db),
                "full_absorption_advantage_db": full.unwrap_or(Value::Null),
            }));
        }
    }
    let file = table.write(dir, "dcs_advantage", cfg.format)?;
    Ok(Produced {
        files: vec![file],
        summary: json!({ "gain": number(g), "curves": curves }),
        passed: true,
    })
}

fn trace_extrema(trace: &VarianceTrace) -> (f64, f64, f64) {
    let v: Vec<f64> = trace.normalized_variance().collect();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max, v.iter().sum::<f64>() / v.len() as f64)
}

fn cyclo_trace(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let c = &cfg.cyclo_trace;
    let preset = c.resolve(cfg.seed)?;
    let setup = preset.setup()?;
    let sample = SampleResponse::transparent(setup.range());
    let fs = preset.trace.sample_rate;
    let points = c
        .trace_points
        .unwrap_or((preset.period() * fs).round() as usize);
    if points == 0 {
        return Err(CliError::usage(
            "cyclo_trace: trace_points must be positive",
        ));
    }
    let times = sample_times(fs, points);

    let mut files = Vec::new();
    let mut per_gain = Vec::new();
    for &g in &preset.gains {
        let states = preset.states(g);
        let trace = variance_trace(&setup, &states, &sample, &times)?;
        let mut table = Table::new(vec!["t_us", "mean_I", "var_I"]);
        for ((t, m), v) in trace
            .times
            .iter()
            .zip(trace.normalized_mean())
            .zip(trace.normalized_variance())
        {
            table.push(vec![Cell::Num(t * 1e6), Cell::Num(m), Cell::Num(v)]);
        }
        files.push(table.write(dir, &format!("trace_G{g}"), cfg.format)?);
        let (min, max, mean) = trace_extrema(&trace);
        let mut entry = json!({
            "gain": number(g),
            "sql_a2_per_hz": number(trace.sql),
            "mean_scale_a": number(trace.mean_scale),
            "var_min": number(min),
            "var_max": number(max),
            "var_mean": number(mean),
            "expected_min": number(1.0 / g),
            "expected_max": number(g),
            "expected_mean": number(0.5 * (g + 1.0 / g)),
        });

        if !c.analytic_only {
            let series = sample_photocurrent(&setup, &states, &sample, &preset.trace)?;
            let all_times = sample_times(fs, series.len());
            let full = variance_trace(&setup, &states, &sample, &all_times)?;
            let k = series.len() as f64;
            let cmp = McComparison {
                sample_mean: series.iter().map(|x| x * x).sum::<f64>() / (k * fs),
                analytic_mean: full.average(),
                standard_error: (2.0 * full.variance.iter().map(|v| v * v).sum::<f64>()).sqrt() / k,
            };
            let est = estimate_psd(&series, &preset.trace, c.confidence())?;
            let sql = trace.sql;
            let mut psd = Table::new(vec!["f_hz", "psd", "ci_lo", "ci_hi"]);
            for i in 0..est.psd.len() {
                psd.push(vec![
                    Cell::Num(est.freqs_hz[i]),
                    Cell::Num(est.psd[i] / sql),
                    Cell::Num(est.ci_lo[i] / sql),
                    Cell::Num(est.ci_hi[i] / sql),
                ]);
            }
            files.push(psd.write(dir, &format!("psd_G{g}"), cfg.format)?);
            entry["monte_carlo"] = json!({
                "samples": series.len(),
                "sample_mean": number(cmp.sample_mean / sql),
                "analytic_mean": number(cmp.analytic_mean / sql),
                "standard_error": number(cmp.standard_error / sql),
                "z_score": number(cmp.z_score()),
                "psd_segments": est.segments,
                "psd_confidence": number(est.confidence),
            });
        }
        per_gain.push(entry);
    }
    Ok(Produced {
        files,
        summary: json!({
            "normalization": "var_I and psd in units of the vacuum PSD; mean_I in units of mean_scale_a",
            "period_s": number(preset.period()),
            "trace_points": points,
            "gains": per_gain,
        }),
        passed: true,
    })
}

fn validate(cfg: &RunConfig, dir: &Path) -> Result<Produced, CliError> {
    let vcfg = cfg.validate.with_seed(cfg.seed);
    let report = validation::run(&vcfg)?;
    let mut table = Table::new(vec![
        "suite",
        "name",
        "passed",
        "worst",
        "tolerance",
        "cases",
    ]);
    for c in &report.checks {
        table.push(vec![
            Cell::Text(c.suite.clone()),
            Cell::Text(c.name.clone()),
            Cell::Text(c.passed.to_string()),
            Cell::Num(c.worst),
            Cell::Num(c.tolerance),
            Cell::Int(c.cases as i64),
        ]);
    }
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}/{}", c.suite, c.name))
        .collect();
    let file = table.write(dir, "validation_report", cfg.format)?;
    Ok(Produced {
        files: vec![file],
        summary: json!({ "checks": report.checks.len(), "failed": failed }),
        passed: report.passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_grid_is_inclusive() {
        let c = DcsAdvantageConfig::default();
        let d = depth_grid(&c).unwrap();
        assert_eq!(d.len(), 32);
        assert_eq!(d[30], 30.0);
        assert!(d[31].is_infinite());
        let bad = DcsAdvantageConfig {
            depth_step_db: 0.0,
            ..c
        };
        assert!(matches!(depth_grid(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn empty_shapes_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.ofd_sweep.shapes.clear();
        assert!(matches!(
            execute(Command::OfdSweep, &cfg, dir.path()),
            Err(CliError::Usage(_))
        ));
    }
}
