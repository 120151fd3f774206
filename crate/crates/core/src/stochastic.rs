//! Time-domain photocurrent statistics.
//!
//! [`variance_trace`] evaluates Var[δI(t)] = w(t)ᵀΣw(t) from the linearized
//! photocurrent weights; in the self-referred frame w(t) rotates at the RF
//! tones and the variance is cyclostationary. [`sample_photocurrent`]
//! draws Gaussian realizations of the same model and [`estimate_psd`]
//! turns a series into an averaged periodogram with chi-square intervals.
//!
//! Discrete-time convention: a white quadrature with two-sided symmetrized
//! PSD S̄ sampled at f_s has per-sample variance S̄·f_s, so a generated series
//! satisfies ⟨δI_k²⟩ = f_s·Var(t_k) and its periodogram estimates Var.
//!
//! Random numbers come from ChaCha8 with one stream per independent block of
//! quadratures (a line, or an EPR pair) keyed by field and line index, and
//! are consumed in time order, so output does not depend on scheduling.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dcs::{
    mean_photocurrent, sql_psd, DcsSetup, DcsStates, PhotocurrentOracle, SampleResponse,
};
use crate::envelope::CombEnvelope;
use crate::states::{Field, Frame, Orientation, PerLine, QuantumSpec};
use crate::{Error, Result, HBAR, SPEED_OF_LIGHT};

/// Sampling and estimation parameters of a time-domain run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// f_s (Hz).
    pub sample_rate: f64,
    /// T (s).
    pub duration: f64,
    pub seed: u64,
    /// Resolution bandwidth of PSD estimates (Hz).
    pub rbw: f64,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sample rate", self.sample_rate),
            ("duration", self.duration),
            ("rbw", self.rbw),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.duration * self.rbw < 1.0 {
            return Err(Error::domain(format!(
                "duration {} s is shorter than one resolution segment 1/rbw = {} s",
                self.duration,
                1.0 / self.rbw
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Segment length f_s/rbw in samples.
    pub fn segment_len(&self) -> usize {
        (self.sample_rate / self.rbw).round().max(1.0) as usize
    }

    fn check_aliasing(&self, setup: &DcsSetup) -> Result<()> {
        let f_max = setup.max_tone() / (2.0 * PI);
        if self.sample_rate <= 2.0 * f_max {
            return Err(Error::domain(format!(
                "sample rate {} Hz does not resolve the highest beat at {f_max} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Analytic variance and mean photocurrent on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTrace {
    pub times: Vec<f64>,
    /// Var[δI(t)] as a PSD level (A²/Hz).
    pub variance: Vec<f64>,
    /// ⟨I(t)⟩ (A).
    pub mean: Vec<f64>,
    /// Vacuum PSD of the setup (A²/Hz).
    pub sql: f64,
    /// 2q_e Σ √κα_Sα_L: the largest possible |⟨I⟩| (A).
    pub mean_scale: f64,
}

impl VarianceTrace {
    pub fn normalized_variance(&self) -> impl Iterator<Item = f64> + '_ {
        self.variance.iter().map(move |v| v / self.sql)
    }

    pub fn normalized_mean(&self) -> impl Iterator<Item = f64> + '_ {
        self.mean.iter().map(move |m| m / self.mean_scale)
    }

    pub fn average(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len() as f64
    }
}

fn variance_at(oracle: &PhotocurrentOracle, entries: &[(usize, usize, f64)], t: f64) -> f64 {
    let w = oracle.weights_at(t);
    entries
        .iter()
        .map(|&(i, j, v)| {
            if i == j {
                w[i] * w[i] * v
            } else {
                2.0 * w[i] * w[j] * v
            }
        })
        .sum()
}

/// Var[δI(t)] and ⟨I(t)⟩ at each requested time.
pub fn variance_trace(
    setup: &DcsSetup,
    states: &DcsStates,
    sample: &SampleResponse,
    times: &[f64],
) -> Result<VarianceTrace> {
    if times.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    let oracle = PhotocurrentOracle::new(setup, states, sample)?;
    let entries = oracle.cov.nonzero_entries();
    let variance = times
        .par_iter()
        .map(|&t| variance_at(&oracle, &entries, t))
        .collect();
    let mean = times
        .iter()
        .map(|&t| mean_photocurrent(setup, sample, t))
        .collect();
    let mean_scale = mean_photocurrent(
        setup,
        &SampleResponse {
            thetas: vec![0.0; sample.thetas.len()],
            ..sample.clone()
        },
        0.0,
    );
    Ok(VarianceTrace {
        times: times.to_vec(),
        variance,
        mean,
        sql: sql_psd(setup),
        mean_scale,
    })
}

/// Regular grid t_k = k/f_s for k < count.
pub fn sample_times(sample_rate: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 / sample_rate).collect()
}

/// A correlated block of quadratures with its projections onto the
/// photocurrent: contribution(t) = Σ_lines cos Ωt·(A·L)z + sin Ωt·(B·L)z.
struct Block {
    stream: u64,
    dim: usize,
    terms: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

fn field_code(field: Field) -> u64 {
    match field {
        Field::Comb => 0,
        Field::Signal => 1,
        Field::Lo => 2,
        Field::SampleVacuum => 3,
    }
}

fn blocks(oracle: &PhotocurrentOracle, n_min: i64) -> Result<Vec<Block>> {
    let dim = oracle.cov.dim();
    let modes = oracle.cov.modes().len();
    // union-find over modes coupled by covariance
    let mut parent: Vec<usize> = (0..modes).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (i, j, _) in oracle.cov.nonzero_entries() {
        let (a, b) = (root(&mut parent, i / 2), root(&mut parent, j / 2));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; modes];
    for m in 0..modes {
        let r = root(&mut parent, m);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(m);
    }

    let mut dense_cos = vec![vec![0.0; dim]; oracle.lines.len()];
    let mut dense_sin = vec![vec![0.0; dim]; oracle.lines.len()];
    for (l, line) in oracle.lines.iter().enumerate() {
        for &(i, x) in &line.cos {
            dense_cos[l][i] += x;
        }
        for &(i, x) in &line.sin {
            dense_sin[l][i] += x;
        }
    }

    let mut out = Vec::new();
    for group in groups {
        let idx: Vec<usize> = group.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let d = idx.len();
        let sub = DMatrix::from_fn(d, d, |r, c| oracle.cov.matrix()[(idx[r], idx[c])]);
        let chol = sub
            .cholesky()
            .ok_or_else(|| Error::numeric("block covariance is not positive definite"))?
            .l();
        let mut terms = Vec::new();
        for (l, line) in oracle.lines.iter().enumerate() {
            let a: Vec<f64> = idx.iter().map(|&i| dense_cos[l][i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| dense_sin[l][i]).collect();
            if a.iter().chain(&b).all(|x| *x == 0.0) {
                continue;
            }
            let project = |w: &[f64]| -> Vec<f64> {
                (0..d)
                    .map(|c| (0..d).map(|r| w[r] * chol[(r, c)]).sum())
                    .collect()
            };
            terms.push((line.omega, project(&a), project(&b)));
        }
        if terms.is_empty() {
            continue;
        }
        let key = oracle.cov.modes()[group[0]];
        let stream = (field_code(key.field) << 32) | (key.n - n_min) as u64;
        out.push(Block {
            stream,
            dim: d,
            terms,
        });
    }
    Ok(out)
}

const CHUNK: usize = 1 << 15;

/// A Gaussian realization of δI at t_k = k/f_s, k < f_s·T (A). Identical
/// (inputs, seed) give bit-identical output at any thread count.
pub fn sample_photocurrent(
    setup: &DcsSetup,
    states: &DcsStates,
    sample: &SampleResponse,
    cfg: &TraceConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    cfg.check_aliasing(setup)?;
    let oracle = PhotocurrentOracle::new(setup, states, sample)?;
    let blocks = blocks(&oracle, setup.range().n_min)?;
    let total = cfg.samples();
    let scale = cfg.sample_rate.sqrt();
    let mut rngs: Vec<ChaCha8Rng> = blocks
        .iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b.stream);
            rng
        })
        .collect();

    let mut series = Vec::with_capacity(total);
    let mut start = 0;
    while start < total {
        let len = CHUNK.min(total - start);
        let parts: Vec<Vec<f64>> = blocks
            .par_iter()
            .zip(rngs.par_iter_mut())
            .map(|(block, rng)| {
                let mut out = vec![0.0; len];
                let mut z = vec![0.0; block.dim];
                for (k, slot) in out.iter_mut().enumerate() {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(rng);
                    }
                    let t = (start + k) as f64 / cfg.sample_rate;
                    let mut acc = 0.0;
                    for (omega, a, b) in &block.terms {
                        let dot = |w: &[f64]| w.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>();
                        if *omega == 0.0 {
                            acc += dot(a);
                        } else {
                            let (s, c) = (omega * t).sin_cos();
                            acc += c * dot(a) + s * dot(b);
                        }
                    }
                    *slot = acc * scale;
                }
                out
            })
            .collect();
        for k in 0..len {
            series.push(parts.iter().map(|p| p[k]).sum());
        }
        start += len;
    }
    Ok(series)
}

/// Sample variance of a generated series against the analytic trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    /// Σδ_k²/(K f_s) (A²/Hz).
    pub sample_mean: f64,
    /// Mean of Var(t_k) over the same instants.
    pub analytic_mean: f64,
    /// √(2Σ Var(t_k)²)/K: standard error of `sample_mean` for Gaussian draws.
    pub standard_error: f64,
}

impl McComparison {
    pub fn z_score(&self) -> f64 {
        (self.sample_mean - self.analytic_mean) / self.standard_error
    }
}

/// Draw a series and compare its mean square with the analytic trace.
pub fn compare_monte_carlo(
    setup: &DcsSetup,
    states: &DcsStates,
    sample: &SampleResponse,
    cfg: &TraceConfig,
) -> Result<McComparison> {
    let series = sample_photocurrent(setup, states, sample, cfg)?;
    let times = sample_times(cfg.sample_rate, series.len());
    let trace = variance_trace(setup, states, sample, &times)?;
    let k = series.len() as f64;
    let sample_mean = series.iter().map(|x| x * x).sum::<f64>() / (k * cfg.sample_rate);
    let analytic_mean = trace.average();
    let standard_error = (2.0 * trace.variance.iter().map(|v| v * v).sum::<f64>()).sqrt() / k;
    Ok(McComparison {
        sample_mean,
        analytic_mean,
        standard_error,
    })
}

/// Segment-averaged periodogram with confidence intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// Two-sided PSD (units²/Hz).
    pub psd: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub segments: usize,
    /// Coverage of the intervals.
    pub confidence: f64,
}

/// Coverage of a ±3σ Gaussian interval.
pub const THREE_SIGMA: f64 = 0.997_300_203_936_739_8;

/// Average the periodograms of non-overlapping rectangular segments of
/// length f_s/rbw. Bin k at k·rbw carries |X_k|²/(f_s L), an estimate of the
/// two-sided PSD with 2K degrees of freedom (K at DC and Nyquist).
pub fn estimate_psd(series: &[f64], cfg: &TraceConfig, confidence: f64) -> Result<PsdEstimate> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let len = cfg.segment_len();
    let segments = series.len() / len;
    if segments == 0 {
        return Err(Error::domain(format!(
            "series of {} samples is shorter than one {len}-sample segment",
            series.len()
        )));
    }
    if segments < 10 {
        warn!("only {segments} periodogram segments; intervals will be wide");
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..segments {
        for (b, x) in buf.iter_mut().zip(&series[s * len..(s + 1) * len]) {
            *b = Complex64::new(*x, 0.0);
        }
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
    }
    let norm = 1.0 / (segments as f64 * cfg.sample_rate * len as f64);
    let psd: Vec<f64> = acc.iter().map(|a| a * norm).collect();
    let tail = 0.5 * (1.0 - confidence);
    let quantiles = |dof: f64| -> Result<(f64, f64)> {
        let chi = ChiSquared::new(dof).map_err(|e| Error::numeric(e.to_string()))?;
        Ok((chi.inverse_cdf(tail), chi.inverse_cdf(1.0 - tail)))
    };
    let interior = quantiles(2.0 * segments as f64)?;
    let edge = quantiles(segments as f64)?;
    let (mut ci_lo, mut ci_hi) = (Vec::with_capacity(bins), Vec::with_capacity(bins));
    for (k, p) in psd.iter().enumerate() {
        let is_edge = k == 0 || (len.is_multiple_of(2) && k == len / 2);
        let (dof, (lo_q, hi_q)) = if is_edge {
            (segments as f64, edge)
        } else {
            (2.0 * segments as f64, interior)
        };
        ci_lo.push(p * dof / hi_q);
        ci_hi.push(p * dof / lo_q);
    }
    let freqs_hz = (0..bins)
        .map(|k| k as f64 * cfg.sample_rate / len as f64)
        .collect();
    Ok(PsdEstimate {
        freqs_hz,
        psd,
        ci_lo,
        ci_hi,
        segments,
        confidence,
    })
}

/// Parameters of the cyclostationary demonstration: a Gaussian comb at
/// 1550 nm, 10 mW, lines n = −50..50 with |αₙ| ∝ exp(−n²/2σ²) and σ = 50/3,
/// self-referred amplitude squeezing of the signal comb, and beat tones at
/// (200.5 + n) kHz so the variance peaks and troughs fall on the sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycloPreset {
    pub wavelength_m: f64,
    pub power_w: f64,
    pub half_lines: i64,
    pub sigma: f64,
    pub gains: Vec<f64>,
    pub offset_hz: f64,
    pub delta_rep_hz: f64,
    pub rep_rate_hz: f64,
    pub trace: TraceConfig,
}

impl Default for CycloPreset {
    fn default() -> Self {
        CycloPreset {
            wavelength_m: 1550e-9,
            power_w: 10e-3,
            half_lines: 50,
            sigma: 50.0 / 3.0,
            gains: vec![1.0, 5.0, 10.0],
            offset_hz: 200.5e3,
            delta_rep_hz: 1e3,
            rep_rate_hz: 1e9,
            trace: TraceConfig {
                sample_rate: 1e6,
                duration: 1.0,
                seed: 0,
                rbw: 100.0,
            },
        }
    }
}

impl CycloPreset {
    /// Photon flux P/(ħω₀).
    pub fn photon_flux(&self) -> f64 {
        let omega0 = 2.0 * PI * SPEED_OF_LIGHT / self.wavelength_m;
        self.power_w / (HBAR * omega0)
    }

    pub fn envelope(&self) -> Result<CombEnvelope> {
        if self.half_lines < 0 || !(self.sigma > 0.0) {
            return Err(Error::domain("preset needs half_lines ≥ 0 and σ > 0"));
        }
        let amps = (-self.half_lines..=self.half_lines)
            .map(|n| (-(n * n) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let omega0 = 2.0 * PI * SPEED_OF_LIGHT / self.wavelength_m;
        CombEnvelope::from_amplitudes(-self.half_lines, amps)?
            .with_grid(omega0, 2.0 * PI * self.rep_rate_hz)?
            .scaled_to_flux(self.photon_flux())
    }

    /// Strong-LO setup with identical signal and LO envelopes.
    pub fn setup(&self) -> Result<DcsSetup> {
        let env = self.envelope()?;
        DcsSetup::new(
            env.clone(),
            env,
            2.0 * PI * self.offset_hz,
            2.0 * PI * self.delta_rep_hz,
            true,
        )
    }

    /// Self-referred squeezing of the signal comb with gain `g`; LO in vacuum.
    pub fn states(&self, g: f64) -> DcsStates {
        DcsStates {
            signal: QuantumSpec::intra(PerLine::Uniform(g), Orientation::DCS)
                .with_frame(Frame::SelfReferred),
            lo: QuantumSpec::vacuum().with_frame(Frame::SelfReferred),
        }
    }

    /// Common period of all variance oscillations, 1/Δf_r when the offset is
    /// a half-integer multiple of Δf_r.
    pub fn period(&self) -> f64 {
        2.0 / self.delta_rep_hz
    }
}
