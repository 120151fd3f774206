//! Optical frequency division: microwave amplitude and phase noise of the
//! photodetected pulse train at the repetition rate.
//!
//! Linearizing the beat at Ω_r gives estimators that weight line n by
//! (α_{n−1} + α_{n+1}) on δqₙ (amplitude) and (α_{n−1} − α_{n+1}) on δpₙ
//! (phase), both over √2|S| with |S| = Σ α_{n−1}αₙ. The phase weights are a
//! discrete derivative of the envelope, so flat interiors drop out and only
//! the edges contribute.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{
    make_envelope, rms_modal_bandwidth, solve_shape_param, CombEnvelope, PhasedEnvelope, Shape,
};
use crate::report::{NoiseReport, Quantity};
use crate::states::{build_covariance, CovarianceModel, Field, IndexRange, Mode, QuantumSpec};
use crate::{Error, Result};

/// Which line indices enter the estimator sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumPolicy {
    /// Only lines with αₙ > 0.
    #[default]
    SupportOnly,
    /// Also the empty neighbours n_min−1 and n_max+1, which beat against the
    /// edge lines. They share a uniform state and are vacuum otherwise.
    Extended,
}

impl SumPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SumPolicy::SupportOnly => "support-only",
            SumPolicy::Extended => "extended",
        }
    }
}

/// Estimator coefficients of the in-phase comb, indexed by `lines`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdWeights {
    pub lines: Vec<i64>,
    pub amp_weights: Vec<f64>,
    pub phase_weights: Vec<f64>,
    /// |S| (photons/s).
    pub beat_amp: f64,
    /// φ₀ (rad).
    pub beat_phase: f64,
    pub sum_policy: SumPolicy,
}

impl OfdWeights {
    fn position(&self, n: i64) -> Option<usize> {
        self.lines.iter().position(|&m| m == n)
    }

    /// Phase weight of line n, zero if the line is not summed.
    pub fn phase_weight(&self, n: i64) -> f64 {
        self.position(n).map_or(0.0, |i| self.phase_weights[i])
    }

    pub fn amp_weight(&self, n: i64) -> f64 {
        self.position(n).map_or(0.0, |i| self.amp_weights[i])
    }
}

fn summed_lines(env: &CombEnvelope, policy: SumPolicy) -> Vec<i64> {
    match policy {
        SumPolicy::SupportOnly => env.populated().collect(),
        SumPolicy::Extended => (env.n_min() - 1..=env.n_max() + 1)
            .filter(|&n| env.amp(n - 1) + env.amp(n) + env.amp(n + 1) > 0.0)
            .collect(),
    }
}

fn beat_amplitude(env: &CombEnvelope) -> Result<f64> {
    let s: f64 = (env.n_min() + 1..=env.n_max())
        .map(|n| env.amp(n - 1) * env.amp(n))
        .sum();
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::domain(
            "envelope has no pair of adjacent populated lines, so no beat at Ω_r",
        ))
    }
}

/// Amplitude and phase estimator weights of an in-phase comb.
pub fn ofd_weights(env: &CombEnvelope, policy: SumPolicy) -> Result<OfdWeights> {
    let s = beat_amplitude(env)?;
    let norm = std::f64::consts::SQRT_2 * s;
    let lines = summed_lines(env, policy);
    let amp_weights = lines
        .iter()
        .map(|&n| (env.amp(n - 1) + env.amp(n + 1)) / norm)
        .collect();
    let phase_weights = lines
        .iter()
        .map(|&n| (env.amp(n - 1) - env.amp(n + 1)) / norm)
        .collect();
    Ok(OfdWeights {
        lines,
        amp_weights,
        phase_weights,
        beat_amp: s,
        beat_phase: 0.0,
        sum_policy: policy,
    })
}

/// Index range of the quantum state seen by the estimator: the envelope
/// range, widened by one line on each side for the extended policy. The
/// widened lines are vacuum.
pub fn state_range(env: &CombEnvelope, policy: SumPolicy) -> IndexRange {
    match policy {
        SumPolicy::SupportOnly => IndexRange {
            n_min: env.n_min(),
            n_max: env.n_max(),
        },
        SumPolicy::Extended => IndexRange {
            n_min: env.n_min() - 1,
            n_max: env.n_max() + 1,
        },
    }
}

/// Lines that carry `spec`. Under the extended policy a spec with uniform
/// parameters covers the edge lines as well; per-index specs stop at the
/// envelope and leave the edges in vacuum.
fn spec_range(env: &CombEnvelope, spec: &QuantumSpec, policy: SumPolicy) -> IndexRange {
    if policy == SumPolicy::Extended && spec.is_uniform() {
        state_range(env, policy)
    } else {
        IndexRange {
            n_min: env.n_min(),
            n_max: env.n_max(),
        }
    }
}

/// Covariance over `state_range`.
pub fn state_covariance(
    env: &CombEnvelope,
    spec: &QuantumSpec,
    policy: SumPolicy,
) -> Result<CovarianceModel> {
    let inner = spec_range(env, spec, policy);
    let outer = state_range(env, policy);
    let cov = build_covariance(inner, spec)?;
    if inner == outer {
        return Ok(cov);
    }
    CovarianceModel::direct_sum(&[
        CovarianceModel::vacuum(
            Field::Comb,
            IndexRange {
                n_min: outer.n_min,
                n_max: outer.n_min,
            },
        ),
        cov,
        CovarianceModel::vacuum(
            Field::Comb,
            IndexRange {
                n_min: outer.n_max,
                n_max: outer.n_max,
            },
        ),
    ])
}

fn check_spec(env: &CombEnvelope, spec: &QuantumSpec, policy: SumPolicy) -> Result<IndexRange> {
    if spec.mode == Mode::Epr && !env.is_symmetric(1e-12) {
        return Err(Error::domain(
            "EPR-entangled OFD needs a symmetric envelope",
        ));
    }
    spec.validate(IndexRange {
        n_min: env.n_min(),
        n_max: env.n_max(),
    })?;
    Ok(spec_range(env, spec, policy))
}

/// Per-line (2Var q, 2Var p) and pair covariances (2Cov q, 2Cov p) between
/// lines ±k, evaluated from the state parameters directly.
struct LineStats<'a> {
    spec: &'a QuantumSpec,
    range: IndexRange,
}

impl LineStats<'_> {
    fn scaled_var(&self, n: i64) -> (f64, f64) {
        if self.range.contains(n) {
            self.spec.scaled_line_variances(self.range, n)
        } else {
            (1.0, 1.0)
        }
    }

    fn scaled_pair_cov(&self, k: i64) -> (f64, f64) {
        self.spec.scaled_pair_covariances(self.range, k)
    }

    /// Σ over lines of (w_q, w_p)-weighted variances, including EPR pair terms.
    fn variance(&self, lines: &[i64], wq: &[f64], wp: &[f64]) -> f64 {
        let w_at = |w: &[f64], n: i64| lines.iter().position(|&m| m == n).map_or(0.0, |i| w[i]);
        let mut total = 0.0;
        for (i, &n) in lines.iter().enumerate() {
            let (vq, vp) = self.scaled_var(n);
            total += 0.5 * (wq[i] * wq[i] * vq + wp[i] * wp[i] * vp);
            let (cq, cp) = self.scaled_pair_cov(n);
            if cq != 0.0 || cp != 0.0 {
                total += wq[i] * w_at(wq, -n) * cq + wp[i] * w_at(wp, -n) * cp;
            }
        }
        total
    }
}

fn band(env: &CombEnvelope) -> (f64, f64) {
    (0.0, 0.5 * env.omega_rep())
}

fn vacuum_cw_phase_psd(total_flux: f64) -> Result<f64> {
    let cw = CombEnvelope::cw_pair(total_flux)?;
    let w = ofd_weights(&cw, SumPolicy::SupportOnly)?;
    Ok(w.phase_weights.iter().map(|x| 0.5 * x * x).sum())
}

fn estimator_psd(
    env: &CombEnvelope,
    spec: &QuantumSpec,
    policy: SumPolicy,
    quadrature_p: bool,
) -> Result<f64> {
    let range = check_spec(env, spec, policy)?;
    let w = ofd_weights(env, policy)?;
    let zeros = vec![0.0; w.lines.len()];
    let stats = LineStats { spec, range };
    Ok(if quadrature_p {
        stats.variance(&w.lines, &zeros, &w.phase_weights)
    } else {
        stats.variance(&w.lines, &w.amp_weights, &zeros)
    })
}

/// Microwave phase-noise PSD (rad²/Hz), referenced to the two-line CW
/// heterodyne benchmark at the same total flux.
///
/// Vacuum gives (1/4|S|²)Σ(α_{n−1} − α_{n+1})²; intra-line squeezing divides
/// each term by Gₙ; EPR pairing of symmetric envelopes gives
/// (1/2|S|²)Σ_{n≥1}(α_{n−1} − α_{n+1})²/Gₙ.
pub fn phase_noise_psd(
    env: &CombEnvelope,
    spec: &QuantumSpec,
    policy: SumPolicy,
) -> Result<NoiseReport> {
    let value = estimator_psd(env, spec, policy, true)?;
    let reference = vacuum_cw_phase_psd(env.total_flux())?;
    Ok(NoiseReport::new(
        Quantity::MicrowavePhase,
        value,
        "rad^2/Hz",
        reference,
        None,
        band(env),
    ))
}

/// Microwave relative-amplitude-noise PSD (1/Hz).
pub fn amplitude_noise_psd(
    env: &CombEnvelope,
    spec: &QuantumSpec,
    policy: SumPolicy,
) -> Result<NoiseReport> {
    let value = estimator_psd(env, spec, policy, false)?;
    let reference = vacuum_cw_phase_psd(env.total_flux())?;
    Ok(NoiseReport::new(
        Quantity::MicrowaveAmplitude,
        value,
        "1/Hz",
        reference,
        None,
        band(env),
    ))
}

/// R = S̄_φφ / S̄_φφ^cw at equal total flux.
pub fn suppression_ratio(env: &CombEnvelope, spec: &QuantumSpec, policy: SumPolicy) -> Result<f64> {
    Ok(phase_noise_psd(env, spec, policy)?.normalized)
}

/// η: phase PSD with `spec` over the vacuum phase PSD of the same envelope.
pub fn eta_enhancement(env: &CombEnvelope, spec: &QuantumSpec, policy: SumPolicy) -> Result<f64> {
    let enhanced = estimator_psd(env, spec, policy, true)?;
    let vacuum = estimator_psd(env, &QuantumSpec::vacuum(), policy, true)?;
    Ok(enhanced / vacuum)
}

/// Dense oracle weight vector over `state_covariance` for the phase (`true`)
/// or amplitude estimator.
pub fn oracle_weights(
    cov: &CovarianceModel,
    weights: &OfdWeights,
    phase: bool,
) -> Result<Vec<f64>> {
    use crate::states::Quadrature;
    let (quad, w) = if phase {
        (Quadrature::P, &weights.phase_weights)
    } else {
        (Quadrature::Q, &weights.amp_weights)
    };
    cov.weight_vector(
        weights
            .lines
            .iter()
            .zip(w)
            .map(|(&n, &x)| (Field::Comb, n, quad, x)),
    )
}

/// Full (q, p) coefficient table of the estimators for a comb with line phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralWeights {
    pub lines: Vec<i64>,
    pub amp_q: Vec<f64>,
    pub amp_p: Vec<f64>,
    pub phase_q: Vec<f64>,
    pub phase_p: Vec<f64>,
    pub beat_amp: f64,
    pub beat_phase: f64,
}

/// Estimator weights for αₙ = |αₙ|e^{iθₙ}.
///
/// With φ₀ = arg Σ|α_{n−1}||αₙ|e^{i(θₙ−θ_{n−1})}, Δ⁻ = θ_{n−1} + φ₀ and
/// Δ⁺ = θ_{n+1} − φ₀, the weights times √2|S| are
///
/// * amplitude: q·(|α_{n−1}|cos Δ⁻ + |α_{n+1}|cos Δ⁺) + p·(|α_{n−1}|sin Δ⁻ + |α_{n+1}|sin Δ⁺)
/// * phase: q·(|α_{n+1}|sin Δ⁺ − |α_{n−1}|sin Δ⁻) + p·(|α_{n−1}|cos Δ⁻ − |α_{n+1}|cos Δ⁺)
///
/// A common phase on all lines rotates every (q, p) pair by that phase.
pub fn general_phase_estimator_weights(
    env: &PhasedEnvelope,
    policy: SumPolicy,
) -> Result<GeneralWeights> {
    let base = env.base();
    let s_complex: Complex64 = (base.n_min() + 1..=base.n_max())
        .map(|n| {
            Complex64::from_polar(
                base.amp(n - 1) * base.amp(n),
                env.theta(n) - env.theta(n - 1),
            )
        })
        .sum();
    let s = s_complex.norm();
    if !(s > 0.0) {
        return Err(Error::domain(
            "envelope has no pair of adjacent populated lines, so no beat at Ω_r",
        ));
    }
    let phi0 = s_complex.arg();
    let norm = std::f64::consts::SQRT_2 * s;
    let lines = summed_lines(base, policy);
    let mut out = GeneralWeights {
        lines: lines.clone(),
        amp_q: Vec::with_capacity(lines.len()),
        amp_p: Vec::with_capacity(lines.len()),
        phase_q: Vec::with_capacity(lines.len()),
        phase_p: Vec::with_capacity(lines.len()),
        beat_amp: s,
        beat_phase: phi0,
    };
    for &n in &lines {
        let (am, ap) = (base.amp(n - 1), base.amp(n + 1));
        let (dm, dp) = (env.theta(n - 1) + phi0, env.theta(n + 1) - phi0);
        out.amp_q.push((am * dm.cos() + ap * dp.cos()) / norm);
        out.amp_p.push((am * dm.sin() + ap * dp.sin()) / norm);
        out.phase_q.push((ap * dp.sin() - am * dm.sin()) / norm);
        out.phase_p.push((am * dm.cos() - ap * dp.cos()) / norm);
    }
    Ok(out)
}

/// Phase-noise PSD of the general estimator.
pub fn general_phase_noise_psd(
    env: &PhasedEnvelope,
    spec: &QuantumSpec,
    policy: SumPolicy,
) -> Result<NoiseReport> {
    let range = check_spec(env.base(), spec, policy)?;
    let w = general_phase_estimator_weights(env, policy)?;
    let value = LineStats { spec, range }.variance(&w.lines, &w.phase_q, &w.phase_p);
    let reference = vacuum_cw_phase_psd(env.base().total_flux())?;
    Ok(NoiseReport::new(
        Quantity::MicrowavePhase,
        value,
        "rad^2/Hz",
        reference,
        None,
        band(env.base()),
    ))
}

/// Transfer from a reference-laser phase excursion to the microwave phase.
///
/// A reference phase δφ_ref displaces line n by δpₙ = √2αₙ(1 + n/N₀)δφ_ref
/// when the comb is locked with N₀ = ω₀/Ω_r. Feeding that into the phase
/// estimator splits into a common-mode sum, which cancels, and a derivative
/// sum equal to |S|/N₀. Both are accumulated over the same sequence of
/// adjacent-line products so the cancellation is exact in floating point.
pub fn classical_transfer(env: &CombEnvelope, n0: u64) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::domain("N₀ must be at least 1"));
    }
    let s = beat_amplitude(env)?;
    let (mut common_lo, mut common_hi) = (0.0, 0.0);
    let (mut slope_lo, mut slope_hi) = (0.0, 0.0);
    for n in env.indices() {
        let a = env.amp(n);
        let lower = env.amp(n - 1) * a;
        let upper = a * env.amp(n + 1);
        common_lo += lower;
        common_hi += upper;
        slope_lo += n as f64 * lower;
        slope_hi += n as f64 * upper;
    }
    let common = common_lo - common_hi;
    let slope = slope_lo - slope_hi;
    Ok((common + slope / n0 as f64) / s)
}

/// One point of a suppression-ratio sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub shape: Shape,
    pub param: f64,
    pub m_rms: f64,
    pub r: f64,
    pub eta: f64,
    pub policy: SumPolicy,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 || (count == 1 && hi != lo) {
        return Err(Error::domain(format!(
            "bad log grid [{lo}, {hi}] with {count} points"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// R and η over a grid of target RMS modal bandwidths. Flat-top points use
/// the nearest N and report the achieved M_rms. Points are evaluated in
/// parallel and returned in (shape, target) order.
pub fn sweep_suppression(
    shapes: &[Shape],
    targets: &[f64],
    spec: &QuantumSpec,
    policy: SumPolicy,
    total_flux: f64,
) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(Shape, f64)> = shapes
        .iter()
        .flat_map(|&s| targets.iter().map(move |&t| (s, t)))
        .collect();
    jobs.par_iter()
        .map(|&(shape, target)| {
            let sol = solve_shape_param(shape, target)?;
            let env = make_envelope(shape, sol.param, total_flux, None)?;
            Ok(SweepPoint {
                shape,
                param: sol.param,
                m_rms: rms_modal_bandwidth(&env)?,
                r: suppression_ratio(&env, spec, policy)?,
                eta: eta_enhancement(&env, spec, policy)?,
                policy,
            })
        })
        .collect()
}

/// Least-squares slope of ln R against ln M_rms.
pub fn loglog_slope(points: &[SweepPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::domain("slope fit needs at least two points"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.m_rms.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.r.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::numeric("slope fit over a degenerate M_rms grid"));
    }
    Ok(sxy / sxx)
}
