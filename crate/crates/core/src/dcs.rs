//! Dual-comb spectroscopy: balanced multi-heterodyne photocurrent noise,
//! transmittance SNR and the advantage of squeezed or entangled combs.
//!
//! Line n of the signal comb beats with line n of the local oscillator (LO)
//! at the RF tone Ωₙ = Ω₀ + nΔΩ_r. The signal passes a sample that maps
//! âₙ → √κₙ e^{iθₙ} âₙ + √(1−κₙ) v̂ₙ before detection.
//!
//! In the cross-referred frame the photocurrent reads the amplitude
//! quadratures only,
//!
//! δI = √2 q_e Σₙ [√κₙ α_{S,n} δq_{L,n} + α_{L,n}(√κₙ(cos θₙ δq_{S,n} − sin θₙ δp_{S,n}) + √(1−κₙ) δq_{v,n})],
//!
//! while in the self-referred frame the same terms are modulated by cos Ωₙt
//! and sin Ωₙt and the PSD is the time average. With `strong_lo` set, the
//! LO fluctuation terms (weighted by α_S) are dropped.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{make_envelope, CombEnvelope, Shape};
use crate::report::{NoiseReport, Quantity};
use crate::states::{
    build_covariance, CovarianceModel, Field, Frame, IndexRange, Quadrature, QuantumSpec,
};
use crate::{Error, Result, ELEMENTARY_CHARGE};

/// The two combs and the RF tone grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcsSetup {
    pub signal: CombEnvelope,
    pub lo: CombEnvelope,
    /// Ω₀ (rad/s).
    pub omega_offset: f64,
    /// ΔΩ_r (rad/s).
    pub delta_rep: f64,
    pub strong_lo: bool,
}

impl DcsSetup {
    pub fn new(
        signal: CombEnvelope,
        lo: CombEnvelope,
        omega_offset: f64,
        delta_rep: f64,
        strong_lo: bool,
    ) -> Result<Self> {
        let setup = DcsSetup {
            signal,
            lo,
            omega_offset,
            delta_rep,
            strong_lo,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal.n_min() != self.lo.n_min() || self.signal.n_max() != self.lo.n_max() {
            return Err(Error::contract(format!(
                "signal lines {}..={} and LO lines {}..={} differ",
                self.signal.n_min(),
                self.signal.n_max(),
                self.lo.n_min(),
                self.lo.n_max()
            )));
        }
        if !(self.delta_rep > 0.0 && self.delta_rep.is_finite() && self.omega_offset.is_finite()) {
            return Err(Error::domain("ΔΩ_r must be positive and Ω₀ finite"));
        }
        let nyquist = 0.5 * self.signal.omega_rep();
        for n in self.detected_lines() {
            let w = self.tone(n);
            if !(w > 0.0 && w < nyquist) {
                return Err(Error::domain(format!(
                    "RF tone of line {n} at {w:.6e} rad/s lies outside (0, Ω_r/2)"
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self) -> IndexRange {
        IndexRange {
            n_min: self.signal.n_min(),
            n_max: self.signal.n_max(),
        }
    }

    /// Ωₙ = Ω₀ + nΔΩ_r.
    pub fn tone(&self, n: i64) -> f64 {
        self.omega_offset + n as f64 * self.delta_rep
    }

    /// Lines where both combs carry light.
    pub fn detected_lines(&self) -> impl Iterator<Item = i64> + '_ {
        self.range()
            .iter()
            .filter(|&n| self.signal.amp(n) > 0.0 && self.lo.amp(n) > 0.0)
    }

    /// Lowest and highest detected RF tone (rad/s).
    pub fn band(&self) -> (f64, f64) {
        self.detected_lines()
            .map(|n| self.tone(n))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                (lo.min(w), hi.max(w))
            })
    }

    /// Highest |Ωₙ| over all lines of the range.
    pub fn max_tone(&self) -> f64 {
        self.tone(self.range().n_min)
            .abs()
            .max(self.tone(self.range().n_max).abs())
    }
}

/// Per-line transmittance and phase delay of the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub kappas: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl SampleResponse {
    /// κ = 1, θ = 0 on every line.
    pub fn transparent(range: IndexRange) -> Self {
        SampleResponse {
            kappas: vec![1.0; range.len()],
            thetas: vec![0.0; range.len()],
        }
    }

    pub fn validate(&self, range: IndexRange) -> Result<()> {
        if self.kappas.len() != range.len() || self.thetas.len() != range.len() {
            return Err(Error::contract(format!(
                "sample has {}/{} entries for {} lines",
                self.kappas.len(),
                self.thetas.len(),
                range.len()
            )));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            return Err(Error::domain(format!(
                "transmittance must lie in [0, 1], got {k}"
            )));
        }
        if self.thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("sample phases must be finite"));
        }
        Ok(())
    }

    fn at(&self, range: IndexRange, n: i64) -> (f64, f64) {
        range
            .position(n)
            .map_or((1.0, 0.0), |i| (self.kappas[i], self.thetas[i]))
    }
}

/// A single absorbing line m with depth −10 log₁₀ κ_m dB; the rest transparent.
pub fn localized_absorber(range: IndexRange, m: i64, depth_db: f64) -> Result<SampleResponse> {
    let pos = range.position(m).ok_or_else(|| {
        Error::domain(format!(
            "absorber line {m} outside {}..={}",
            range.n_min, range.n_max
        ))
    })?;
    if !(depth_db >= 0.0) {
        return Err(Error::domain(format!(
            "absorption depth must be ≥ 0 dB, got {depth_db}"
        )));
    }
    let mut sample = SampleResponse::transparent(range);
    sample.kappas[pos] = 10f64.powf(-depth_db / 10.0);
    Ok(sample)
}

/// Quantum states of the two combs. Both must use the same frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DcsStates {
    pub signal: QuantumSpec,
    pub lo: QuantumSpec,
}

impl DcsStates {
    /// The same state on both combs.
    pub fn both(spec: QuantumSpec) -> Self {
        DcsStates {
            signal: spec.clone(),
            lo: spec,
        }
    }

    pub fn frame(&self) -> Result<Frame> {
        if self.signal.frame != self.lo.frame {
            return Err(Error::contract(
                "signal and LO states must share a reference frame",
            ));
        }
        Ok(self.signal.frame)
    }

    fn validate(&self, range: IndexRange) -> Result<Frame> {
        self.signal.validate(range)?;
        self.lo.validate(range)?;
        self.frame()
    }
}

/// Closed-form photocurrent PSD (A²/Hz), referenced to the vacuum floor of
/// the same setup with a transparent sample.
///
/// Per line, with (v_q, v_p) twice the quadrature variances of each comb:
///
/// * cross-referred: q_e²[κα_S² v_{q,L} + α_L²(κ(cos²θ v_{q,S} + sin²θ v_{p,S}) + 1 − κ)]
/// * self-referred: (q_e²/2)[κα_S²(v_{q,L} + v_{p,L}) + α_L²(κ(v_{q,S} + v_{p,S}) + 2(1 − κ))]
///
/// EPR-paired combs add, for each pair ±k in the cross-referred frame,
/// 2q_e²[κ̃α_S² c_{q,L} + α_L²κ̃(cos θ₊cos θ₋ c_{q,S} + sin θ₊sin θ₋ c_{p,S})]
/// with κ̃ = √(κ₊κ₋) and c the doubled pair covariances. In the
/// self-referred frame pair correlations beat at Ω_k − Ω_{−k} and average out.
///
/// For squeezing gains this is exactly the closed-form self-referred,
/// cross-referred and EPR pair PSDs.
pub fn photocurrent_psd(
    setup: &DcsSetup,
    states: &DcsStates,
    sample: &SampleResponse,
) -> Result<NoiseReport> {
    let range = setup.range();
    let frame = states.validate(range)?;
    sample.validate(range)?;
    let value = closed_form(setup, states, sample, frame);
    Ok(NoiseReport::new(
        Quantity::Photocurrent,
        value,
        "A^2/Hz",
        sql_psd(setup),
        Some(ELEMENTARY_CHARGE),
        setup.band(),
    ))
}

/// Vacuum photocurrent PSD with a transparent sample:
/// q_e²Σα_L², plus q_e²Σα_S² unless in the strong-LO limit.
pub fn sql_psd(setup: &DcsSetup) -> f64 {
    let q2 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE;
    let lo: f64 = setup.lo.total_flux();
    let sig = if setup.strong_lo {
        0.0
    } else {
        setup.signal.total_flux()
    };
    q2 * (lo + sig)
}

fn closed_form(setup: &DcsSetup, states: &DcsStates, sample: &SampleResponse, frame: Frame) -> f64 {
    let range = setup.range();
    let lo_on = if setup.strong_lo { 0.0 } else { 1.0 };
    let mut total = 0.0;
    for n in range.iter() {
        let (a_s, a_l) = (setup.signal.amp(n), setup.lo.amp(n));
        let (kappa, theta) = sample.at(range, n);
        let (vqs, vps) = states.signal.scaled_line_variances(range, n);
        let (vql, vpl) = states.lo.scaled_line_variances(range, n);
        let lo_term = lo_on * kappa * a_s * a_s;
        total += match frame {
            Frame::CrossReferred => {
                let (c, s) = (theta.cos(), theta.sin());
                lo_term * vql + a_l * a_l * (kappa * (c * c * vqs + s * s * vps) + 1.0 - kappa)
            }
            Frame::SelfReferred => {
                0.5 * (lo_term * (vql + vpl)
                    + a_l * a_l * (kappa * (vqs + vps) + 2.0 * (1.0 - kappa)))
            }
        };
    }
    if frame == Frame::CrossReferred {
        for k in 1..=range.n_max.min(-range.n_min) {
            let (cql, _) = states.lo.scaled_pair_covariances(range, k);
            let (cqs, cps) = states.signal.scaled_pair_covariances(range, k);
            if cql == 0.0 && cqs == 0.0 && cps == 0.0 {
                continue;
            }
            let (kp, tp) = sample.at(range, k);
            let (km, tm) = sample.at(range, -k);
            let kk = (kp * km).sqrt();
            let lo_pair = lo_on * kk * setup.signal.amp(k) * setup.signal.amp(-k);
            let sig_pair = setup.lo.amp(k) * setup.lo.amp(-k) * kk;
            total += 2.0
                * (lo_pair * cql
                    + sig_pair * (tp.cos() * tm.cos() * cqs + tp.sin() * tm.sin() * cps));
        }
    }
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * total
}

/// Photocurrent fluctuation of one line as cos Ωₙt and sin Ωₙt coefficient
/// vectors over the joint covariance (units of q_e√(photons/s)).
#[derive(Clone, Debug, PartialEq)]
pub struct LineWeights {
    pub n: i64,
    /// Ωₙ in the self-referred frame; zero in the cross-referred frame,
    /// where the weights are constant.
    pub omega: f64,
    pub cos: Vec<(usize, f64)>,
    pub sin: Vec<(usize, f64)>,
}

/// Joint covariance of signal, LO and sample-vacuum fields together with the
/// linearized photocurrent weights: the independent route to every DCS PSD.
#[derive(Clone, Debug)]
pub struct PhotocurrentOracle {
    pub frame: Frame,
    pub cov: CovarianceModel,
    pub lines: Vec<LineWeights>,
}

impl PhotocurrentOracle {
    pub fn new(setup: &DcsSetup, states: &DcsStates, sample: &SampleResponse) -> Result<Self> {
        let range = setup.range();
        let frame = states.validate(range)?;
        sample.validate(range)?;
        let cov = CovarianceModel::direct_sum(&[
            build_covariance(range, &states.signal)?.relabel(Field::Signal),
            build_covariance(range, &states.lo)?.relabel(Field::Lo),
            CovarianceModel::vacuum(Field::SampleVacuum, range),
        ])?;
        let q = ELEMENTARY_CHARGE * std::f64::consts::SQRT_2;
        let lo_on = if setup.strong_lo { 0.0 } else { 1.0 };
        let idx = |f, n, quad| cov.index(f, n, quad).expect("mode present by construction");
        let mut lines = Vec::with_capacity(range.len());
        for n in range.iter() {
            let (a_s, a_l) = (setup.signal.amp(n), setup.lo.amp(n));
            let (kappa, theta) = sample.at(range, n);
            let (sk, vk) = (kappa.sqrt(), (1.0 - kappa).sqrt());
            let (qs, ps) = (
                idx(Field::Signal, n, Quadrature::Q),
                idx(Field::Signal, n, Quadrature::P),
            );
            let (ql, pl) = (
                idx(Field::Lo, n, Quadrature::Q),
                idx(Field::Lo, n, Quadrature::P),
            );
            let (qv, pv) = (
                idx(Field::SampleVacuum, n, Quadrature::Q),
                idx(Field::SampleVacuum, n, Quadrature::P),
            );
            let lo_w = q * lo_on * sk * a_s;
            // sample-transformed signal quadratures: q' = √κ(cos θ q − sin θ p) + √(1−κ) q_v,
            // p' = √κ(sin θ q + cos θ p) + √(1−κ) p_v
            let (c, s) = (theta.cos(), theta.sin());
            let q_prime = [(qs, sk * c), (ps, -sk * s), (qv, vk)];
            let p_prime = [(qs, sk * s), (ps, sk * c), (pv, vk)];
            let scale = |terms: &[(usize, f64)], f: f64| {
                terms.iter().map(|&(i, w)| (i, w * f)).collect::<Vec<_>>()
            };
            let mut cos = vec![(ql, lo_w)];
            cos.extend(scale(&q_prime, q * a_l));
            let (omega, sin) = match frame {
                Frame::CrossReferred => (0.0, Vec::new()),
                Frame::SelfReferred => {
                    let mut sin = vec![(pl, lo_w)];
                    sin.extend(scale(&p_prime, -q * a_l));
                    (setup.tone(n), sin)
                }
            };
            lines.push(LineWeights { n, omega, cos, sin });
        }
        Ok(PhotocurrentOracle { frame, cov, lines })
    }

    fn dense(&self, terms: &[&[(usize, f64)]]) -> Vec<f64> {
        let mut w = vec![0.0; self.cov.dim()];
        for part in terms {
            for &(i, x) in *part {
                w[i] += x;
            }
        }
        w
    }

    /// Dense weight vector of the cross-referred photocurrent.
    pub fn cross_weights(&self) -> Vec<f64> {
        let parts: Vec<&[(usize, f64)]> = self.lines.iter().map(|l| l.cos.as_slice()).collect();
        self.dense(&parts)
    }

    /// Dense weight vector at time t: Σₙ (cos Ωₙt Aₙ + sin Ωₙt Bₙ).
    pub fn weights_at(&self, t: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.cov.dim()];
        for line in &self.lines {
            let (s, c) = (line.omega * t).sin_cos();
            for &(i, x) in &line.cos {
                w[i] += c * x;
            }
            for &(i, x) in &line.sin {
                w[i] += s * x;
            }
        }
        w
    }

    /// PSD from the quadratic form: wᵀΣw in the cross-referred frame,
    /// Σₙ ½(AₙᵀΣAₙ + BₙᵀΣBₙ) in the self-referred frame.
    pub fn psd(&self) -> Result<f64> {
        use crate::states::quadratic_form_variance as qf;
        match self.frame {
            Frame::CrossReferred => qf(&self.cov, &self.cross_weights()),
            Frame::SelfReferred => self.lines.iter().try_fold(0.0, |acc, l| {
                let a = qf(&self.cov, &self.dense(&[&l.cos]))?;
                let b = qf(&self.cov, &self.dense(&[&l.sin]))?;
                Ok(acc + 0.5 * (a + b))
            }),
        }
    }
}

/// Mean photocurrent ⟨I(t)⟩ = 2q_e Σ √κₙ α_{S,n}α_{L,n} cos(Ωₙt − θₙ) (A).
pub fn mean_photocurrent(setup: &DcsSetup, sample: &SampleResponse, t: f64) -> f64 {
    let range = setup.range();
    2.0 * ELEMENTARY_CHARGE
        * setup
            .detected_lines()
            .map(|n| {
                let (kappa, theta) = sample.at(range, n);
                kappa.sqrt()
                    * setup.signal.amp(n)
                    * setup.lo.amp(n)
                    * (setup.tone(n) * t - theta).cos()
            })
            .sum::<f64>()
}

fn check_demodulation(setup: &DcsSetup, m: i64, duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::domain(format!(
            "integration time must be positive, got {duration}"
        )));
    }
    if !setup.range().contains(m) {
        return Err(Error::domain(format!("line {m} outside the comb")));
    }
    let tone_period = 2.0 * std::f64::consts::PI / setup.delta_rep;
    if duration < 10.0 * tone_period {
        warn!("T = {duration:e} s is not much longer than 2π/ΔΩ_r = {tone_period:e} s; tones are not orthogonal");
    }
    if setup.tone(m).abs() * duration < 10.0 {
        warn!(
            "Ω_m·T = {:e} is not ≫ 1; the 2Ω_m term does not average out",
            setup.tone(m) * duration
        );
    }
    Ok(())
}

/// Power SNR of the transmittance estimate at line m after integrating for
/// `duration` seconds: κ_m q_e²α_{S,m}²α_{L,m}² T / (2 S̄_II).
pub fn transmittance_snr(
    setup: &DcsSetup,
    sample: &SampleResponse,
    psd: &NoiseReport,
    m: i64,
    duration: f64,
) -> Result<f64> {
    check_demodulation(setup, m, duration)?;
    sample.validate(setup.range())?;
    let (kappa, _) = sample.at(setup.range(), m);
    let (a_s, a_l) = (setup.signal.amp(m), setup.lo.amp(m));
    let q2 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE;
    Ok(kappa * q2 * a_s * a_s * a_l * a_l * duration / (2.0 * psd.value))
}

/// Var(κ̂_m) = κ_m/(q_e²α_{S,m}²α_{L,m}²) · 2S̄_II/T.
pub fn kappa_variance(
    setup: &DcsSetup,
    sample: &SampleResponse,
    psd: &NoiseReport,
    m: i64,
    duration: f64,
) -> Result<f64> {
    check_demodulation(setup, m, duration)?;
    sample.validate(setup.range())?;
    let (kappa, _) = sample.at(setup.range(), m);
    let (a_s, a_l) = (setup.signal.amp(m), setup.lo.amp(m));
    let q2 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE;
    Ok(kappa / (q2 * a_s * a_s * a_l * a_l) * 2.0 * psd.value / duration)
}

/// Enhancement strategy of an advantage curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Cross-referred intra-line squeezing of both combs.
    IntraCross,
    /// EPR pairing of ±n lines in both combs.
    Epr,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::IntraCross, Strategy::Epr];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::IntraCross => "intra-cross",
            Strategy::Epr => "epr",
        }
    }
}

/// Flat-top combs of 2N+1 lines, uniform gain G on both combs, θ = 0, one
/// absorbing line at +1 with transmittance κ. Returns the G = 1 PSD over the
/// enhanced PSD, both in units of q_e².
pub fn advantage_factor(
    n_pairs: u32,
    kappa: f64,
    g: f64,
    alpha_s: f64,
    alpha_l: f64,
    strategy: Strategy,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::domain("the absorbed line needs N ≥ 1"));
    }
    if !(g >= 1.0 && g.is_finite()) {
        return Err(Error::domain(format!("gain must be ≥ 1, got {g}")));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::domain(format!(
            "transmittance must lie in [0, 1], got {kappa}"
        )));
    }
    let n2 = 2.0 * n_pairs as f64;
    let (s2, l2) = (alpha_s * alpha_s, alpha_l * alpha_l);
    let baseline = (n2 + kappa) * s2 + (n2 + 1.0) * l2;
    let squeezed = s2 / g + l2 / g;
    let enhanced = match strategy {
        Strategy::IntraCross => (n2 + kappa) * squeezed + (1.0 - kappa) * l2,
        Strategy::Epr => {
            let rk = kappa.sqrt();
            0.5 * (2.0 * n2 - 2.0 + (1.0 + rk).powi(2)) * squeezed
                + 0.5 * (1.0 - rk).powi(2) * (s2 * g + l2 * g)
                + (1.0 - kappa) * l2
        }
    };
    Ok(baseline / enhanced)
}

/// One point of an advantage curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRow {
    pub depth_db: f64,
    pub strategy: Strategy,
    /// Intact-to-absorbed line ratio 2N.
    pub ratio: u32,
    pub g_db: f64,
    pub advantage_db: f64,
}

/// Advantage in dB over a grid of absorption depths (∞ means κ = 0).
pub fn advantage_curve(
    n_pairs: u32,
    depths_db: &[f64],
    g: f64,
    alpha_s: f64,
    alpha_l: f64,
    strategy: Strategy,
) -> Result<Vec<AdvantageRow>> {
    depths_db
        .par_iter()
        .map(|&depth_db| {
            if !(depth_db >= 0.0) {
                return Err(Error::domain(format!(
                    "absorption depth must be ≥ 0 dB, got {depth_db}"
                )));
            }
            let kappa = 10f64.powf(-depth_db / 10.0);
            let a = advantage_factor(n_pairs, kappa, g, alpha_s, alpha_l, strategy)?;
            Ok(AdvantageRow {
                depth_db,
                strategy,
                ratio: 2 * n_pairs,
                g_db: 10.0 * g.log10(),
                advantage_db: 10.0 * a.log10(),
            })
        })
        .collect()
}

/// Flat-top signal and LO combs of 2N+1 lines with the given per-line
/// amplitudes, on a tone grid Ω₀ = (N+1)ΔΩ_r that keeps every tone positive.
pub fn flattop_setup(
    n_pairs: u32,
    alpha_s: f64,
    alpha_l: f64,
    delta_rep: f64,
    strong_lo: bool,
) -> Result<DcsSetup> {
    let lines = 2 * n_pairs as usize + 1;
    let signal = make_envelope(
        Shape::Flattop,
        n_pairs as f64,
        alpha_s * alpha_s * lines as f64,
        None,
    )?;
    let lo = make_envelope(
        Shape::Flattop,
        n_pairs as f64,
        alpha_l * alpha_l * lines as f64,
        None,
    )?;
    DcsSetup::new(
        signal,
        lo,
        (n_pairs as f64 + 1.0) * delta_rep,
        delta_rep,
        strong_lo,
    )
}
