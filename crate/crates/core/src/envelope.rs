//! Classical comb envelopes.
//!
//! A [`CombEnvelope`] stores real, non-negative line amplitudes αₙ (in
//! √(photons/s)) over a contiguous index range together with the optical
//! grid (ω₀, Ω_r). Three archetypal families can be generated with
//! [`make_envelope`]:
//!
//! | shape      | αₙ                       | parameter |
//! |------------|--------------------------|-----------|
//! | `gaussian` | A·exp(−n²/4σ²)           | σ         |
//! | `sech`     | A·sech(n/Δ)              | Δ         |
//! | `flattop`  | α for \|n\| ≤ N, else 0  | N (integer) |
//!
//! The smooth families have infinite support. They are truncated at the
//! smallest cutoff whose discarded tail carries less than [`TAIL_TOLERANCE`]
//! of the retained flux, then renormalized to the requested total flux.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Relative tail flux discarded by the automatic cutoff of smooth envelopes.
pub const TAIL_TOLERANCE: f64 = 1e-13;

/// Largest relative tail flux accepted for a caller-supplied cutoff.
pub const MAX_TAIL_FRACTION: f64 = 1e-12;

/// Carrier used when no optical grid is given: 1550 nm.
pub const DEFAULT_OMEGA0: f64 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1550e-9;

/// Repetition rate used when no optical grid is given: 2π × 1 GHz.
pub const DEFAULT_OMEGA_REP: f64 = 2.0 * std::f64::consts::PI * 1e9;

const MAX_AUTO_CUTOFF: i64 = 50_000_000;

/// Envelope family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Gaussian,
    Sech,
    Flattop,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Gaussian, Shape::Sech, Shape::Flattop];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Gaussian => "gaussian",
            Shape::Sech => "sech",
            Shape::Flattop => "flattop",
        }
    }

    /// Unnormalized amplitude profile of a smooth family.
    fn profile(self, param: f64, n: i64) -> f64 {
        let x = n.unsigned_abs() as f64;
        match self {
            Shape::Gaussian => (-x * x / (4.0 * param * param)).exp(),
            Shape::Sech => 1.0 / (x / param).cosh(),
            Shape::Flattop => {
                if x <= param {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Upper bound on Σ_{|n|>cut} profile(n)² for the smooth families.
    fn tail_bound(self, param: f64, cut: i64) -> f64 {
        let next = self.profile(param, cut + 1);
        let next_sq = next * next;
        if next_sq == 0.0 {
            return 0.0;
        }
        // Successive power ratios fₙ₊₁²/fₙ² are decreasing for the Gaussian
        // and increase towards exp(−2/Δ) for the sech, so a geometric series
        // with the worst ratio bounds each one-sided tail.
        let ratio = match self {
            Shape::Gaussian => (-(2.0 * (cut + 1) as f64 + 1.0) / (2.0 * param * param)).exp(),
            Shape::Sech => (-2.0 / param).exp(),
            Shape::Flattop => 0.0,
        };
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        2.0 * next_sq / (1.0 - ratio)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Shape::Gaussian),
            "sech" => Ok(Shape::Sech),
            "flattop" | "flat-top" => Ok(Shape::Flattop),
            other => Err(Error::domain(format!("unknown envelope shape `{other}`"))),
        }
    }
}

/// Real comb envelope: line amplitudes over `n_min..=n_max` plus the optical grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvelopeRecord", into = "EnvelopeRecord")]
pub struct CombEnvelope {
    shape: Option<Shape>,
    param: Option<f64>,
    n_min: i64,
    amps: Vec<f64>,
    omega0: f64,
    omega_rep: f64,
}

/// JSON layout of an envelope.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct EnvelopeRecord {
    shape: Option<Shape>,
    param: Option<f64>,
    n_min: i64,
    n_max: i64,
    omega0: f64,
    omega_rep: f64,
    amps: Vec<f64>,
}

impl TryFrom<EnvelopeRecord> for CombEnvelope {
    type Error = Error;

    fn try_from(rec: EnvelopeRecord) -> Result<Self> {
        if rec.n_max - rec.n_min + 1 != rec.amps.len() as i64 {
            return Err(Error::contract(format!(
                "n_min={} n_max={} inconsistent with {} amplitudes",
                rec.n_min,
                rec.n_max,
                rec.amps.len()
            )));
        }
        let mut env = CombEnvelope::from_amplitudes(rec.n_min, rec.amps)?
            .with_grid(rec.omega0, rec.omega_rep)?;
        env.shape = rec.shape;
        env.param = rec.param;
        Ok(env)
    }
}

impl From<CombEnvelope> for EnvelopeRecord {
    fn from(env: CombEnvelope) -> Self {
        EnvelopeRecord {
            shape: env.shape,
            param: env.param,
            n_min: env.n_min,
            n_max: env.n_max(),
            omega0: env.omega0,
            omega_rep: env.omega_rep,
            amps: env.amps,
        }
    }
}

impl CombEnvelope {
    /// Raw-amplitude constructor. Amplitudes must be finite, non-negative and
    /// carry positive total flux.
    pub fn from_amplitudes(n_min: i64, amps: Vec<f64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::domain("envelope needs at least one line"));
        }
        if let Some(bad) = amps.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::domain(format!(
                "line amplitudes must be finite and non-negative, got {bad}"
            )));
        }
        let env = CombEnvelope {
            shape: None,
            param: None,
            n_min,
            amps,
            omega0: DEFAULT_OMEGA0,
            omega_rep: DEFAULT_OMEGA_REP,
        };
        let flux = env.total_flux();
        if !(flux > 0.0 && flux.is_finite()) {
            return Err(Error::domain(
                "envelope total flux must be finite and positive",
            ));
        }
        Ok(env)
    }

    /// Two equal CW lines at n ∈ {−1, 0} sharing `total_flux`: the heterodyne benchmark.
    pub fn cw_pair(total_flux: f64) -> Result<Self> {
        if !(total_flux > 0.0 && total_flux.is_finite()) {
            return Err(Error::domain("total flux must be positive"));
        }
        let a = (total_flux / 2.0).sqrt();
        Self::from_amplitudes(-1, vec![a, a])
    }

    /// Replace the optical grid (rad/s).
    pub fn with_grid(mut self, omega0: f64, omega_rep: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite() && omega_rep > 0.0 && omega_rep.is_finite()) {
            return Err(Error::domain("ω₀ and Ω_r must be positive and finite"));
        }
        self.omega0 = omega0;
        self.omega_rep = omega_rep;
        Ok(self)
    }

    /// The same envelope rescaled to a new total flux.
    pub fn scaled_to_flux(&self, total_flux: f64) -> Result<Self> {
        if !(total_flux > 0.0 && total_flux.is_finite()) {
            return Err(Error::domain("total flux must be positive"));
        }
        let k = (total_flux / self.total_flux()).sqrt();
        let mut out = self.clone();
        out.amps.iter_mut().for_each(|a| *a *= k);
        Ok(out)
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    pub fn param(&self) -> Option<f64> {
        self.param
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.amps.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega_rep(&self) -> f64 {
        self.omega_rep
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        self.n_min..=self.n_max()
    }

    /// αₙ, zero outside the stored range.
    pub fn amp(&self, n: i64) -> f64 {
        if n < self.n_min {
            return 0.0;
        }
        self.amps
            .get((n - self.n_min) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// (n, αₙ) for every stored line.
    pub fn lines(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.amps
            .iter()
            .enumerate()
            .map(move |(i, &a)| (self.n_min + i as i64, a))
    }

    /// Indices with a nonzero amplitude.
    pub fn populated(&self) -> impl Iterator<Item = i64> + '_ {
        self.lines().filter(|(_, a)| *a > 0.0).map(|(n, _)| n)
    }

    /// N_tot = Σ αₙ².
    pub fn total_flux(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// αₙ = α₋ₙ on the union of both index ranges, to a relative tolerance.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let reach = self.n_min.abs().max(self.n_max().abs());
        let scale = self.amps.iter().cloned().fold(0.0, f64::max);
        (1..=reach).all(|n| (self.amp(n) - self.amp(-n)).abs() <= rel_tol * scale)
    }
}

/// Build an archetypal envelope normalized to `total_flux` photons/s.
///
/// `n_cut` fixes the index range to `−n_cut..=n_cut` for the smooth families;
/// it is rejected if the discarded tail would exceed [`MAX_TAIL_FRACTION`].
/// With `None` the cutoff is chosen automatically. For `flattop`, `param` is
/// the integer half-width N and `n_cut` (when given) must be at least N.
pub fn make_envelope(
    shape: Shape,
    param: f64,
    total_flux: f64,
    n_cut: Option<i64>,
) -> Result<CombEnvelope> {
    if !(param > 0.0 && param.is_finite()) {
        return Err(Error::domain(format!(
            "shape parameter must be positive, got {param}"
        )));
    }
    if !(total_flux > 0.0 && total_flux.is_finite()) {
        return Err(Error::domain(format!(
            "total flux must be positive, got {total_flux}"
        )));
    }
    if let Some(c) = n_cut {
        if c < 0 {
            return Err(Error::domain("n_cut must be non-negative"));
        }
    }

    let (cut, profile): (i64, Vec<f64>) = match shape {
        Shape::Flattop => {
            if param.fract() != 0.0 {
                return Err(Error::domain(format!(
                    "flat-top half-width must be an integer, got {param}"
                )));
            }
            let half = param as i64;
            if let Some(c) = n_cut {
                if c < half {
                    return Err(Error::domain(format!(
                        "n_cut={c} truncates a flat-top of half-width {half}"
                    )));
                }
            }
            (half, vec![1.0; (2 * half + 1) as usize])
        }
        Shape::Gaussian | Shape::Sech => {
            let cut = match n_cut {
                Some(c) => {
                    let core: f64 = (-c..=c).map(|n| shape.profile(param, n).powi(2)).sum();
                    let tail = shape.tail_bound(param, c);
                    if tail > MAX_TAIL_FRACTION * core {
                        return Err(Error::domain(format!(
                            "n_cut={c} drops a tail flux fraction of up to {:.3e}",
                            tail / core
                        )));
                    }
                    c
                }
                None => auto_cutoff(shape, param)?,
            };
            (cut, (-cut..=cut).map(|n| shape.profile(param, n)).collect())
        }
    };

    let norm: f64 = profile.iter().map(|f| f * f).sum();
    let scale = (total_flux / norm).sqrt();
    let amps = profile.into_iter().map(|f| f * scale).collect();
    let mut env = CombEnvelope::from_amplitudes(-cut, amps)?;
    env.shape = Some(shape);
    env.param = Some(param);
    Ok(env)
}

fn auto_cutoff(shape: Shape, param: f64) -> Result<i64> {
    let mut core = shape.profile(param, 0).powi(2);
    let mut cut = 0;
    while cut < MAX_AUTO_CUTOFF {
        cut += 1;
        core += 2.0 * shape.profile(param, cut).powi(2);
        if shape.tail_bound(param, cut) <= TAIL_TOLERANCE * core {
            return Ok(cut);
        }
    }
    Err(Error::numeric(format!(
        "{shape} envelope with parameter {param} needs more than {MAX_AUTO_CUTOFF} lines"
    )))
}

/// RMS modal bandwidth M_rms = √(Σ n²αₙ² / Σ αₙ²).
pub fn rms_modal_bandwidth(env: &CombEnvelope) -> Result<f64> {
    let flux = env.total_flux();
    if !(flux > 0.0) {
        return Err(Error::domain(
            "RMS modal bandwidth of an envelope with zero flux",
        ));
    }
    let second: f64 = env.lines().map(|(n, a)| (n * n) as f64 * a * a).sum();
    Ok((second / flux).sqrt())
}

/// Result of inverting M_rms for a shape parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSolution {
    pub shape: Shape,
    pub param: f64,
    /// M_rms actually realized by `param` (differs from the target for flat-tops).
    pub achieved: f64,
}

/// Find the shape parameter whose envelope has RMS modal bandwidth `target`.
///
/// Smooth families are inverted by bisection on the monotone map
/// param ↦ M_rms. The flat-top family is discrete, M_rms(N) = √(N(N+1)/3),
/// so the half-width N ≥ 1 whose M_rms is nearest the target is returned.
pub fn solve_shape_param(shape: Shape, target: f64) -> Result<ShapeSolution> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::domain(format!(
            "M_rms target must be positive, got {target}"
        )));
    }
    let m_rms =
        |p: f64| -> Result<f64> { rms_modal_bandwidth(&make_envelope(shape, p, 1.0, None)?) };

    match shape {
        Shape::Flattop => {
            let continuous = (-1.0 + (1.0 + 12.0 * target * target).sqrt()) / 2.0;
            let lo = continuous.floor().max(1.0);
            let hi = continuous.ceil().max(1.0);
            let mut best = (lo, m_rms(lo)?);
            if hi != lo {
                let cand = (hi, m_rms(hi)?);
                if (cand.1 - target).abs() < (best.1 - target).abs() {
                    best = cand;
                }
            }
            Ok(ShapeSolution {
                shape,
                param: best.0,
                achieved: best.1,
            })
        }
        Shape::Gaussian | Shape::Sech => {
            let mut lo = 1e-3;
            let mut hi = 2.0 * target.max(1.0);
            while m_rms(hi)? < target {
                hi *= 2.0;
                if hi > 1e8 {
                    return Err(Error::numeric(format!(
                        "no bracket for {shape} M_rms target {target}"
                    )));
                }
            }
            if m_rms(lo)? > target {
                return Err(Error::numeric(format!(
                    "no bracket for {shape} M_rms target {target}"
                )));
            }
            for _ in 0..200 {
                if hi - lo <= 1e-12 * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if m_rms(mid)? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let param = 0.5 * (lo + hi);
            Ok(ShapeSolution {
                shape,
                param,
                achieved: m_rms(param)?,
            })
        }
    }
}

/// An envelope with per-line phases θₙ (αₙ → |αₙ|e^{iθₙ}).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasedEnvelope {
    base: CombEnvelope,
    thetas: Vec<f64>,
}

impl PhasedEnvelope {
    pub fn new(base: CombEnvelope, thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() != base.len() {
            return Err(Error::contract(format!(
                "{} phases for {} lines",
                thetas.len(),
                base.len()
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("line phases must be finite"));
        }
        Ok(PhasedEnvelope { base, thetas })
    }

    /// All θₙ = 0.
    pub fn in_phase(base: CombEnvelope) -> Self {
        let thetas = vec![0.0; base.len()];
        PhasedEnvelope { base, thetas }
    }

    pub fn base(&self) -> &CombEnvelope {
        &self.base
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// θₙ, zero outside the stored range (those lines carry no amplitude).
    pub fn theta(&self, n: i64) -> f64 {
        if n < self.base.n_min() {
            return 0.0;
        }
        self.thetas
            .get((n - self.base.n_min()) as usize)
            .copied()
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flattop_three_lines() {
        let env = make_envelope(Shape::Flattop, 1.0, 3.0, None).unwrap();
        assert_eq!(env.n_min(), -1);
        assert_eq!(env.amps(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn gaussian_neighbour_ratio() {
        for sigma in [0.7, 2.0, 16.67] {
            let env = make_envelope(Shape::Gaussian, sigma, 1.0, None).unwrap();
            let expected = (-1.0 / (4.0 * sigma * sigma)).exp();
            assert_relative_eq!(env.amp(1) / env.amp(0), expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn sech_neighbour_ratio() {
        let env = make_envelope(Shape::Sech, 1.0, 1.0, None).unwrap();
        assert_relative_eq!(
            env.amp(1) / env.amp(0),
            0.648_054_273_663_885_4,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            make_envelope(Shape::Gaussian, 0.0, 1.0, None),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            make_envelope(Shape::Sech, -1.0, 1.0, None),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            make_envelope(Shape::Sech, 1.0, 0.0, None),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            make_envelope(Shape::Flattop, 2.5, 1.0, None),
            Err(Error::Domain(_))
        ));
        // a three-line cut leaves far too much of a σ=5 Gaussian behind
        assert!(matches!(
            make_envelope(Shape::Gaussian, 5.0, 1.0, Some(3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn explicit_cutoff_is_honoured() {
        let env = make_envelope(Shape::Gaussian, 2.0, 1.0, Some(40)).unwrap();
        assert_eq!((env.n_min(), env.n_max()), (-40, 40));
    }

    #[test]
    fn rms_bandwidth_examples() {
        let single = CombEnvelope::from_amplitudes(0, vec![2.0]).unwrap();
        assert_eq!(rms_modal_bandwidth(&single).unwrap(), 0.0);

        let flat = make_envelope(Shape::Flattop, 1.0, 3.0, None).unwrap();
        assert_relative_eq!(
            rms_modal_bandwidth(&flat).unwrap(),
            (2.0f64 / 3.0).sqrt(),
            max_relative = 1e-15
        );

        let pair = CombEnvelope::cw_pair(1.0).unwrap();
        assert_relative_eq!(
            rms_modal_bandwidth(&pair).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_flux_is_rejected() {
        assert!(CombEnvelope::from_amplitudes(0, vec![0.0, 0.0]).is_err());
        assert!(CombEnvelope::from_amplitudes(0, vec![1.0, f64::NAN]).is_err());
        assert!(CombEnvelope::from_amplitudes(0, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn flattop_inversion() {
        let sol = solve_shape_param(Shape::Flattop, (2.0f64 / 3.0).sqrt()).unwrap();
        assert_eq!(sol.param, 1.0);
        // between N=3 (√4=2) and N=4 (√(20/3)≈2.58): 2.2 is nearer to 2
        let sol = solve_shape_param(Shape::Flattop, 2.2).unwrap();
        assert_eq!(sol.param, 3.0);
        assert_relative_eq!(sol.achieved, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_inversion_large_sigma() {
        let sol = solve_shape_param(Shape::Gaussian, 20.0).unwrap();
        assert!((sol.param - 20.0).abs() < 0.2, "σ = {}", sol.param);
        assert_relative_eq!(sol.achieved, 20.0, max_relative = 1e-6);
    }

    #[test]
    fn tiny_target_gives_minimal_parameter() {
        for shape in Shape::ALL {
            let sol = solve_shape_param(shape, 1e-6).unwrap();
            let env = make_envelope(shape, sol.param, 1.0, None).unwrap();
            // essentially all flux sits on the central line
            if shape != Shape::Flattop {
                assert!(env.amp(0).powi(2) > 1.0 - 1e-9);
            } else {
                assert_eq!(sol.param, 1.0);
            }
        }
        assert!(matches!(
            solve_shape_param(Shape::Sech, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let env = make_envelope(Shape::Sech, 3.0, 5.0, None).unwrap();
        let text = serde_json::to_string(&env).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "shape",
            "param",
            "n_min",
            "n_max",
            "omega0",
            "omega_rep",
            "amps",
        ] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let back: CombEnvelope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, env);

        let bad = r#"{"shape":null,"param":null,"n_min":0,"n_max":3,"omega0":1.0,"omega_rep":1.0,"amps":[1.0]}"#;
        assert!(serde_json::from_str::<CombEnvelope>(bad).is_err());
    }

    #[test]
    fn phased_envelope_checks_length() {
        let env = make_envelope(Shape::Flattop, 2.0, 1.0, None).unwrap();
        assert!(PhasedEnvelope::new(env.clone(), vec![0.0; 4]).is_err());
        let phased = PhasedEnvelope::new(env, vec![0.1; 5]).unwrap();
        assert_eq!(phased.theta(2), 0.1);
        assert_eq!(phased.theta(7), 0.0);
    }
}
