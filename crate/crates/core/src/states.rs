//! Per-line Gaussian quantum states and the covariance oracle.
//!
//! Quadratures follow δq = (δa + δa†)/√2 and δp = (δa − δa†)/(i√2). All
//! covariance entries are symmetrized PSDs, frequency independent within
//! |Ω| ≤ Ω_r/2, with vacuum at 1/2 on the diagonal.
//!
//! Three line states are supported:
//!
//! * vacuum;
//! * intra-line squeezing with gain Gₙ: the squeezed quadrature drops to
//!   1/(2Gₙ) and its conjugate rises to Gₙ/2, oriented by [`Orientation`];
//! * EPR pairing of lines ±n with gain Gₙ: Q⁺ = (qₙ+q₋ₙ)/√2 and
//!   P⁻ = (pₙ−p₋ₙ)/√2 drop to 1/(2Gₙ), Q⁻ and P⁺ rise to Gₙ/2. Line 0 is
//!   single-mode squeezed with its own gain.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Contiguous line index range `n_min..=n_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexRange {
    pub n_min: i64,
    pub n_max: i64,
}

impl IndexRange {
    pub fn new(n_min: i64, n_max: i64) -> Result<Self> {
        if n_max < n_min {
            return Err(Error::contract(format!(
                "empty index range {n_min}..={n_max}"
            )));
        }
        Ok(IndexRange { n_min, n_max })
    }

    /// `−half..=half`.
    pub fn symmetric(half: i64) -> Self {
        IndexRange {
            n_min: -half,
            n_max: half,
        }
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_min == -self.n_max
    }

    pub fn position(&self, n: i64) -> Option<usize> {
        self.contains(n).then(|| (n - self.n_min) as usize)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<i64> {
        self.n_min..=self.n_max
    }
}

/// Frame in which quadratures are defined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Relative to each comb's own carriers.
    #[default]
    #[serde(rename = "self")]
    SelfReferred,
    /// Co-rotating with the other comb's carriers at the beat frequencies.
    #[serde(rename = "cross")]
    CrossReferred,
}

/// Which quadrature an intra-line squeezer reduces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// p squeezed: the preset for frequency division.
    #[default]
    Phase,
    /// q squeezed: the preset for dual-comb detection.
    Amplitude,
}

impl Orientation {
    pub const OFD: Orientation = Orientation::Phase;
    pub const DCS: Orientation = Orientation::Amplitude;

    /// (2·Var q, 2·Var p) of a single-mode squeezed state with gain `g`.
    pub fn scaled_variances(self, g: f64) -> (f64, f64) {
        match self {
            Orientation::Phase => (g, 1.0 / g),
            Orientation::Amplitude => (1.0 / g, g),
        }
    }
}

/// Kind of per-line state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Vacuum,
    Intra,
    Epr,
}

/// A value that is either shared by all lines or given per index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLine {
    Uniform(f64),
    PerIndex(Vec<f64>),
}

impl Default for PerLine {
    fn default() -> Self {
        PerLine::Uniform(1.0)
    }
}

impl PerLine {
    fn get(&self, pos: usize) -> Option<f64> {
        match self {
            PerLine::Uniform(v) => Some(*v),
            PerLine::PerIndex(v) => v.get(pos).copied(),
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            PerLine::Uniform(v) => Box::new(std::iter::once(*v)),
            PerLine::PerIndex(v) => Box::new(v.iter().copied()),
        }
    }

    fn check_len(&self, expected: usize, what: &str) -> Result<()> {
        match self {
            PerLine::PerIndex(v) if v.len() != expected => Err(Error::contract(format!(
                "{what}: expected {expected} values, got {}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Additive classical quadrature noise (white PSDs, per line).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalNoise {
    pub s_qq: PerLine,
    pub s_pp: PerLine,
}

/// Description of the Gaussian state of every comb line.
///
/// `gains` is indexed by line (`n_min..=n_max`) for [`Mode::Intra`] and by
/// pair index (0 for the central line, then 1..=N) for [`Mode::Epr`].
/// Gains are ignored for [`Mode::Vacuum`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantumSpec {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default)]
    pub gains: PerLine,
    #[serde(default)]
    pub classical: Option<ClassicalNoise>,
}

impl QuantumSpec {
    pub fn vacuum() -> Self {
        QuantumSpec::default()
    }

    pub fn intra(gains: PerLine, orientation: Orientation) -> Self {
        QuantumSpec {
            mode: Mode::Intra,
            orientation,
            gains,
            ..Default::default()
        }
    }

    pub fn epr(gains: PerLine, orientation: Orientation) -> Self {
        QuantumSpec {
            mode: Mode::Epr,
            orientation,
            gains,
            ..Default::default()
        }
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_classical(mut self, classical: ClassicalNoise) -> Self {
        self.classical = Some(classical);
        self
    }

    /// True when every line carries the same parameters.
    pub fn is_uniform(&self) -> bool {
        let uniform = |p: &PerLine| matches!(p, PerLine::Uniform(_));
        uniform(&self.gains)
            && self
                .classical
                .as_ref()
                .is_none_or(|c| uniform(&c.s_qq) && uniform(&c.s_pp))
    }

    /// Check gains and classical additions against an index range.
    pub fn validate(&self, range: IndexRange) -> Result<()> {
        match self.mode {
            Mode::Vacuum => {}
            Mode::Intra => self.gains.check_len(range.len(), "intra-line gains")?,
            Mode::Epr => {
                if !range.is_symmetric() {
                    return Err(Error::domain(format!(
                        "EPR pairing needs a symmetric index range, got {}..={}",
                        range.n_min, range.n_max
                    )));
                }
                self.gains
                    .check_len(range.n_max as usize + 1, "EPR pair gains")?;
            }
        }
        if self.mode != Mode::Vacuum {
            if let Some(g) = self.gains.values().find(|g| !(*g >= 1.0 && g.is_finite())) {
                return Err(Error::domain(format!(
                    "squeezing gains must be ≥ 1, got {g}"
                )));
            }
        }
        if let Some(cl) = &self.classical {
            cl.s_qq.check_len(range.len(), "classical S_qq")?;
            cl.s_pp.check_len(range.len(), "classical S_pp")?;
            if let Some(v) = cl
                .s_qq
                .values()
                .chain(cl.s_pp.values())
                .find(|v| !(*v >= 0.0 && v.is_finite()))
            {
                return Err(Error::domain(format!(
                    "classical noise PSDs must be ≥ 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Gain acting on line `n` (single-mode for intra, pair gain for EPR).
    pub fn gain(&self, range: IndexRange, n: i64) -> f64 {
        match self.mode {
            Mode::Vacuum => 1.0,
            Mode::Intra => range
                .position(n)
                .and_then(|p| self.gains.get(p))
                .unwrap_or(1.0),
            Mode::Epr => self.gains.get(n.unsigned_abs() as usize).unwrap_or(1.0),
        }
    }

    /// Classical (S_qq, S_pp) additions on line `n`.
    pub fn classical_at(&self, range: IndexRange, n: i64) -> (f64, f64) {
        match (&self.classical, range.position(n)) {
            (Some(cl), Some(p)) => (cl.s_qq.get(p).unwrap_or(0.0), cl.s_pp.get(p).unwrap_or(0.0)),
            _ => (0.0, 0.0),
        }
    }

    /// (2·Var q, 2·Var p) of line `n` in isolation, classical additions
    /// included. For EPR lines this is the reduced single-line state.
    pub fn scaled_line_variances(&self, range: IndexRange, n: i64) -> (f64, f64) {
        let g = self.gain(range, n);
        let (vq, vp) = match self.mode {
            Mode::Vacuum => (1.0, 1.0),
            Mode::Intra => self.orientation.scaled_variances(g),
            Mode::Epr if n == 0 => self.orientation.scaled_variances(g),
            Mode::Epr => {
                let v = 0.5 * (g + 1.0 / g);
                (v, v)
            }
        };
        let (cq, cp) = self.classical_at(range, n);
        (vq + 2.0 * cq, vp + 2.0 * cp)
    }

    /// (2·Cov(q_k, q_−k), 2·Cov(p_k, p_−k)) for pair index k ≥ 1; zero
    /// unless the lines are EPR paired.
    pub fn scaled_pair_covariances(&self, range: IndexRange, k: i64) -> (f64, f64) {
        if self.mode != Mode::Epr || k <= 0 || !range.contains(k) || !range.contains(-k) {
            return (0.0, 0.0);
        }
        let g = self.gain(range, k);
        let c = 0.5 * (g - 1.0 / g);
        (-c, c)
    }
}

/// Optical field a quadrature belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Comb,
    Signal,
    Lo,
    SampleVacuum,
}

impl Field {
    fn tag(self) -> &'static str {
        match self {
            Field::Comb => "",
            Field::Signal => "S:",
            Field::Lo => "L:",
            Field::SampleVacuum => "V:",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    Q,
    P,
}

/// A comb line of a given field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeKey {
    pub field: Field,
    pub n: i64,
}

/// Quadrature covariance over a set of modes, basis (q, p) per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceModel {
    modes: Vec<ModeKey>,
    lookup: HashMap<ModeKey, usize>,
    matrix: DMatrix<f64>,
}

impl CovarianceModel {
    fn from_parts(modes: Vec<ModeKey>, matrix: DMatrix<f64>) -> Self {
        let lookup = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        CovarianceModel {
            modes,
            lookup,
            matrix,
        }
    }

    /// Vacuum covariance ½·I over a range of one field.
    pub fn vacuum(field: Field, range: IndexRange) -> Self {
        let modes = range
            .iter()
            .map(|n| ModeKey { field, n })
            .collect::<Vec<_>>();
        let dim = 2 * modes.len();
        Self::from_parts(modes, DMatrix::from_diagonal_element(dim, dim, 0.5))
    }

    /// Block-diagonal combination of independent subsystems.
    pub fn direct_sum(parts: &[CovarianceModel]) -> Result<Self> {
        let modes: Vec<ModeKey> = parts.iter().flat_map(|p| p.modes.iter().copied()).collect();
        let dim = 2 * modes.len();
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut offset = 0;
        for part in parts {
            let d = part.dim();
            matrix
                .view_mut((offset, offset), (d, d))
                .copy_from(&part.matrix);
            offset += d;
        }
        let model = Self::from_parts(modes, matrix);
        if model.lookup.len() != model.modes.len() {
            return Err(Error::contract("direct sum repeats a mode"));
        }
        Ok(model)
    }

    /// Same matrix with every mode moved to `field`.
    pub fn relabel(mut self, field: Field) -> Self {
        for m in &mut self.modes {
            m.field = field;
        }
        self.lookup = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| (*m, i))
            .collect();
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn modes(&self) -> &[ModeKey] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Basis index of a quadrature.
    pub fn index(&self, field: Field, n: i64, quad: Quadrature) -> Option<usize> {
        self.lookup.get(&ModeKey { field, n }).map(|i| {
            2 * i
                + match quad {
                    Quadrature::Q => 0,
                    Quadrature::P => 1,
                }
        })
    }

    /// Dense weight vector from sparse (field, n, quadrature, weight) terms.
    /// Repeated terms accumulate.
    pub fn weight_vector<I>(&self, terms: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = (Field, i64, Quadrature, f64)>,
    {
        let mut w = vec![0.0; self.dim()];
        for (field, n, quad, weight) in terms {
            if weight == 0.0 {
                continue;
            }
            let i = self
                .index(field, n, quad)
                .ok_or_else(|| Error::contract(format!("no {field:?} mode for line {n}")))?;
            w[i] += weight;
        }
        Ok(w)
    }

    /// Smallest eigenvalue of the covariance matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Determinant of the sub-covariance of the listed modes.
    pub fn block_determinant(&self, modes: &[ModeKey]) -> Result<f64> {
        let idx: Vec<usize> = modes
            .iter()
            .map(|m| {
                self.lookup
                    .get(m)
                    .map(|i| [2 * i, 2 * i + 1])
                    .ok_or_else(|| Error::contract(format!("unknown mode {m:?}")))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
        Ok(sub.determinant())
    }

    /// Nonzero upper-triangular entries (i ≤ j).
    pub fn nonzero_entries(&self) -> Vec<(usize, usize, f64)> {
        let d = self.dim();
        let mut out = Vec::new();
        for j in 0..d {
            for i in 0..=j {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Debug dump: a header of basis labels followed by one row per basis element.
    pub fn to_csv(&self) -> String {
        let labels: Vec<String> = self
            .modes
            .iter()
            .flat_map(|m| {
                let t = m.field.tag();
                [format!("{t}q[{}]", m.n), format!("{t}p[{}]", m.n)]
            })
            .collect();
        let mut out = String::from("basis,");
        out.push_str(&labels.join(","));
        out.push('\n');
        for (r, label) in labels.iter().enumerate() {
            out.push_str(label);
            for c in 0..self.dim() {
                out.push_str(&format!(",{:.15e}", self.matrix[(r, c)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Covariance of the comb state described by `spec` over `range`.
pub fn build_covariance(range: IndexRange, spec: &QuantumSpec) -> Result<CovarianceModel> {
    spec.validate(range)?;
    let mut cov = CovarianceModel::vacuum(Field::Comb, range);
    let pos = |n: i64| (n - range.n_min) as usize;

    match spec.mode {
        Mode::Vacuum => {}
        Mode::Intra => {
            for n in range.iter() {
                let (vq, vp) = spec.orientation.scaled_variances(spec.gain(range, n));
                let i = 2 * pos(n);
                cov.matrix[(i, i)] = 0.5 * vq;
                cov.matrix[(i + 1, i + 1)] = 0.5 * vp;
            }
        }
        Mode::Epr => {
            let (vq, vp) = spec.orientation.scaled_variances(spec.gain(range, 0));
            let i0 = 2 * pos(0);
            cov.matrix[(i0, i0)] = 0.5 * vq;
            cov.matrix[(i0 + 1, i0 + 1)] = 0.5 * vp;
            for k in 1..=range.n_max {
                let g = spec.gain(range, k);
                let (ip, im) = (2 * pos(k), 2 * pos(-k));
                // Var(Q⁺)=Var(P⁻)=1/2G and Var(Q⁻)=Var(P⁺)=G/2 in the ±k basis
                let diag = 0.25 * (g + 1.0 / g);
                let qq = 0.25 * (1.0 / g - g);
                let pp = -qq;
                for i in [ip, im] {
                    cov.matrix[(i, i)] = diag;
                    cov.matrix[(i + 1, i + 1)] = diag;
                }
                cov.matrix[(ip, im)] = qq;
                cov.matrix[(im, ip)] = qq;
                cov.matrix[(ip + 1, im + 1)] = pp;
                cov.matrix[(im + 1, ip + 1)] = pp;
            }
        }
    }

    if let Some(cl) = &spec.classical {
        let s_qq: Vec<f64> = range
            .iter()
            .map(|n| spec.classical_at(range, n).0)
            .collect();
        let s_pp: Vec<f64> = range
            .iter()
            .map(|n| spec.classical_at(range, n).1)
            .collect();
        let _ = cl;
        cov = add_classical_noise(&cov, &s_qq, &s_pp)?;
    }
    Ok(cov)
}

/// wᵀΣw: the variance (PSD) of the linear combination `weights` of quadratures.
pub fn quadratic_form_variance(cov: &CovarianceModel, weights: &[f64]) -> Result<f64> {
    if weights.len() != cov.dim() {
        return Err(Error::contract(format!(
            "weight vector of length {} for a {}-dimensional covariance",
            weights.len(),
            cov.dim()
        )));
    }
    let w = nalgebra::DVector::from_column_slice(weights);
    Ok(w.dot(&(&cov.matrix * &w)))
}

/// Add white classical noise to each mode's q and p variances, in mode order.
pub fn add_classical_noise(
    cov: &CovarianceModel,
    s_qq: &[f64],
    s_pp: &[f64],
) -> Result<CovarianceModel> {
    let modes = cov.modes.len();
    if s_qq.len() != modes || s_pp.len() != modes {
        return Err(Error::contract(format!(
            "classical noise for {}/{} modes, covariance has {modes}",
            s_qq.len(),
            s_pp.len()
        )));
    }
    if let Some(v) = s_qq
        .iter()
        .chain(s_pp)
        .find(|v| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::domain(format!(
            "classical noise PSDs must be ≥ 0, got {v}"
        )));
    }
    let mut out = cov.clone();
    for (i, (cq, cp)) in s_qq.iter().zip(s_pp).enumerate() {
        out.matrix[(2 * i, 2 * i)] += cq;
        out.matrix[(2 * i + 1, 2 * i + 1)] += cp;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn epr_pair_weights(cov: &CovarianceModel, n: i64, quad: Quadrature, sign: f64) -> Vec<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        cov.weight_vector([(Field::Comb, n, quad, s), (Field::Comb, -n, quad, sign * s)])
            .unwrap()
    }

    #[test]
    fn vacuum_is_half_identity() {
        let cov =
            build_covariance(IndexRange::new(-2, 3).unwrap(), &QuantumSpec::vacuum()).unwrap();
        assert_eq!(cov.dim(), 12);
        assert_eq!(cov.matrix(), &DMatrix::from_diagonal_element(12, 12, 0.5));
    }

    #[test]
    fn unit_gain_is_vacuum() {
        let range = IndexRange::symmetric(3);
        let vac = build_covariance(range, &QuantumSpec::vacuum()).unwrap();
        let intra = build_covariance(
            range,
            &QuantumSpec::intra(PerLine::Uniform(1.0), Orientation::Phase),
        )
        .unwrap();
        let epr = build_covariance(
            range,
            &QuantumSpec::epr(PerLine::Uniform(1.0), Orientation::Phase),
        )
        .unwrap();
        assert_eq!(vac, intra);
        assert_eq!(vac.matrix(), epr.matrix());
    }

    #[test]
    fn intra_orientation() {
        let range = IndexRange::symmetric(1);
        let cov = build_covariance(
            range,
            &QuantumSpec::intra(PerLine::Uniform(4.0), Orientation::Phase),
        )
        .unwrap();
        let q0 = cov.index(Field::Comb, 0, Quadrature::Q).unwrap();
        assert_eq!(cov.matrix()[(q0, q0)], 2.0);
        assert_eq!(cov.matrix()[(q0 + 1, q0 + 1)], 0.125);
        let cov = build_covariance(
            range,
            &QuantumSpec::intra(PerLine::Uniform(4.0), Orientation::Amplitude),
        )
        .unwrap();
        assert_eq!(cov.matrix()[(q0, q0)], 0.125);
    }

    #[test]
    fn epr_quadrature_variances() {
        let g = 7.5;
        let range = IndexRange::symmetric(2);
        let cov = build_covariance(
            range,
            &QuantumSpec::epr(PerLine::Uniform(g), Orientation::Amplitude),
        )
        .unwrap();
        for n in 1..=2 {
            let p_minus =
                quadratic_form_variance(&cov, &epr_pair_weights(&cov, n, Quadrature::P, -1.0))
                    .unwrap();
            let p_plus =
                quadratic_form_variance(&cov, &epr_pair_weights(&cov, n, Quadrature::P, 1.0))
                    .unwrap();
            let q_plus =
                quadratic_form_variance(&cov, &epr_pair_weights(&cov, n, Quadrature::Q, 1.0))
                    .unwrap();
            let q_minus =
                quadratic_form_variance(&cov, &epr_pair_weights(&cov, n, Quadrature::Q, -1.0))
                    .unwrap();
            assert_relative_eq!(p_minus, 0.5 / g, max_relative = 1e-14);
            assert_relative_eq!(q_plus, 0.5 / g, max_relative = 1e-14);
            assert_relative_eq!(p_plus, 0.5 * g, max_relative = 1e-14);
            assert_relative_eq!(q_minus, 0.5 * g, max_relative = 1e-14);
        }
    }

    #[test]
    fn purity_of_squeezed_states() {
        let range = IndexRange::symmetric(3);
        let gains = PerLine::PerIndex(vec![2.0, 3.0, 10.0, 31.62]);
        let cov = build_covariance(range, &QuantumSpec::epr(gains, Orientation::Phase)).unwrap();
        let key = |n| ModeKey {
            field: Field::Comb,
            n,
        };
        assert_relative_eq!(
            cov.block_determinant(&[key(0)]).unwrap(),
            0.25,
            max_relative = 1e-12
        );
        for k in 1..=3 {
            assert_relative_eq!(
                cov.block_determinant(&[key(k), key(-k)]).unwrap(),
                0.0625,
                max_relative = 1e-10
            );
        }
        assert!(cov.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn epr_rejects_asymmetric_range() {
        let err = build_covariance(
            IndexRange::new(-1, 2).unwrap(),
            &QuantumSpec::epr(PerLine::Uniform(2.0), Orientation::Phase),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn gains_below_one_are_rejected() {
        let err = build_covariance(
            IndexRange::symmetric(1),
            &QuantumSpec::intra(PerLine::Uniform(0.5), Orientation::Phase),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
        let err = build_covariance(
            IndexRange::symmetric(1),
            &QuantumSpec::intra(PerLine::PerIndex(vec![1.0, 2.0]), Orientation::Phase),
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn single_entry_and_dimension_mismatch() {
        let cov = build_covariance(IndexRange::symmetric(1), &QuantumSpec::vacuum()).unwrap();
        let w = cov
            .weight_vector([(Field::Comb, 0, Quadrature::Q, 1.0)])
            .unwrap();
        assert_eq!(quadratic_form_variance(&cov, &w).unwrap(), 0.5);
        assert!(matches!(
            quadratic_form_variance(&cov, &[1.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn classical_additions() {
        let range = IndexRange::symmetric(1);
        let cov = build_covariance(range, &QuantumSpec::vacuum()).unwrap();
        let same = add_classical_noise(&cov, &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(same, cov);

        let noisy = add_classical_noise(&cov, &[0.0; 3], &[0.0, 0.3, 0.0]).unwrap();
        let p0 = noisy.index(Field::Comb, 0, Quadrature::P).unwrap();
        assert_relative_eq!(noisy.matrix()[(p0, p0)], 0.8);
        assert!(matches!(
            add_classical_noise(&cov, &[0.0, -1.0, 0.0], &[0.0; 3]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn csv_dump_has_labels() {
        let cov = build_covariance(IndexRange::new(0, 1).unwrap(), &QuantumSpec::vacuum()).unwrap();
        let csv = cov.to_csv();
        assert!(csv.starts_with("basis,q[0],p[0],q[1],p[1]\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
