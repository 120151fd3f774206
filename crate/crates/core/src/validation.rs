//! Self-checks: closed forms against the covariance oracle on random
//! instances, limiting-case reductions, and Monte-Carlo agreement.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcs::{
    self, flattop_setup, DcsSetup, DcsStates, PhotocurrentOracle, SampleResponse, Strategy,
};
use crate::envelope::{make_envelope, CombEnvelope, PhasedEnvelope, Shape};
use crate::ofd::{self, SumPolicy};
use crate::states::{
    quadratic_form_variance, ClassicalNoise, Field, Frame, IndexRange, Mode, Orientation, PerLine,
    Quadrature, QuantumSpec,
};
use crate::stochastic::{compare_monte_carlo, TraceConfig};
use crate::{Error, Result};

/// Tolerance of closed form against oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Tolerance of exact reductions.
pub const REDUCTION_TOLERANCE: f64 = 1e-12;

/// Allowed Monte-Carlo deviation in standard errors.
pub const MC_SIGMAS: f64 = 5.0;

/// Deliberate defects used to confirm that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Negate oracle weights on negative line indices of EPR-paired states.
    EprWeightSignFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_mc_configs")]
    pub mc_configs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inject_fault: Option<Fault>,
}

fn default_instances() -> usize {
    1000
}

fn default_mc_configs() -> usize {
    20
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            instances: default_instances(),
            mc_configs: default_mc_configs(),
            seed: 0,
            inject_fault: None,
        }
    }
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation (relative error, or |z| for Monte Carlo).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn check(suite: &str, name: &str, deviations: &[f64], tolerance: f64) -> CheckResult {
    let worst = deviations.iter().cloned().fold(0.0, f64::max);
    let finite = deviations.iter().all(|d| d.is_finite());
    CheckResult {
        suite: suite.into(),
        name: name.into(),
        passed: finite && worst <= tolerance,
        worst: if finite { worst } else { f64::INFINITY },
        tolerance,
        cases: deviations.len(),
    }
}

fn random_amps(rng: &mut ChaCha8Rng, len: usize, symmetric: bool) -> Vec<f64> {
    let mut amps: Vec<f64> = (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.05..1.0) * 1e4
            }
        })
        .collect();
    if symmetric {
        for i in 0..len / 2 {
            amps[len - 1 - i] = amps[i];
        }
    }
    amps
}

fn random_gains(rng: &mut ChaCha8Rng, count: usize) -> PerLine {
    if rng.random_bool(0.3) {
        PerLine::Uniform(rng.random_range(1.0..40.0))
    } else {
        PerLine::PerIndex((0..count).map(|_| rng.random_range(1.0..40.0)).collect())
    }
}

fn random_spec(rng: &mut ChaCha8Rng, range: IndexRange, allow_epr: bool) -> QuantumSpec {
    let orientation = if rng.random_bool(0.5) {
        Orientation::Phase
    } else {
        Orientation::Amplitude
    };
    let mut spec = match rng.random_range(0..if allow_epr { 3 } else { 2 }) {
        0 => QuantumSpec::vacuum(),
        1 => QuantumSpec::intra(random_gains(rng, range.len()), orientation),
        _ => QuantumSpec::epr(random_gains(rng, range.n_max as usize + 1), orientation),
    };
    if rng.random_bool(0.2) {
        let mut per = || {
            PerLine::PerIndex(
                (0..range.len())
                    .map(|_| rng.random_range(0.0..2.0))
                    .collect(),
            )
        };
        let s_qq = per();
        let s_pp = per();
        spec = spec.with_classical(ClassicalNoise { s_qq, s_pp });
    }
    spec
}

fn flip_negative(w: &mut [f64], cov: &crate::states::CovarianceModel, fields: &[Field]) {
    for m in cov.modes() {
        if m.n < 0 && fields.contains(&m.field) {
            for quad in [Quadrature::Q, Quadrature::P] {
                if let Some(i) = cov.index(m.field, m.n, quad) {
                    w[i] = -w[i];
                }
            }
        }
    }
}

struct OfdCase {
    env: CombEnvelope,
    thetas: Vec<f64>,
    spec: QuantumSpec,
    policy: SumPolicy,
}

fn ofd_case(rng: &mut ChaCha8Rng) -> OfdCase {
    loop {
        let half = rng.random_range(1..12i64);
        let allow_epr = rng.random_bool(0.5);
        let (n_min, len) = if allow_epr {
            (-half, (2 * half + 1) as usize)
        } else {
            (rng.random_range(-15..5), rng.random_range(2..25usize))
        };
        let amps = random_amps(rng, len, allow_epr);
        let Ok(env) = CombEnvelope::from_amplitudes(n_min, amps) else {
            continue;
        };
        if ofd::ofd_weights(&env, SumPolicy::SupportOnly).is_err() {
            continue;
        }
        let range = IndexRange {
            n_min: env.n_min(),
            n_max: env.n_max(),
        };
        let spec = random_spec(rng, range, allow_epr);
        let thetas = (0..len).map(|_| rng.random_range(-PI..PI)).collect();
        let policy = if rng.random_bool(0.5) {
            SumPolicy::SupportOnly
        } else {
            SumPolicy::Extended
        };
        return OfdCase {
            env,
            thetas,
            spec,
            policy,
        };
    }
}

fn ofd_deviation(case: &OfdCase, fault: Option<Fault>) -> Result<f64> {
    let cov = ofd::state_covariance(&case.env, &case.spec, case.policy)?;
    let flip = fault == Some(Fault::EprWeightSignFlip) && case.spec.mode == Mode::Epr;
    let weights = ofd::ofd_weights(&case.env, case.policy)?;
    let mut worst: f64 = 0.0;
    for phase in [true, false] {
        let mut w = ofd::oracle_weights(&cov, &weights, phase)?;
        if flip {
            flip_negative(&mut w, &cov, &[Field::Comb]);
        }
        let oracle = quadratic_form_variance(&cov, &w)?;
        let closed = if phase {
            ofd::phase_noise_psd(&case.env, &case.spec, case.policy)?.value
        } else {
            ofd::amplitude_noise_psd(&case.env, &case.spec, case.policy)?.value
        };
        worst = worst.max(rel_err(closed, oracle));
    }
    let phased = PhasedEnvelope::new(case.env.clone(), case.thetas.clone())?;
    let g = ofd::general_phase_estimator_weights(&phased, case.policy)?;
    let mut w = cov.weight_vector(g.lines.iter().enumerate().flat_map(|(i, &n)| {
        [
            (Field::Comb, n, Quadrature::Q, g.phase_q[i]),
            (Field::Comb, n, Quadrature::P, g.phase_p[i]),
        ]
    }))?;
    if flip {
        flip_negative(&mut w, &cov, &[Field::Comb]);
    }
    let oracle = quadratic_form_variance(&cov, &w)?;
    let closed = ofd::general_phase_noise_psd(&phased, &case.spec, case.policy)?.value;
    Ok(worst.max(rel_err(closed, oracle)))
}

struct DcsCase {
    setup: DcsSetup,
    states: DcsStates,
    sample: SampleResponse,
}

fn dcs_case(rng: &mut ChaCha8Rng, max_half: i64) -> DcsCase {
    loop {
        let half = rng.random_range(1..=max_half);
        let allow_epr = rng.random_bool(0.6);
        let (n_min, len) = if allow_epr {
            (-half, (2 * half + 1) as usize)
        } else {
            (
                rng.random_range(-max_half..=0),
                rng.random_range(1..=(2 * max_half + 1) as usize),
            )
        };
        let mirrored = allow_epr && rng.random_bool(0.5);
        let sig = random_amps(rng, len, mirrored);
        let lo: Vec<f64> = random_amps(rng, len, false)
            .iter()
            .map(|a| a * 30.0)
            .collect();
        let (Ok(sig), Ok(lo)) = (
            CombEnvelope::from_amplitudes(n_min, sig),
            CombEnvelope::from_amplitudes(n_min, lo),
        ) else {
            continue;
        };
        let delta_rep = 2.0 * PI * 1e3;
        let offset = (max_half as f64 + 1.5) * delta_rep;
        let Ok(setup) = DcsSetup::new(sig, lo, offset, delta_rep, rng.random_bool(0.5)) else {
            continue;
        };
        if setup.detected_lines().next().is_none() {
            continue;
        }
        let range = setup.range();
        let frame = if rng.random_bool(0.5) {
            Frame::SelfReferred
        } else {
            Frame::CrossReferred
        };
        let states = DcsStates {
            signal: random_spec(rng, range, allow_epr).with_frame(frame),
            lo: random_spec(rng, range, allow_epr).with_frame(frame),
        };
        let sample = SampleResponse {
            kappas: (0..len)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random_range(0.0..=1.0)
                    }
                })
                .collect(),
            thetas: (0..len).map(|_| rng.random_range(-PI..PI)).collect(),
        };
        return DcsCase {
            setup,
            states,
            sample,
        };
    }
}

fn dcs_deviation(case: &DcsCase, fault: Option<Fault>) -> Result<f64> {
    let closed = dcs::photocurrent_psd(&case.setup, &case.states, &case.sample)?.value;
    let mut oracle = PhotocurrentOracle::new(&case.setup, &case.states, &case.sample)?;
    let epr = case.states.signal.mode == Mode::Epr || case.states.lo.mode == Mode::Epr;
    if fault == Some(Fault::EprWeightSignFlip) && epr {
        let cov = oracle.cov.clone();
        for line in oracle.lines.iter_mut().filter(|l| l.n < 0) {
            for (i, x) in line.cos.iter_mut().chain(line.sin.iter_mut()) {
                let f = cov.modes()[*i / 2].field;
                if f == Field::Signal || f == Field::Lo {
                    *x = -*x;
                }
            }
        }
    }
    Ok(rel_err(closed, oracle.psd()?))
}

fn oracle_suite(cfg: &ValidationConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ofd_cases: Vec<OfdCase> = (0..cfg.instances).map(|_| ofd_case(&mut rng)).collect();
    let dcs_cases: Vec<DcsCase> = (0..cfg.instances).map(|_| dcs_case(&mut rng, 10)).collect();
    let ofd_dev = ofd_cases
        .par_iter()
        .map(|c| ofd_deviation(c, cfg.inject_fault))
        .collect::<Result<Vec<_>>>()?;
    let dcs_dev = dcs_cases
        .par_iter()
        .map(|c| dcs_deviation(c, cfg.inject_fault))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        check(
            "oracle",
            "ofd-closed-form-vs-covariance",
            &ofd_dev,
            ORACLE_TOLERANCE,
        ),
        check(
            "oracle",
            "dcs-closed-form-vs-covariance",
            &dcs_dev,
            ORACLE_TOLERANCE,
        ),
    ])
}

fn reduction_suite() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let vac = QuantumSpec::vacuum();
    let sup = SumPolicy::SupportOnly;

    let flux = 3.7e16;
    let cw = ofd::phase_noise_psd(&CombEnvelope::cw_pair(flux)?, &vac, sup)?.value;
    out.push(check(
        "reduction",
        "cw-benchmark-is-one-over-flux",
        &[rel_err(cw, 1.0 / flux)],
        REDUCTION_TOLERANCE,
    ));

    let mut devs = Vec::new();
    for n in 1..=30 {
        let env = make_envelope(Shape::Flattop, n as f64, flux, None)?;
        let nf = n as f64;
        devs.push(rel_err(
            ofd::suppression_ratio(&env, &vac, sup)?,
            (2.0 * nf + 1.0) / (8.0 * nf * nf),
        ));
    }
    out.push(check(
        "reduction",
        "flattop-suppression-ratio",
        &devs,
        REDUCTION_TOLERANCE,
    ));

    let mut devs = Vec::new();
    for shape in Shape::ALL {
        let env = make_envelope(shape, 4.0, flux, None)?;
        for g in [2.0, 10.0, 31.62] {
            for spec in [
                QuantumSpec::intra(PerLine::Uniform(g), Orientation::OFD),
                QuantumSpec::epr(PerLine::Uniform(g), Orientation::OFD),
            ] {
                devs.push(rel_err(ofd::eta_enhancement(&env, &spec, sup)?, 1.0 / g));
            }
        }
    }
    out.push(check(
        "reduction",
        "uniform-gain-eta",
        &devs,
        REDUCTION_TOLERANCE,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut devs = Vec::new();
    for _ in 0..50 {
        let env = ofd_case(&mut rng).env;
        for n0 in [1_000u64, 100_000] {
            devs.push(rel_err(ofd::classical_transfer(&env, n0)? * n0 as f64, 1.0));
        }
    }
    out.push(check(
        "reduction",
        "classical-division",
        &devs,
        REDUCTION_TOLERANCE,
    ));

    let setup = flattop_setup(4, 3e3, 9e4, 2.0 * PI * 1e3, false)?;
    let transparent = SampleResponse::transparent(setup.range());
    let sql = dcs::sql_psd(&setup);
    let mut devs = Vec::new();
    for frame in [Frame::SelfReferred, Frame::CrossReferred] {
        for mode in [Mode::Vacuum, Mode::Intra, Mode::Epr] {
            let spec = QuantumSpec {
                mode,
                frame,
                gains: PerLine::Uniform(1.0),
                ..Default::default()
            };
            let psd = dcs::photocurrent_psd(&setup, &DcsStates::both(spec), &transparent)?.value;
            devs.push(rel_err(psd, sql));
        }
    }
    out.push(check(
        "reduction",
        "dcs-unit-gain-is-sql",
        &devs,
        REDUCTION_TOLERANCE,
    ));

    let mut devs = Vec::new();
    for g in [2.0, 10.0, 31.62] {
        let spec = QuantumSpec::intra(PerLine::Uniform(g), Orientation::DCS);
        let selfref =
            dcs::photocurrent_psd(&setup, &DcsStates::both(spec.clone()), &transparent)?.value;
        devs.push(rel_err(selfref, sql * 0.5 * (g + 1.0 / g)));
        let cross = dcs::photocurrent_psd(
            &setup,
            &DcsStates::both(spec.with_frame(Frame::CrossReferred)),
            &transparent,
        )?;
        devs.push(rel_err(cross.value, sql / g));
    }
    out.push(check(
        "reduction",
        "dcs-self-penalty-and-cross-gain",
        &devs,
        REDUCTION_TOLERANCE,
    ));

    let g = 10f64.powf(1.5);
    let devs: Vec<f64> = Strategy::ALL
        .iter()
        .map(|&s| dcs::advantage_factor(5, 1.0, g, 1e-2, 1.0, s).map(|a| rel_err(a, g)))
        .collect::<Result<_>>()?;
    out.push(check(
        "reduction",
        "advantage-at-full-transmission",
        &devs,
        1e-9,
    ));
    Ok(out)
}

fn mc_suite(cfg: &ValidationConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d63);
    let cases: Vec<(DcsCase, u64)> = (0..cfg.mc_configs)
        .map(|_| (dcs_case(&mut rng, 3), rng.random()))
        .collect();
    let z = cases
        .iter()
        .map(|(case, seed)| {
            let trace = TraceConfig {
                sample_rate: 1e5,
                duration: 0.2,
                seed: *seed,
                rbw: 100.0,
            };
            compare_monte_carlo(&case.setup, &case.states, &case.sample, &trace)
                .map(|c| c.z_score().abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![check(
        "monte-carlo",
        "sample-variance-vs-trace",
        &z,
        MC_SIGMAS,
    )])
}

/// Run every suite. Failures are reported, not raised; errors mean a
/// suite could not run at all.
pub fn run(cfg: &ValidationConfig) -> Result<ValidationReport> {
    if cfg.instances == 0 {
        return Err(Error::domain(
            "validation needs at least one random instance",
        ));
    }
    let mut checks = oracle_suite(cfg)?;
    checks.extend(reduction_suite()?);
    checks.extend(mc_suite(cfg)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, passed })
}
