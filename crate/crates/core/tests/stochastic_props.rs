use combnoise_core::dcs::{flattop_setup, sql_psd, DcsSetup, DcsStates, SampleResponse};
use combnoise_core::states::{Frame, Orientation, PerLine, QuantumSpec};
use combnoise_core::stochastic::{
    compare_monte_carlo, estimate_psd, sample_photocurrent, sample_times, variance_trace,
    CycloPreset, TraceConfig, THREE_SIGMA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const FIVE_SIGMA: f64 = 0.999_999_426_696_856_3;

fn small(strong_lo: bool) -> DcsSetup {
    flattop_setup(3, 2e3, 5e4, 2.0 * PI * 1e3, strong_lo).unwrap()
}

fn long_cfg() -> TraceConfig {
    TraceConfig {
        sample_rate: 1e5,
        duration: 10.0,
        seed: 11,
        rbw: 100.0,
    }
}

fn bins_within(series: &[f64], cfg: &TraceConfig, level: f64, confidence: f64) -> (usize, usize) {
    let est = estimate_psd(series, cfg, confidence).unwrap();
    let inside = est
        .ci_lo
        .iter()
        .zip(&est.ci_hi)
        .filter(|(lo, hi)| **lo <= level && level <= **hi)
        .count();
    (inside, est.psd.len())
}

#[test]
fn vacuum_estimate_is_white_at_sql() {
    let setup = small(false);
    let cfg = long_cfg();
    let sample = SampleResponse::transparent(setup.range());
    let states = DcsStates::both(QuantumSpec::vacuum().with_frame(Frame::CrossReferred));
    let series = sample_photocurrent(&setup, &states, &sample, &cfg).unwrap();
    assert_eq!(series.len(), 1_000_000);
    let sql = sql_psd(&setup);

    let mean_square =
        series.iter().map(|x| x * x).sum::<f64>() / (series.len() as f64 * cfg.sample_rate);
    assert!(
        (mean_square / sql - 1.0).abs() < 0.01,
        "{}",
        mean_square / sql
    );

    let (inside, bins) = bins_within(&series, &cfg, sql, THREE_SIGMA);
    assert!(
        inside as f64 >= 0.99 * bins as f64,
        "{inside}/{bins} bins inside the 3σ interval"
    );
    let (inside, bins) = bins_within(&series, &cfg, sql, FIVE_SIGMA);
    assert_eq!(inside, bins);
}

#[test]
fn uniform_cross_squeezing_is_flat_below_sql() {
    let g = 8.0;
    let setup = small(false);
    let cfg = long_cfg();
    let sample = SampleResponse::transparent(setup.range());
    let states = DcsStates::both(
        QuantumSpec::intra(PerLine::Uniform(g), Orientation::DCS).with_frame(Frame::CrossReferred),
    );
    let sql = sql_psd(&setup);
    let trace = variance_trace(
        &setup,
        &states,
        &sample,
        &sample_times(cfg.sample_rate, 2000),
    )
    .unwrap();
    assert!(trace
        .normalized_variance()
        .all(|v| (v * g - 1.0).abs() < 1e-12));

    let series = sample_photocurrent(&setup, &states, &sample, &cfg).unwrap();
    let (inside, bins) = bins_within(&series, &cfg, sql / g, THREE_SIGMA);
    assert!(inside as f64 >= 0.99 * bins as f64, "{inside}/{bins}");
}

#[test]
fn series_is_independent_of_thread_count() {
    let setup = small(true);
    let cfg = TraceConfig {
        sample_rate: 1e5,
        duration: 1.0,
        seed: 3,
        rbw: 100.0,
    };
    let sample = SampleResponse {
        kappas: vec![1.0, 0.8, 0.5, 0.1, 0.5, 0.8, 1.0],
        thetas: vec![0.0, 0.1, -0.2, 0.3, 0.0, 0.5, 0.0],
    };
    let states = DcsStates::both(
        QuantumSpec::epr(PerLine::Uniform(6.0), Orientation::DCS).with_frame(Frame::CrossReferred),
    );
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_photocurrent(&setup, &states, &sample, &cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert!(one
        .iter()
        .zip(&four)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn monte_carlo_matches_analytic_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let n = rng.random_range(1..5u32);
        let setup = flattop_setup(
            n,
            rng.random_range(1e2..1e4),
            rng.random_range(1e4..1e5),
            2.0 * PI * 1e3,
            rng.random_bool(0.5),
        )
        .unwrap();
        let len = setup.range().len();
        let sample = SampleResponse {
            kappas: (0..len).map(|_| rng.random_range(0.0..=1.0)).collect(),
            thetas: (0..len).map(|_| rng.random_range(-PI..PI)).collect(),
        };
        let frame = if rng.random_bool(0.5) {
            Frame::SelfReferred
        } else {
            Frame::CrossReferred
        };
        let g = rng.random_range(1.0..30.0);
        let spec = match i % 3 {
            0 => QuantumSpec::vacuum(),
            1 => QuantumSpec::intra(PerLine::Uniform(g), Orientation::DCS),
            _ => QuantumSpec::epr(PerLine::Uniform(g), Orientation::DCS),
        };
        let states = DcsStates::both(spec.with_frame(frame));
        let cfg = TraceConfig {
            sample_rate: 2e4,
            duration: 2.0,
            seed: i,
            rbw: 100.0,
        };
        let cmp = compare_monte_carlo(&setup, &states, &sample, &cfg).unwrap();
        assert!(cmp.z_score().abs() < 5.0, "config {i}: {cmp:?}");
    }
}

#[test]
fn cyclo_preset_swings_between_gain_bounds() {
    let preset = CycloPreset::default();
    let setup = preset.setup().unwrap();
    let sample = SampleResponse::transparent(setup.range());
    let fs = preset.trace.sample_rate;
    let times = sample_times(fs, (preset.period() * fs).round() as usize);
    for &g in &preset.gains {
        let trace = variance_trace(&setup, &preset.states(g), &sample, &times).unwrap();
        let v: Vec<f64> = trace.normalized_variance().collect();
        assert!(v.iter().all(|&x| x >= 1.0 / g - 1e-9 && x <= g + 1e-9));
        assert!((v[0] - 1.0 / g).abs() < 1e-9 * g);
        assert!((v[500] - g).abs() < 1e-9 * g);
        let avg = v.iter().sum::<f64>() / v.len() as f64;
        assert!((avg - 0.5 * (g + 1.0 / g)).abs() < 1e-9 * g);
    }
}
