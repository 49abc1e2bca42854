//! Simulated rings rendered as ephemerides and fed back through the
//! analysis pipeline.

use megacon::ingest::pipeline::{
    add_rate_noise, extract_cascade_chains, infer_policy, synthesize_ephemeris, ChainOptions, ExternalManeuver,
};
use megacon::orbital::{mean_motion, EquilibriumState};
use megacon::simulator::{run_cascade, PolicyKind, SimConfig, SimResult};
use megacon::stability::PolicyParams;

const TRUE: PolicyParams = PolicyParams::new(1e-9, 1e-4, 1e-5);

fn eq_for(n: usize) -> EquilibriumState {
    EquilibriumState {
        spacing_rad: std::f64::consts::TAU / n as f64,
        mean_motion_rad_s: mean_motion(550.0).unwrap(),
    }
}

fn simulate(n: usize, p: PolicyParams, duration_s: f64, stride: usize, threshold: f64) -> SimResult {
    let mut c = SimConfig::new(n, PolicyKind::Pairwise, p);
    c.dt_s = 10.0;
    c.duration_s = duration_s;
    c.record_stride = stride;
    c.decouple_altitude_km = None;
    c.trigger_threshold_rad = threshold;
    c.perturbation.impulse_rad_s = 1e-7;
    run_cascade(&c).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ids(n: usize) -> Vec<u32> {
    (0..n as u32).map(|i| 44_000 + 3 * i).collect()
}

#[test]
fn noiseless_inference_recovers_parameters() {
    let n = 8;
    let r = simulate(n, TRUE, 199_980.0, 6, 1e-30);
    let eq = eq_for(n);
    let recs = synthesize_ephemeris(&r.samples, &eq, 550.0, 1.7e9, &ids(n)).unwrap();
    let est = infer_policy(&recs, &eq).unwrap();
    eprintln!("{est:?}");
    assert!(rel(est.params.alpha1, TRUE.alpha1) < 1e-6);
    assert!(rel(est.params.alpha2, TRUE.alpha2) < 1e-6);
    assert!(rel(est.params.alpha3, TRUE.alpha3) < 1e-6);
    assert!(est.sample_count >= 10);
}

#[test]
fn noisy_inference_within_five_percent() {
    let n = 16;
    let mut r = simulate(n, TRUE, 399_600.0, 60, 1e-30);
    add_rate_noise(&mut r.samples, 0.01, 2024);
    let eq = eq_for(n);
    let recs = synthesize_ephemeris(&r.samples, &eq, 550.0, 1.7e9, &ids(n)).unwrap();
    let est = infer_policy(&recs, &eq).unwrap();
    eprintln!("{est:?}");
    assert!(rel(est.params.alpha1, TRUE.alpha1) < 0.05);
    assert!(rel(est.params.alpha2, TRUE.alpha2) < 0.05);
    assert!(rel(est.params.alpha3, TRUE.alpha3) < 0.05);
}

#[test]
fn extracted_chain_matches_simulated_cascade() {
    let n = 16;
    let unstable = PolicyParams::new(1e-8, 1e-4, 5e-5);
    let r = simulate(n, unstable, 150_000.0, 1, 1e-4);
    let eq = eq_for(n);
    let sat_ids = ids(n);
    let recs = synthesize_ephemeris(&r.samples, &eq, 550.0, 1.7e9, &sat_ids).unwrap();
    let seed = ExternalManeuver {
        sat_id: sat_ids[0],
        epoch_s: 1.7e9,
        sma_deviation_km: -1.0,
        pc: 2e-5,
        counterpart_id: 99_999,
    };
    let chains = extract_cascade_chains(&recs, &eq, &[seed], &ChainOptions::new(1e-4)).unwrap();
    eprintln!("sim hops {} extracted {}", r.chain_hops, chains[0].hop_count);
    assert!(r.chain_hops >= 3);
    assert_eq!(chains[0].hop_count, r.cascaded_count());
    let hops = &chains[0].hops;
    assert!(hops.windows(2).all(|w| w[0].epoch_s < w[1].epoch_s));
    for (k, h) in hops.iter().enumerate() {
        assert_eq!(h.sat_id, sat_ids[k + 1], "ring neighbour");
        assert_eq!(h.epoch_s, 1.7e9 + r.events[k + 1].time_s);
    }
}
