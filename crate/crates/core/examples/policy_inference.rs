//! Recovers the maneuver policy of a simulated shell from its ephemeris.

use std::f64::consts::TAU;

use megacon::ingest::pipeline::{add_rate_noise, infer_policy, synthesize_ephemeris};
use megacon::orbital::{mean_motion, EquilibriumState};
use megacon::simulator::{run_cascade, PolicyKind, SimConfig};
use megacon::stability::PolicyParams;

fn main() -> megacon::error::Result<()> {
    let truth = PolicyParams::new(1.3e-9, 9e-5, 1.5e-5);
    let n = 16;
    let mut c = SimConfig::new(n, PolicyKind::Pairwise, truth);
    c.dt_s = 10.0;
    c.duration_s = 399_600.0;
    c.record_stride = 60;
    c.decouple_altitude_km = None;
    c.trigger_threshold_rad = 1e-30;
    let eq = EquilibriumState {
        spacing_rad: TAU / n as f64,
        mean_motion_rad_s: mean_motion(550.0)?,
    };
    let ids: Vec<u32> = (0..n as u32).map(|i| 53_000 + i).collect();

    for noise in [0.0, 0.01, 0.03] {
        let mut r = run_cascade(&c)?;
        if noise > 0.0 {
            add_rate_noise(&mut r.samples, noise, 11);
        }
        let recs = synthesize_ephemeris(&r.samples, &eq, 550.0, 1.7e9, &ids)?;
        let est = infer_policy(&recs, &eq)?;
        println!(
            "noise {:>4.1}%: a1 {:.4e}  a2 {:.4e}  a3 {:.4e}  ({} rows, {} trimmed)",
            noise * 100.0,
            est.params.alpha1,
            est.params.alpha2,
            est.params.alpha3,
            est.sample_count,
            est.trimmed_rows
        );
    }
    println!("truth      : a1 {:.4e}  a2 {:.4e}  a3 {:.4e}", truth.alpha1, truth.alpha2, truth.alpha3);
    Ok(())
}
