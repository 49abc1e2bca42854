//! Finds the collision-avoidance burn in a synthetic shell and walks the
//! chain of follower maneuvers it set off.

use std::f64::consts::TAU;

use megacon::conjunction::CdmRecord;
use megacon::ingest::format_utc;
use megacon::ingest::pipeline::{
    detect_external_maneuvers, extract_cascade_chains, synthesize_ephemeris, ChainOptions, DetectOptions,
};
use megacon::orbital::{mean_motion, EquilibriumState};
use megacon::simulator::{run_cascade, PolicyKind, SimConfig};
use megacon::stability::PolicyParams;

fn main() -> megacon::error::Result<()> {
    let n = 16;
    let mut c = SimConfig::new(n, PolicyKind::Pairwise, PolicyParams::new(1e-8, 1e-4, 5e-5));
    c.dt_s = 10.0;
    c.duration_s = 150_000.0;
    c.record_stride = 1;
    c.trigger_threshold_rad = 1e-4;
    c.decouple_altitude_km = None;
    c.perturbation.impulse_rad_s = 3e-7;
    c.perturbation.start_s = 1_000.0;
    let sim = run_cascade(&c)?;

    let epoch0 = 1_704_067_200.0;
    let eq = EquilibriumState {
        spacing_rad: TAU / n as f64,
        mean_motion_rad_s: mean_motion(550.0)?,
    };
    let ids: Vec<u32> = (1..=n as u32).collect();
    let ephemeris = synthesize_ephemeris(&sim.samples, &eq, 550.0, epoch0, &ids)?;
    let reports = [CdmRecord {
        object_a_id: 1,
        object_b_id: 90_001,
        tca: epoch0 + 600.0,
        pc: 2.5e-5,
        miss_distance_km: 0.4,
        geometry: None,
    }];

    let seeds = detect_external_maneuvers(&ephemeris, &reports, &DetectOptions::default())?;
    let chains = extract_cascade_chains(&ephemeris, &eq, &seeds, &ChainOptions::new(1e-4))?;
    for ch in &chains {
        println!(
            "burn by {} at {} (Pc {:.1e} with {}): {} follower maneuvers",
            ch.seed.sat_id,
            format_utc(ch.seed.epoch_s),
            ch.seed.pc,
            ch.seed.counterpart_id,
            ch.hop_count
        );
        for h in &ch.hops {
            println!("  sat {:>2} at {}  dtheta {:+.2e} -> {:+.2e}", h.sat_id, format_utc(h.epoch_s), h.dtheta_before_rad, h.dtheta_after_rad);
        }
    }
    println!("simulator counted {} cascaded maneuvers", sim.cascaded_count());
    Ok(())
}
