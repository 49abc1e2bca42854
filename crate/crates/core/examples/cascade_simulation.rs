//! One external maneuver on a 24-satellite ring, under a stable and an
//! unstable pairwise policy.

use megacon::simulator::{run_cascade, PolicyKind, SimConfig};
use megacon::stability::PolicyParams;

fn main() -> megacon::error::Result<()> {
    for (label, p) in [
        ("stable", PolicyParams::new(1e-9, 1e-4, 1e-5)),
        ("unstable", PolicyParams::new(1e-8, 1e-4, 5e-5)),
    ] {
        let mut c = SimConfig::new(24, PolicyKind::Pairwise, p);
        c.dt_s = 10.0;
        c.duration_s = 200_000.0;
        c.trigger_threshold_rad = 1e-4;
        c.decouple_altitude_km = None;
        let r = run_cascade(&c)?;
        let worst = r.peak_abs_dtheta.iter().cloned().fold(0.0, f64::max);
        println!(
            "{label:>8}: {} cascaded maneuvers, {} hops, largest spacing error {worst:.3e} rad, ended by {:?}",
            r.cascaded_count(),
            r.chain_hops,
            r.terminated_by
        );
        for e in r.events.iter().take(6) {
            println!("          sat {:>2} at t = {:>8.0} s ({:?})", e.sat_index, e.time_s, e.cause);
        }
    }
    Ok(())
}
