//! From a policy to a network size limit: safe spacing, capacity ceiling
//! and, for an unstable policy, how quickly the maneuver budget runs out.

use megacon::stability::{
    blowup_horizon, capacity_bound, maneuver_count, safe_distance_bound, sup_gain_imag_axis, time_of_nth_maneuver,
    PolicyParams,
};

fn main() -> megacon::error::Result<()> {
    let stable = PolicyParams::new(1e-9, 1e-4, 1e-5);
    let c_max = 1e-7;
    let safe = safe_distance_bound(&stable, c_max, 64)?;
    println!("safe spacing: ring bound {:.3e} rad, axis bound {:.3e} rad", safe.ring_bound_rad, safe.imag_axis_bound_rad);
    for f in [1, 2, 4] {
        let cap = capacity_bound(safe.ring_bound_rad, f, 20.0)?;
        println!("  F = {f}: at most {} satellites, {:.0} Gbps", cap.max_sats, cap.max_capacity_gbps);
    }

    let unstable = PolicyParams::new(1e-8, 1e-4, 5e-5);
    let h = sup_gain_imag_axis(&unstable)?.gain;
    let t0 = 600.0;
    let horizon = blowup_horizon(h, t0)?;
    println!("unstable policy: hop gain {h:.4}, first hop after {t0} s, blow-up at {horizon:.1} s");
    for n in [1, 5, 20, 100, 350] {
        println!("  maneuver {n:>3} at {:.1} s", time_of_nth_maneuver(h, t0, n, false)?);
    }
    println!("  maneuvers by t = 0.99 * horizon: {:.1}", maneuver_count(h, t0, 0.99 * horizon)?);
    Ok(())
}
