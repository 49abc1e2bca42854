use megacon::simulator::{run_cascade, PolicyKind, SimConfig};
use megacon::stability::PolicyParams;

fn main() -> megacon::error::Result<()> {
    let p = PolicyParams::new(1e-8, 1e-4, 5e-5);
    let mut c = SimConfig::new(32, PolicyKind::Pairwise, p);
    c.dt_s = 10.0;
    c.duration_s = 150_000.0;
    c.trigger_threshold_rad = 1e-4;
    c.decouple_altitude_km = None;

    let pw = run_cascade(&c)?;
    c.policy_kind = PolicyKind::Bilateral;
    let bi = run_cascade(&c)?;

    println!("amplification factor  pairwise {:>4}  bilateral {:>4}", pw.amplification_factor, bi.amplification_factor);
    let last = |r: &megacon::simulator::SimResult| r.samples.last().map(|s| s.omega_dev.clone()).unwrap_or_default();
    let (wp, wb) = (last(&pw), last(&bi));
    println!("final rate deviations (rad/s):");
    for i in (0..32).step_by(4) {
        println!("  sat {i:>2}: pairwise {:+.3e}  bilateral {:+.3e}", wp[i], wb[i]);
    }
    println!("bilateral total rate {:.6e} (kick {:.1e})", wb.iter().sum::<f64>(), c.perturbation.impulse_rad_s);
    Ok(())
}
