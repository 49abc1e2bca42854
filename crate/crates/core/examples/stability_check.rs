//! Classifies a few maneuver policies and shows where the ring eigenvalues
//! sit for each.

use megacon::stability::{max_real_part, ring_modes, stability_verdict, sup_gain_imag_axis, PolicyParams};

fn main() -> megacon::error::Result<()> {
    let policies = [
        ("conservative", PolicyParams::new(1e-9, 1e-4, 1e-5)),
        ("borderline", PolicyParams::new(4.95e-9, 1e-4, 1e-5)),
        ("aggressive", PolicyParams::new(1e-8, 1e-4, 5e-5)),
    ];
    for (name, p) in policies {
        let v = stability_verdict(&p)?;
        let peak = sup_gain_imag_axis(&p)?;
        println!(
            "{name:>12}: margin {:+.3e}  stable {:5}  sup|H| {:.6} at mu = {:.3e} rad/s",
            v.margin, v.stable, peak.gain, peak.mu
        );
        for n in [8, 64, 1024] {
            println!("{:>16} n = {n:>4}: max Re(lambda) = {:+.3e}", "", max_real_part(&p, n)?);
        }
    }

    // the block structure behind those numbers
    let p = PolicyParams::new(1e-8, 1e-4, 5e-5);
    for m in ring_modes(&p, 6)? {
        println!(
            "block {}  w = {:+.3}{:+.3}i  roots {:+.3e}{:+.3e}i, {:+.3e}{:+.3e}i",
            m.block, m.root_of_unity.re, m.root_of_unity.im, m.roots[0].re, m.roots[0].im, m.roots[1].re, m.roots[1].im
        );
    }
    Ok(())
}
