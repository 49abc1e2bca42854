use megacon::orbital::{equilibrium, walker_min_spacing, walker_phase, ShellConfig};

fn main() -> megacon::error::Result<()> {
    for (p, s, f) in [(24, 22, 0), (24, 22, 1), (72, 22, 5), (6, 4, 1)] {
        let shell = ShellConfig::new(p, s, 550.0, 53.0, f)?;
        let eq = equilibrium(&shell)?;
        let min = walker_min_spacing(&shell)?;
        println!(
            "{p:>3}/{s:>2}/F={f:<2}: {:>5} sats, ring spacing {:.4} deg, closest pair {:.4} deg, mean motion {:.4e} rad/s",
            shell.total_sats(),
            eq.spacing_rad.to_degrees(),
            min.to_degrees(),
            eq.mean_motion_rad_s
        );
    }
    let shell = ShellConfig::new(6, 4, 550.0, 53.0, 1)?;
    for plane in 0..3 {
        let row: Vec<String> = (0..4).map(|k| format!("{:7.2}", walker_phase(&shell, plane, k).to_degrees())).collect();
        println!("plane {plane}: {}", row.join(" "));
    }
    Ok(())
}
