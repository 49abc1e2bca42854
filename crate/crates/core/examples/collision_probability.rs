use megacon::conjunction::{collision_probability, is_high_risk, pc_monte_carlo, project_to_conjunction_plane, StateVector};
use nalgebra::{Matrix3, Vector3};

fn main() -> megacon::error::Result<()> {
    // two objects 300 m apart at closest approach, crossing at a steep angle
    let a = StateVector {
        position_km: Vector3::new(6_928.0, 0.0, 0.0),
        velocity_km_s: Vector3::new(0.0, 7.58, 0.0),
        covariance: Matrix3::from_diagonal(&Vector3::new(0.04, 0.25, 0.01)),
        radius_km: 0.005,
    };
    let b = StateVector {
        position_km: Vector3::new(6_928.2, 0.0, 0.22),
        velocity_km_s: Vector3::new(0.0, 3.2, 6.9),
        covariance: Matrix3::from_diagonal(&Vector3::new(0.09, 0.04, 0.16)),
        radius_km: 0.010,
    };
    let g = project_to_conjunction_plane(&a, &b)?;
    println!("{g:#?}");

    let pc = collision_probability(&g, 1e-9)?;
    let mc = pc_monte_carlo(&g, 2_000_000, 42)?;
    println!("quadrature  Pc = {pc:.6e}");
    println!("monte carlo Pc = {:.6e} +- {:.1e} ({} hits)", mc.pc, mc.std_error, mc.hits);
    println!("maneuver at 1e-5 threshold: {}", is_high_risk(pc, 1e-5)?);
    Ok(())
}
