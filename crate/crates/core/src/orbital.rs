//! Shell geometry, equilibrium state and Walker-delta phasing.
//!
//! All angles are radians and all rates radians/second. Degrees appear only
//! in [`ShellConfig::inclination_deg`] and at the command-line boundary.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Earth equatorial radius, km.
pub const EARTH_RADIUS_KM: f64 = 6_378.137;

pub const MIN_ALTITUDE_KM: f64 = 200.0;
pub const MAX_ALTITUDE_KM: f64 = 2_000.0;

/// Geometry of one orbital shell: `num_orbits` planes with `sats_per_orbit`
/// satellites each, phased by the Walker factor `phase_factor_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    pub num_orbits: u32,
    pub sats_per_orbit: u32,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub phase_factor_f: u32,
}

impl ShellConfig {
    pub fn new(
        num_orbits: u32,
        sats_per_orbit: u32,
        altitude_km: f64,
        inclination_deg: f64,
        phase_factor_f: u32,
    ) -> Result<Self> {
        let cfg = Self {
            num_orbits,
            sats_per_orbit,
            altitude_km,
            inclination_deg,
            phase_factor_f,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_orbits < 1 || self.sats_per_orbit < 1 {
            return domain("shell needs at least one orbit and one satellite per orbit");
        }
        check_altitude(self.altitude_km)?;
        if !self.inclination_deg.is_finite() || !(0.0..=180.0).contains(&self.inclination_deg) {
            return domain(format!("inclination {} deg outside [0, 180]", self.inclination_deg));
        }
        if self.phase_factor_f >= self.num_orbits {
            return domain(format!(
                "Walker phase factor {} must be below the number of orbits {}",
                self.phase_factor_f, self.num_orbits
            ));
        }
        Ok(())
    }

    /// Total satellite count `num_orbits * sats_per_orbit`.
    pub fn total_sats(&self) -> u64 {
        u64::from(self.num_orbits) * u64::from(self.sats_per_orbit)
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }
}

/// Equilibrium of the ring: nominal spacing and common mean motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub spacing_rad: f64,
    pub mean_motion_rad_s: f64,
}

/// Deviations of every satellite on the ring from equilibrium.
///
/// `dtheta_dev[i]` is the spacing deviation between satellite `i` and its
/// leader `i-1`; `omega_dev[i]` is its mean-motion deviation. On a closed
/// ring the spacing deviations sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingState {
    pub time_s: f64,
    pub dtheta_dev: Vec<f64>,
    pub omega_dev: Vec<f64>,
}

impl RingState {
    /// The equilibrium (all deviations zero) for `n` satellites.
    pub fn zeros(n: usize) -> Self {
        Self {
            time_s: 0.0,
            dtheta_dev: vec![0.0; n],
            omega_dev: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.omega_dev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_dev.is_empty()
    }

    /// `sum(dtheta_dev)`, zero up to rounding on a closed ring.
    pub fn telescoping_residual(&self) -> f64 {
        self.dtheta_dev.iter().sum()
    }

    /// Euclidean norm over both arrays.
    pub fn norm(&self) -> f64 {
        self.dtheta_dev
            .iter()
            .chain(&self.omega_dev)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.dtheta_dev.iter().chain(&self.omega_dev).all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omega_dev.len();
        if n < 2 || self.dtheta_dev.len() != n {
            return domain(format!(
                "ring state needs two arrays of equal length >= 2, got {} and {}",
                self.dtheta_dev.len(),
                n
            ));
        }
        let scale = self
            .dtheta_dev
            .iter()
            .fold(1.0f64, |m, v| m.max(v.abs()));
        if self.telescoping_residual().abs() > 1e-12 * n as f64 * scale {
            return domain(format!(
                "spacing deviations sum to {:e}, expected 0",
                self.telescoping_residual()
            ));
        }
        Ok(())
    }
}

fn check_altitude(altitude_km: f64) -> Result<()> {
    if !(MIN_ALTITUDE_KM..=MAX_ALTITUDE_KM).contains(&altitude_km) {
        return Err(Error::Domain(format!(
            "altitude {altitude_km} km outside [{MIN_ALTITUDE_KM}, {MAX_ALTITUDE_KM}]"
        )));
    }
    Ok(())
}

/// Two-body mean motion `sqrt(mu / a^3)` of a circular orbit at `altitude_km`.
pub fn mean_motion(altitude_km: f64) -> Result<f64> {
    check_altitude(altitude_km)?;
    Ok(mean_motion_at_radius(EARTH_RADIUS_KM + altitude_km))
}

/// Mean motion for an arbitrary semi-major axis, no altitude band check.
pub fn mean_motion_at_radius(semi_major_axis_km: f64) -> f64 {
    (MU_EARTH_KM3_S2 / semi_major_axis_km.powi(3)).sqrt()
}

pub fn equilibrium(config: &ShellConfig) -> Result<EquilibriumState> {
    config.validate()?;
    Ok(EquilibriumState {
        spacing_rad: TAU / f64::from(config.sats_per_orbit),
        mean_motion_rad_s: mean_motion(config.altitude_km)?,
    })
}

/// Phase of satellite `slot` in plane `plane`, expressed as an integer
/// numerator over `num_orbits * sats_per_orbit` (one full turn).
///
/// Slot k in plane p sits at `2*pi*k/S + 2*pi*F*p/(P*S)`, which is
/// `2*pi * (k*P + F*p) / (P*S)`.
pub fn walker_phase_index(config: &ShellConfig, plane: u32, slot: u32) -> u64 {
    let p = u64::from(config.num_orbits);
    let total = config.total_sats();
    (u64::from(slot) * p + u64::from(config.phase_factor_f) * u64::from(plane)) % total
}

/// Walker phase of a satellite in radians, in `[0, 2*pi)`.
pub fn walker_phase(config: &ShellConfig, plane: u32, slot: u32) -> f64 {
    TAU * walker_phase_index(config, plane, slot) as f64 / config.total_sats() as f64
}

/// Minimum in-plane phase separation over all distinct satellite pairs in
/// the shell, measured on the circle (the shorter way round).
///
/// A shell with a single satellite has no pairs; the full turn is returned.
pub fn walker_min_spacing(config: &ShellConfig) -> Result<f64> {
    config.validate()?;
    let total = config.total_sats();
    if total < 2 {
        return Ok(TAU);
    }
    let mut phases: Vec<u64> = (0..config.num_orbits)
        .flat_map(|plane| (0..config.sats_per_orbit).map(move |slot| (plane, slot)))
        .map(|(plane, slot)| walker_phase_index(config, plane, slot))
        .collect();
    phases.sort_unstable();

    let wrap = total - phases[phases.len() - 1] + phases[0];
    let min_gap = phases
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(wrap, u64::min);
    let sym = min_gap.min(total - min_gap);
    Ok(TAU * sym as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn shell(p: u32, s: u32, f: u32) -> ShellConfig {
        ShellConfig::new(p, s, 550.0, 53.0, f).unwrap()
    }

    #[test]
    fn mean_motion_at_550_km() {
        // sqrt(398600.4418 / 6928.137^3), evaluated independently
        let expected = (398_600.441_8_f64 / (6_928.137_f64 * 6_928.137 * 6_928.137)).sqrt();
        let got = mean_motion(550.0).unwrap();
        assert!((got - expected).abs() < 1e-18);
        assert!((got - 1.0948e-3).abs() < 5e-8, "{got}");
    }

    #[test]
    fn mean_motion_scaling_law() {
        let a = 7_000.0;
        let ratio = mean_motion_at_radius(a) / mean_motion_at_radius(2.0 * a);
        assert!((ratio - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mean_motion_rejects_out_of_band() {
        assert!(matches!(mean_motion(2_500.0), Err(Error::Domain(_))));
        assert!(mean_motion(199.0).is_err());
    }

    #[test]
    fn equilibrium_spacing() {
        let eq = equilibrium(&shell(1, 4, 0)).unwrap();
        assert_eq!(eq.spacing_rad, FRAC_PI_2);

        let eq = equilibrium(&shell(72, 22, 1)).unwrap();
        assert!((eq.spacing_rad - 0.2856).abs() < 1e-4);
        assert!((eq.mean_motion_rad_s - 1.0948e-3).abs() < 5e-8);
        assert_eq!(eq.spacing_rad * 22.0, TAU);

        let eq = equilibrium(&shell(1, 1, 0)).unwrap();
        assert_eq!(eq.spacing_rad, TAU);
    }

    #[test]
    fn config_validation() {
        assert!(ShellConfig::new(0, 4, 550.0, 53.0, 0).is_err());
        assert!(ShellConfig::new(4, 0, 550.0, 53.0, 0).is_err());
        assert!(ShellConfig::new(4, 4, 150.0, 53.0, 0).is_err());
        assert!(ShellConfig::new(4, 4, 550.0, 53.0, 4).is_err());
        assert_eq!(shell(72, 22, 3).total_sats(), 1584);
    }

    #[test]
    fn single_orbit_uniform_spacing() {
        assert_eq!(walker_min_spacing(&shell(1, 4, 0)).unwrap(), FRAC_PI_2);
    }

    #[test]
    fn two_by_two_shell() {
        // phases 0, pi (plane 0) and pi/2, 3pi/2 (plane 1)
        assert_eq!(walker_min_spacing(&shell(2, 2, 1)).unwrap(), FRAC_PI_2);
        // F = 0 stacks both planes on the same phases
        assert_eq!(walker_min_spacing(&shell(2, 2, 0)).unwrap(), 0.0);
        assert!((walker_phase(&shell(2, 2, 1), 1, 1) - 1.5 * PI).abs() < 1e-15);
    }
}
