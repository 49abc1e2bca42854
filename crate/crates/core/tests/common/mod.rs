//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use megacon::ingest::tle::{emit_tle, TleRecord};
use rand::Rng;

fn decimal(rng: &mut impl Rng, int_lo: u32, int_hi: u32, places: u32) -> f64 {
    let int = rng.random_range(int_lo..int_hi);
    let frac = rng.random_range(0..10u64.pow(places));
    format!("{int}.{frac:0w$}", w = places as usize).parse().unwrap()
}

fn packed_exp(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.1) {
        return 0.0;
    }
    let m = rng.random_range(10_000..100_000);
    let e = rng.random_range(-9..=9);
    let sign = if rng.random_bool(0.5) { "-" } else { "" };
    format!("{sign}0.{m:05}e{e}").parse().unwrap()
}

/// A record whose every field is exactly representable in its columns, so
/// emit followed by parse must give it back unchanged.
pub fn random_tle(rng: &mut impl Rng) -> TleRecord {
    let launch_yy = rng.random_range(0..100);
    let piece: String = (0..rng.random_range(1..=3))
        .map(|_| char::from(b'A' + rng.random_range(0..26u8)))
        .collect();
    let dot = decimal(rng, 0, 1, 8);
    let mut r = TleRecord {
        norad_id: rng.random_range(1..=99_999),
        classification: ['U', 'C', 'S'][rng.random_range(0..3)],
        intl_designator: format!("{launch_yy:02}{:03}{piece}", rng.random_range(1..1000)),
        epoch_year: rng.random_range(1957..=2056),
        epoch_day: decimal(rng, 1, 366, 8),
        mean_motion_dot: if rng.random_bool(0.5) { -dot } else { dot },
        mean_motion_ddot: packed_exp(rng),
        bstar: packed_exp(rng),
        ephemeris_type: '0',
        element_set: rng.random_range(0..=9_999),
        inclination_deg: decimal(rng, 0, 180, 4),
        raan_deg: decimal(rng, 0, 360, 4),
        eccentricity: f64::from(rng.random_range(0..10_000_000u32)) / 1e7,
        arg_perigee_deg: decimal(rng, 0, 360, 4),
        mean_anomaly_deg: decimal(rng, 0, 360, 4),
        mean_motion_rev_day: decimal(rng, 1, 18, 8),
        rev_number: rng.random_range(0..=99_999),
        line1_checksum: 0,
        line2_checksum: 0,
    };
    let ecc_text = format!("0.{:07}", (r.eccentricity * 1e7).round() as u32);
    r.eccentricity = ecc_text.parse().unwrap();
    let (l1, l2) = emit_tle(&r).expect("generated record is representable");
    r.line1_checksum = megacon::ingest::tle::checksum(&l1);
    r.line2_checksum = megacon::ingest::tle::checksum(&l2);
    r
}
