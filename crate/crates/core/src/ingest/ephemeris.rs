//! Ephemeris CSV.
//!
//! Header: `sat_id, epoch_iso8601, x_km, y_km, z_km, vx_km_s, vy_km_s,
//! vz_km_s, cxx, cyy, czz`. The three covariance columns are optional and
//! may be left empty. Row numbers in errors count data rows from 1.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{format_utc, parse_utc, row_err, Columns};
use crate::error::{Error, Result};

pub const HEADER: [&str; 11] = [
    "sat_id",
    "epoch_iso8601",
    "x_km",
    "y_km",
    "z_km",
    "vx_km_s",
    "vy_km_s",
    "vz_km_s",
    "cxx",
    "cyy",
    "czz",
];

pub const MIN_RADIUS_KM: f64 = 6_578.0;
pub const MAX_RADIUS_KM: f64 = 8_378.0;
pub const MIN_SPEED_KM_S: f64 = 6.0;
pub const MAX_SPEED_KM_S: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EphemerisRecord {
    pub sat_id: u32,
    pub epoch_s: f64,
    pub position_km: [f64; 3],
    pub velocity_km_s: [f64; 3],
    pub covariance_diag_km2: Option<[f64; 3]>,
}

pub(crate) fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl EphemerisRecord {
    pub fn radius_km(&self) -> f64 {
        norm(&self.position_km)
    }

    pub fn speed_km_s(&self) -> f64 {
        norm(&self.velocity_km_s)
    }

    /// Checks the LEO sanity band.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let r = self.radius_km();
        if !(MIN_RADIUS_KM..=MAX_RADIUS_KM).contains(&r) {
            return Err(format!("|position| = {r} km outside [{MIN_RADIUS_KM}, {MAX_RADIUS_KM}]"));
        }
        let v = self.speed_km_s();
        if !(MIN_SPEED_KM_S..=MAX_SPEED_KM_S).contains(&v) {
            return Err(format!("|velocity| = {v} km/s outside [{MIN_SPEED_KM_S}, {MAX_SPEED_KM_S}]"));
        }
        if let Some(c) = self.covariance_diag_km2 {
            if c.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(format!("covariance diagonal {c:?} must be finite and non-negative"));
            }
        }
        if !self.epoch_s.is_finite() {
            return Err("non-finite epoch".into());
        }
        Ok(())
    }
}

pub fn parse_ephemeris<R: Read>(reader: R) -> Result<Vec<EphemerisRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = Columns::new(rdr.headers()?, &HEADER[..8])?;
    let has_cov = HEADER[8..].iter().all(|c| cols.has(c));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| row_err(row, e.to_string()))?;
        let parsed = (|| -> std::result::Result<EphemerisRecord, String> {
            let f = |name: &str| cols.num::<f64>(&rec, name);
            let cov = if has_cov {
                match (cols.opt_num(&rec, "cxx")?, cols.opt_num(&rec, "cyy")?, cols.opt_num(&rec, "czz")?) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    (None, None, None) => None,
                    _ => return Err("covariance columns must be all present or all empty".into()),
                }
            } else {
                None
            };
            let r = EphemerisRecord {
                sat_id: cols.num(&rec, "sat_id")?,
                epoch_s: parse_utc(cols.get(&rec, "epoch_iso8601"))?,
                position_km: [f("x_km")?, f("y_km")?, f("z_km")?],
                velocity_km_s: [f("vx_km_s")?, f("vy_km_s")?, f("vz_km_s")?],
                covariance_diag_km2: cov,
            };
            r.validate()?;
            Ok(r)
        })();
        out.push(parsed.map_err(|m| row_err(row, m))?);
    }
    Ok(out)
}

pub fn write_ephemeris<W: Write>(records: &[EphemerisRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        let mut row = vec![r.sat_id.to_string(), format_utc(r.epoch_s)];
        row.extend(r.position_km.iter().chain(&r.velocity_km_s).map(f64::to_string));
        match r.covariance_diag_km2 {
            Some(c) => row.extend(c.iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "sat_id,epoch_iso8601,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s,cxx,cyy,czz\n";

    #[test]
    fn empty_body() {
        assert!(parse_ephemeris(HEAD.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn in_band_row_accepted() {
        let text = format!("{HEAD}44713,2024-01-01T00:00:00Z,7000,0,0,0,7.5,0,0.01,0.02,0.03\n");
        let recs = parse_ephemeris(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].sat_id, 44713);
        assert_eq!(recs[0].covariance_diag_km2, Some([0.01, 0.02, 0.03]));
    }

    #[test]
    fn fast_row_rejected_with_index() {
        let text = format!(
            "{HEAD}1,2024-01-01T00:00:00Z,7000,0,0,0,7.5,0,,,\n2,2024-01-01T00:00:00Z,7000,0,0,0,20,0,,,\n"
        );
        match parse_ephemeris(text.as_bytes()) {
            Err(Error::Row { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("velocity"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_number() {
        let text = "sat_id,epoch_iso8601,x_km\n1,2024-01-01T00:00:00Z,7000\n";
        assert!(matches!(parse_ephemeris(text.as_bytes()), Err(Error::Data(_))));
        let text = format!("{HEAD}1,2024-01-01T00:00:00Z,seven,0,0,0,7.5,0,,,\n");
        assert!(matches!(parse_ephemeris(text.as_bytes()), Err(Error::Row { row: 1, .. })));
    }

    #[test]
    fn covariance_columns_optional() {
        let text = "sat_id,epoch_iso8601,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s\n1,2024-01-01T00:00:00Z,7000,0,0,0,7.5,0\n";
        let recs = parse_ephemeris(text.as_bytes()).unwrap();
        assert_eq!(recs[0].covariance_diag_km2, None);
    }

    #[test]
    fn write_then_parse() {
        let recs = vec![
            EphemerisRecord {
                sat_id: 7,
                epoch_s: 1_704_067_200.5,
                position_km: [6_900.123_456_789, -12.5, 100.0],
                velocity_km_s: [0.1, 7.6, -0.2],
                covariance_diag_km2: None,
            },
            EphemerisRecord {
                sat_id: 8,
                epoch_s: 1_704_067_260.0,
                position_km: [0.0, 7_100.0, 1.0 / 3.0],
                velocity_km_s: [-7.4, 0.0, 0.3],
                covariance_diag_km2: Some([1e-3, 2e-3, 0.0]),
            },
        ];
        let mut buf = Vec::new();
        write_ephemeris(&recs, &mut buf).unwrap();
        assert_eq!(parse_ephemeris(buf.as_slice()).unwrap(), recs);
    }
}
