//! Readers and writers for tracking data, plus the analysis pipeline that
//! turns ephemerides and conjunction reports into maneuver events, policy
//! estimates and cascade chains.

pub mod cdm;
pub mod ephemeris;
pub mod pipeline;
pub mod tle;

use std::collections::HashMap;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};

pub use cdm::{parse_cdm, write_cdm, CdmBatch};
pub use ephemeris::{parse_ephemeris, write_ephemeris, EphemerisRecord};
pub use pipeline::{
    detect_external_maneuvers, extract_cascade_chains, infer_policy, semi_major_axis, CascadeChain, ChainHop,
    ChainOptions, DetectOptions, ExternalManeuver, PolicyEstimate, RingTrace,
};
pub use tle::{emit_tle, parse_tle, TleError, TleRecord};

/// Parses an ISO-8601 timestamp into UTC seconds since the Unix epoch.
/// A timestamp without offset is taken as UTC.
pub fn parse_utc(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    let dt: DateTime<Utc> = match DateTime::parse_from_rfc3339(t) {
        Ok(d) => d.with_timezone(&Utc),
        Err(_) => NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S%.f")
            .map_err(|e| format!("bad ISO-8601 timestamp {t:?}: {e}"))?
            .and_utc(),
    };
    Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
}

/// Formats UTC seconds as RFC 3339 with microsecond precision.
pub fn format_utc(epoch_s: f64) -> String {
    let micros = (epoch_s * 1e6).round() as i64;
    DateTime::from_timestamp_micros(micros)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Micros, true)
}

/// Column lookup by header name.
pub(crate) struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    pub(crate) fn new(headers: &csv::StringRecord, required: &[&str]) -> Result<Self> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !index.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("missing columns: {}", missing.join(", "))));
        }
        Ok(Self { index })
    }

    pub(crate) fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Trimmed cell text; empty when the column is absent.
    pub(crate) fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> &'r str {
        self.index
            .get(name)
            .and_then(|&i| rec.get(i))
            .map_or("", str::trim)
    }

    pub(crate) fn num<T: std::str::FromStr>(&self, rec: &csv::StringRecord, name: &str) -> std::result::Result<T, String> {
        let raw = self.get(rec, name);
        raw.parse().map_err(|_| format!("column {name}: cannot parse {raw:?}"))
    }

    pub(crate) fn opt_num(&self, rec: &csv::StringRecord, name: &str) -> std::result::Result<Option<f64>, String> {
        match self.get(rec, name) {
            "" => Ok(None),
            raw => raw
                .parse()
                .map(Some)
                .map_err(|_| format!("column {name}: cannot parse {raw:?}")),
        }
    }
}

pub(crate) fn row_err(row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        row,
        message: message.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utc_round_trip() {
        let t = parse_utc("2024-01-01T12:00:00.250000Z").unwrap();
        assert_eq!(t, 1_704_110_400.25);
        assert_eq!(format_utc(t), "2024-01-01T12:00:00.250000Z");
        assert_eq!(parse_utc("2024-01-01T12:00:00").unwrap(), 1_704_110_400.0);
        assert_eq!(parse_utc("2024-01-01T13:00:00+01:00").unwrap(), 1_704_110_400.0);
        assert!(parse_utc("yesterday").is_err());
    }
}
