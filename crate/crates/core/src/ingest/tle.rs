//! Fixed-column two-line element sets.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub const LINE_LEN: usize = 69;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TleError {
    #[error("line {line}: expected {LINE_LEN} characters, found {found}")]
    Length { line: u8, found: usize },
    #[error("line {line}: expected line number '{line}' in column 1, found {found:?}")]
    LineNumber { line: u8, found: char },
    #[error("line {line}: checksum mismatch, expected {expected}, found {found}")]
    Checksum { line: u8, expected: u8, found: char },
    #[error("line {line}: cannot parse {field} from {text:?}")]
    Field { line: u8, field: &'static str, text: String },
    #[error("catalog numbers differ between lines: {line1} vs {line2}")]
    CatalogMismatch { line1: u32, line2: u32 },
    #[error("expected two element lines, found {0}")]
    LineCount(usize),
    #[error("field {field} value {value} cannot be written in its columns")]
    Unrepresentable { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TleRecord {
    pub norad_id: u32,
    pub classification: char,
    /// Launch year, number and piece, as the 8 raw columns.
    pub intl_designator: String,
    /// Four-digit epoch year.
    pub epoch_year: u16,
    /// Fractional day of year, 1.0 being January 1st 00:00 UTC.
    pub epoch_day: f64,
    /// First derivative of mean motion divided by two, rev/day².
    pub mean_motion_dot: f64,
    /// Second derivative of mean motion divided by six, rev/day³.
    pub mean_motion_ddot: f64,
    pub bstar: f64,
    pub ephemeris_type: char,
    pub element_set: u16,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub eccentricity: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    pub mean_motion_rev_day: f64,
    pub rev_number: u32,
    pub line1_checksum: u8,
    pub line2_checksum: u8,
}

impl TleRecord {
    pub fn epoch(&self) -> DateTime<Utc> {
        let jan1 = NaiveDate::from_ymd_opt(i32::from(self.epoch_year), 1, 1)
            .expect("valid year")
            .and_hms_opt(0, 0, 0)
            .expect("midnight")
            .and_utc();
        let micros = ((self.epoch_day - 1.0) * 86_400e6).round() as i64;
        jan1 + Duration::microseconds(micros)
    }

    /// Epoch as UTC seconds since the Unix epoch.
    pub fn epoch_unix_s(&self) -> f64 {
        let e = self.epoch();
        e.timestamp() as f64 + f64::from(e.timestamp_subsec_micros()) * 1e-6
    }
}

/// `(sum of digits + count of '-') mod 10` over the first 68 columns.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .chars()
        .take(LINE_LEN - 1)
        .map(|c| match c {
            '0'..='9' => c as u32 - '0' as u32,
            '-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

struct Cols<'a> {
    line: u8,
    text: &'a str,
}

impl Cols<'_> {
    /// 1-based inclusive column range.
    fn raw(&self, from: usize, to: usize) -> &str {
        &self.text[from - 1..to]
    }

    fn parse<T: std::str::FromStr>(&self, from: usize, to: usize, field: &'static str) -> Result<T, TleError> {
        let raw = self.raw(from, to);
        raw.trim().parse().map_err(|_| self.err(field, raw))
    }

    fn err(&self, field: &'static str, raw: &str) -> TleError {
        TleError::Field {
            line: self.line,
            field,
            text: raw.to_string(),
        }
    }

    fn char_at(&self, col: usize) -> char {
        self.text.as_bytes()[col - 1] as char
    }

    /// `[+-]ddddd[+-]d` with an assumed leading decimal point.
    fn exp_field(&self, from: usize, to: usize, field: &'static str) -> Result<f64, TleError> {
        let raw = self.raw(from, to);
        let t = raw.trim();
        if t.is_empty() {
            return Ok(0.0);
        }
        let split = t
            .char_indices()
            .skip(1)
            .filter(|&(_, c)| c == '-' || c == '+')
            .last()
            .map(|(i, _)| i)
            .ok_or_else(|| self.err(field, raw))?;
        let (mant, exp) = t.split_at(split);
        let (sign, digits) = match mant.as_bytes()[0] {
            b'-' => (-1.0, &mant[1..]),
            b'+' => (1.0, &mant[1..]),
            _ => (1.0, mant),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(field, raw));
        }
        let m: f64 = format!("0.{digits}").parse().map_err(|_| self.err(field, raw))?;
        let e: i32 = exp.parse().map_err(|_| self.err(field, raw))?;
        Ok(sign * format!("{m}e{e}").parse::<f64>().map_err(|_| self.err(field, raw))?)
    }

    /// Decimal with an optional sign and an optional leading zero, e.g. `-.00002182`.
    fn decimal(&self, from: usize, to: usize, field: &'static str) -> Result<f64, TleError> {
        let raw = self.raw(from, to);
        let t = raw.trim();
        let fixed = if let Some(rest) = t.strip_prefix("-.") {
            format!("-0.{rest}")
        } else if let Some(rest) = t.strip_prefix("+.") {
            format!("0.{rest}")
        } else if let Some(rest) = t.strip_prefix('.') {
            format!("0.{rest}")
        } else {
            t.to_string()
        };
        fixed.parse().map_err(|_| self.err(field, raw))
    }
}

fn check_line(text: &str, line: u8) -> Result<Cols<'_>, TleError> {
    let len = text.chars().count();
    if len != LINE_LEN || !text.is_ascii() {
        return Err(TleError::Length { line, found: len });
    }
    let first = text.as_bytes()[0] as char;
    if first != char::from(b'0' + line) {
        return Err(TleError::LineNumber { line, found: first });
    }
    let found = text.as_bytes()[LINE_LEN - 1] as char;
    let expected = checksum(text);
    if found.to_digit(10) != Some(u32::from(expected)) {
        return Err(TleError::Checksum { line, expected, found });
    }
    Ok(Cols { line, text })
}

/// Parses one element set. An optional leading title line is skipped.
pub fn parse_tle(two_lines: &str) -> Result<TleRecord, TleError> {
    let lines: Vec<&str> = two_lines
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .collect();
    let (l1, l2) = match lines.as_slice() {
        [a, b] => (*a, *b),
        [_title, a, b] => (*a, *b),
        other => return Err(TleError::LineCount(other.len())),
    };
    parse_lines(l1, l2)
}

pub fn parse_lines(l1: &str, l2: &str) -> Result<TleRecord, TleError> {
    let c1 = check_line(l1, 1)?;
    let c2 = check_line(l2, 2)?;

    let norad_id: u32 = c1.parse(3, 7, "catalog number")?;
    let norad2: u32 = c2.parse(3, 7, "catalog number")?;
    if norad_id != norad2 {
        return Err(TleError::CatalogMismatch {
            line1: norad_id,
            line2: norad2,
        });
    }
    let yy: u16 = c1.parse(19, 20, "epoch year")?;
    let epoch_year = if yy < 57 { 2000 + yy } else { 1900 + yy };
    let epoch_day: f64 = c1.parse(21, 32, "epoch day")?;
    if !(1.0..367.0).contains(&epoch_day) {
        return Err(c1.err("epoch day", c1.raw(21, 32)));
    }
    let element_set = match c1.raw(65, 68).trim() {
        "" => 0,
        s => s.parse().map_err(|_| c1.err("element set", c1.raw(65, 68)))?,
    };

    let ecc_raw = c2.raw(27, 33);
    if !ecc_raw.trim().bytes().all(|b| b.is_ascii_digit()) || ecc_raw.trim().is_empty() {
        return Err(c2.err("eccentricity", ecc_raw));
    }
    let eccentricity: f64 = format!("0.{}", ecc_raw.trim()).parse().map_err(|_| c2.err("eccentricity", ecc_raw))?;

    Ok(TleRecord {
        norad_id,
        classification: c1.char_at(8),
        intl_designator: c1.raw(10, 17).trim_end().to_string(),
        epoch_year,
        epoch_day,
        mean_motion_dot: c1.decimal(34, 43, "mean motion derivative")?,
        mean_motion_ddot: c1.exp_field(45, 52, "mean motion second derivative")?,
        bstar: c1.exp_field(54, 61, "bstar")?,
        ephemeris_type: c1.char_at(63),
        element_set,
        inclination_deg: c2.parse(9, 16, "inclination")?,
        raan_deg: c2.parse(18, 25, "right ascension")?,
        eccentricity,
        arg_perigee_deg: c2.parse(35, 42, "argument of perigee")?,
        mean_anomaly_deg: c2.parse(44, 51, "mean anomaly")?,
        mean_motion_rev_day: c2.parse(53, 63, "mean motion")?,
        rev_number: match c2.raw(64, 68).trim() {
            "" => 0,
            s => s.parse().map_err(|_| c2.err("revolution number", c2.raw(64, 68)))?,
        },
        line1_checksum: checksum(l1),
        line2_checksum: checksum(l2),
    })
}

/// Parses every element set in a text, skipping title lines.
pub fn parse_tle_file(text: &str) -> Result<Vec<TleRecord>, TleError> {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].starts_with("1 ") && i + 1 < lines.len() && lines[i + 1].starts_with("2 ") {
            out.push(parse_lines(lines[i], lines[i + 1])?);
            i += 2;
        } else if lines[i].starts_with("1 ") || lines[i].starts_with("2 ") {
            return Err(TleError::LineCount(1));
        } else {
            i += 1;
        }
    }
    Ok(out)
}

fn unrepresentable(field: &'static str, value: f64) -> TleError {
    TleError::Unrepresentable { field, value }
}

/// ` .dddddddd` / `-.dddddddd`.
fn fmt_decimal(v: f64) -> Result<String, TleError> {
    let body = format!("{:.8}", v.abs());
    let digits = body.strip_prefix('0').filter(|_| v.abs() < 1.0).ok_or(unrepresentable("mean motion derivative", v))?;
    let sign = if v < 0.0 && digits != ".00000000" { '-' } else { ' ' };
    Ok(format!("{sign}{digits}"))
}

/// ` ddddd-e` with a normalized mantissa; zero is ` 00000+0`.
fn fmt_exp(v: f64, field: &'static str) -> Result<String, TleError> {
    let sign = if v < 0.0 { '-' } else { ' ' };
    let a = v.abs();
    if a == 0.0 {
        return Ok(" 00000+0".into());
    }
    let mut e = a.log10().floor() as i32 + 1;
    let mut m = (a / 10f64.powi(e) * 1e5).round() as i64;
    if m >= 100_000 {
        m /= 10;
        e += 1;
    }
    if !(-9..=9).contains(&e) {
        return Err(unrepresentable(field, v));
    }
    let es = if e < 0 { '-' } else { '+' };
    Ok(format!("{sign}{m:05}{es}{}", e.abs()))
}

fn fmt_angle(v: f64, field: &'static str) -> Result<String, TleError> {
    let s = format!("{v:8.4}");
    if s.len() != 8 || v < 0.0 {
        return Err(unrepresentable(field, v));
    }
    Ok(s)
}

/// Writes the two 69-column lines with freshly computed checksums.
pub fn emit_tle(r: &TleRecord) -> Result<(String, String), TleError> {
    if r.norad_id > 99_999 {
        return Err(unrepresentable("catalog number", f64::from(r.norad_id)));
    }
    let yy = r.epoch_year % 100;
    let day = format!("{:012.8}", r.epoch_day);
    if day.len() != 12 {
        return Err(unrepresentable("epoch day", r.epoch_day));
    }
    let designator = format!("{:<8}", r.intl_designator);
    if designator.len() != 8 {
        return Err(TleError::Field {
            line: 1,
            field: "international designator",
            text: r.intl_designator.clone(),
        });
    }
    if r.element_set > 9_999 {
        return Err(unrepresentable("element set", f64::from(r.element_set)));
    }
    let mut l1 = format!(
        "1 {:05}{} {} {:02}{} {} {} {} {} {:>4}",
        r.norad_id,
        r.classification,
        designator,
        yy,
        day,
        fmt_decimal(r.mean_motion_dot)?,
        fmt_exp(r.mean_motion_ddot, "mean motion second derivative")?,
        fmt_exp(r.bstar, "bstar")?,
        r.ephemeris_type,
        r.element_set,
    );
    l1.push(char::from(b'0' + checksum(&l1)));

    let ecc = (r.eccentricity * 1e7).round();
    if !(0.0..1e7).contains(&ecc) {
        return Err(unrepresentable("eccentricity", r.eccentricity));
    }
    let mm = format!("{:11.8}", r.mean_motion_rev_day);
    if mm.len() != 11 {
        return Err(unrepresentable("mean motion", r.mean_motion_rev_day));
    }
    if r.rev_number > 99_999 {
        return Err(unrepresentable("revolution number", f64::from(r.rev_number)));
    }
    let mut l2 = format!(
        "2 {:05} {} {} {:07} {} {} {}{:>5}",
        r.norad_id,
        fmt_angle(r.inclination_deg, "inclination")?,
        fmt_angle(r.raan_deg, "right ascension")?,
        ecc as u32,
        fmt_angle(r.arg_perigee_deg, "argument of perigee")?,
        fmt_angle(r.mean_anomaly_deg, "mean anomaly")?,
        mm,
        r.rev_number,
    );
    l2.push(char::from(b'0' + checksum(&l2)));
    debug_assert_eq!(l1.len(), LINE_LEN);
    debug_assert_eq!(l2.len(), LINE_LEN);
    Ok((l1, l2))
}
