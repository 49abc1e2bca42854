//! Conjunction report CSV.
//!
//! Header: `object_a_id, object_b_id, tca_iso8601, pc, miss_distance_km`,
//! optionally followed by the conjunction-plane geometry `miss_x_km,
//! miss_y_km, sigma_x_km, sigma_y_km, combined_radius_km`. Rows need not be
//! in TCA order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{format_utc, parse_utc, row_err, Columns};
use crate::conjunction::{CdmRecord, ConjunctionGeometry};
use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["object_a_id", "object_b_id", "tca_iso8601", "pc", "miss_distance_km"];
pub const GEOMETRY_HEADER: [&str; 5] = [
    "miss_x_km",
    "miss_y_km",
    "sigma_x_km",
    "sigma_y_km",
    "combined_radius_km",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmBatch {
    pub records: Vec<CdmRecord>,
    /// Data rows (from 1) whose TCA is earlier than the row before.
    pub out_of_order_rows: Vec<usize>,
}

impl CdmBatch {
    pub fn is_chronological(&self) -> bool {
        self.out_of_order_rows.is_empty()
    }
}

pub fn parse_cdm<R: Read>(reader: R) -> Result<CdmBatch> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = Columns::new(rdr.headers()?, &HEADER)?;
    let has_geom = GEOMETRY_HEADER.iter().all(|c| cols.has(c));
    let mut records: Vec<CdmRecord> = Vec::new();
    let mut out_of_order_rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| row_err(row, e.to_string()))?;
        let parsed = (|| -> std::result::Result<CdmRecord, String> {
            let geometry = if has_geom {
                let vals: Vec<Option<f64>> = GEOMETRY_HEADER
                    .iter()
                    .map(|c| cols.opt_num(&rec, c))
                    .collect::<std::result::Result<_, _>>()?;
                match vals.as_slice() {
                    [Some(x), Some(y), Some(sx), Some(sy), Some(r)] => Some(ConjunctionGeometry {
                        miss_x_km: *x,
                        miss_y_km: *y,
                        sigma_x_km: *sx,
                        sigma_y_km: *sy,
                        combined_radius_km: *r,
                    }),
                    v if v.iter().all(Option::is_none) => None,
                    _ => return Err("geometry columns must be all present or all empty".into()),
                }
            } else {
                None
            };
            let r = CdmRecord {
                object_a_id: cols.num(&rec, "object_a_id")?,
                object_b_id: cols.num(&rec, "object_b_id")?,
                tca: parse_utc(cols.get(&rec, "tca_iso8601"))?,
                pc: cols.num(&rec, "pc")?,
                miss_distance_km: cols.num(&rec, "miss_distance_km")?,
                geometry,
            };
            r.validate().map_err(|e| match e {
                Error::Data(m) => m,
                other => other.to_string(),
            })?;
            Ok(r)
        })();
        let r = parsed.map_err(|m| row_err(row, m))?;
        if records.last().is_some_and(|prev| r.tca < prev.tca) {
            out_of_order_rows.push(row);
        }
        records.push(r);
    }
    if !out_of_order_rows.is_empty() {
        log::info!("conjunction reports not in TCA order at rows {out_of_order_rows:?}");
    }
    Ok(CdmBatch {
        records,
        out_of_order_rows,
    })
}

/// Writes the geometry columns only when some record carries geometry.
pub fn write_cdm<W: Write>(records: &[CdmRecord], writer: W) -> Result<()> {
    let with_geom = records.iter().any(|r| r.geometry.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = HEADER.to_vec();
    if with_geom {
        header.extend(GEOMETRY_HEADER);
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.object_a_id.to_string(),
            r.object_b_id.to_string(),
            format_utc(r.tca),
            format!("{:e}", r.pc),
            r.miss_distance_km.to_string(),
        ];
        if with_geom {
            match &r.geometry {
                Some(g) => row.extend(
                    [g.miss_x_km, g.miss_y_km, g.sigma_x_km, g.sigma_y_km, g.combined_radius_km].map(|v| v.to_string()),
                ),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::from)
}
