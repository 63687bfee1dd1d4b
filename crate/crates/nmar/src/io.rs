//! Dataset, prediction and risk-table CSV files.
//!
//! Datasets use the header `x1,...,xd,y,delta`; `y` is an empty field when
//! `delta = 0`. Floats are written in the shortest form that parses back to
//! the same bits, so a write/read round trip is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nmar_core::cover::PhiCover;
use nmar_core::data::{Dataset, Observation};

use crate::{Error, Result};

/// Data row numbers in messages are 1-based and exclude the header.
fn row_error(row: usize, msg: impl std::fmt::Display) -> Error {
    Error::Runtime(format!("row {row}: {msg}"))
}

fn parse_f64(field: &str, row: usize, name: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| row_error(row, format!("{name} = '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(row_error(row, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Reads a dataset; `z_coords` (0-based) and the response bound are not
/// stored in the file.
pub fn read_dataset(reader: impl Read, z_coords: &[usize], bound: f64) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Runtime(format!("header: {e}")))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let d = cols.len().checked_sub(2).filter(|&d| d > 0).ok_or_else(|| Error::Runtime("header: need x1..xd,y,delta".into()))?;
    let expected: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["y".into(), "delta".into()]).collect();
    if cols != expected {
        return Err(Error::Runtime(format!("header: expected {}", expected.join(","))));
    }
    let mut observations = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| row_error(row, e))?;
        if rec.len() != d + 2 {
            return Err(row_error(row, format!("expected {} fields, got {}", d + 2, rec.len())));
        }
        let x = (0..d).map(|j| parse_f64(&rec[j], row, &format!("x{}", j + 1))).collect::<Result<Vec<_>>>()?;
        let y_field = rec[d].trim();
        let obs = match rec[d + 1].trim() {
            "1" => {
                if y_field.is_empty() {
                    return Err(row_error(row, "delta = 1 but y is empty"));
                }
                let y = parse_f64(y_field, row, "y")?;
                if y.abs() > bound {
                    return Err(row_error(row, format!("|y| = {} exceeds L = {bound}", y.abs())));
                }
                Observation::observed(x, y)
            }
            "0" => {
                if !y_field.is_empty() {
                    return Err(row_error(row, "delta = 0 but y is present"));
                }
                Observation::missing(x)
            }
            other => return Err(row_error(row, format!("delta = '{other}' is not 0 or 1"))),
        };
        observations.push(obs);
    }
    Ok(Dataset::new(observations, d, z_coords.to_vec(), bound)?)
}

pub fn read_csv(path: &Path, z_coords: &[usize], bound: f64) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?;
    read_dataset(file, z_coords, bound)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Runtime(e.to_string())
}

pub fn write_dataset(writer: impl Write, ds: &Dataset) -> Result<()> {
    let mut w = csv_writer(writer);
    let d = ds.dim();
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["y".into(), "delta".into()]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for obs in ds.observations() {
        let mut rec: Vec<String> = obs.x.iter().map(f64::to_string).collect();
        rec.push(obs.y.map(|y| y.to_string()).unwrap_or_default());
        rec.push(obs.delta().to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_dataset(File::create(path)?, ds)
}

/// `x1,...,xd,m_hat` for row-major queries.
pub fn write_predictions(writer: impl Write, xs: &[f64], d: usize, preds: &[f64]) -> Result<()> {
    let mut w = csv_writer(writer);
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["m_hat".into()]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (x, m) in xs.chunks_exact(d).zip(preds) {
        let rec: Vec<String> = x.iter().chain([m]).map(f64::to_string).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `phi_index,gamma_or_tag,risk[,variant]`.
pub fn write_risk_table(writer: impl Write, cover: &PhiCover, risks: &[f64], variant: Option<&str>) -> Result<()> {
    let mut w = csv_writer(writer);
    let mut header = vec!["phi_index", "gamma_or_tag", "risk"];
    if variant.is_some() {
        header.push("variant");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (k, (phi, r)) in cover.members().iter().zip(risks).enumerate() {
        let mut rec = vec![k.to_string(), phi.tag(), r.to_string()];
        rec.extend(variant.map(str::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
