//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use holotel_core::{CompensationProfile, CovarianceTable, EllipseRow, GridSpec, ScanRow};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes a header and rows; numbers use the shortest round-trip form.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn ellipse_rows(rows: &[EllipseRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                num(r.omega),
                num(r.psi),
                num(r.r),
                num(r.major),
                num(r.minor),
            ]
        })
        .collect()
}

pub const ELLIPSE_HEADER: [&str; 5] = ["omega", "psi", "r", "major", "minor"];

pub fn scan_rows(rows: &[ScanRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![num(r.delta), num(r.t_window), num(r.c_diag)])
        .collect()
}

pub const SCAN_HEADER: [&str; 3] = ["delta", "t_window", "c_diag"];

/// `j,i,jp,ip,c,stderr`; the error column is empty for quadrature tables.
pub fn covariance_rows(table: &CovarianceTable) -> Vec<Vec<String>> {
    table
        .entries
        .iter()
        .map(|e| {
            vec![
                e.pair.a.pixel.to_string(),
                e.pair.a.bin.to_string(),
                e.pair.b.pixel.to_string(),
                e.pair.b.bin.to_string(),
                num(e.value),
                e.stderr.map(num).unwrap_or_default(),
            ]
        })
        .collect()
}

pub const COVARIANCE_HEADER: [&str; 6] = ["j", "i", "jp", "ip", "c", "stderr"];

/// `j_x,j_y,c_diag,fidelity` per pixel.
pub fn fidelity_rows(grid: &GridSpec, c_diag: f64, fidelity: &[f64]) -> Vec<Vec<String>> {
    fidelity
        .iter()
        .enumerate()
        .map(|(p, f)| {
            let (x, y) = grid.pixel_xy(p);
            vec![x.to_string(), y.to_string(), num(c_diag), num(*f)]
        })
        .collect()
}

pub const FIDELITY_HEADER: [&str; 4] = ["j_x", "j_y", "c_diag", "fidelity"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    coeffs: Vec<f64>,
}

pub fn write_profile(path: &Path, profile: &CompensationProfile) -> Result<()> {
    let body = ProfileFile {
        coeffs: profile.coeffs().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&body).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_profile(path: &Path) -> Result<CompensationProfile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let body: ProfileFile = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::config(format!("profile.{}", e.path()), e.inner().to_string()))?;
    Ok(CompensationProfile::new(body.coeffs)?)
}
