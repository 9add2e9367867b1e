//! On-disk formats. CSV files have a header row, '.' decimals and LF line
//! ends; JSON documents carry `schema_version` and readers refuse any other
//! version. CSV headers are checked column by column on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bayes_filter::{AttitudeSample, FilterHistory, FilterRecord, GyroSample};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matrix_fisher::DensityGrid;
use crate::pendulum::TrueState;
use crate::so3::{from_row_major, row_major, Rotation};
use crate::unscented::SigmaSet;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRUTH_FILE: &str = "truth.csv";
pub const GYRO_FILE: &str = "gyro.csv";
pub const ATTITUDE_FILE: &str = "attitude.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SAMPLES_FILE: &str = "samples.csv";

const R_COLS: [&str; 9] = ["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"];
const M_COLS: [&str; 9] = ["m11", "m12", "m13", "m21", "m22", "m23", "m31", "m32", "m33"];
const F_COLS: [&str; 9] = ["f11", "f12", "f13", "f21", "f22", "f23", "f31", "f32", "f33"];

fn header(parts: &[&[&str]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().map(|s| s.to_string())).collect()
}

pub fn truth_header() -> Vec<String> {
    header(&[&["t"], &R_COLS, &["omega1", "omega2", "omega3"]])
}

pub fn gyro_header() -> Vec<String> {
    header(&[&["t", "wx", "wy", "wz"]])
}

pub fn attitude_header() -> Vec<String> {
    header(&[&["t"], &R_COLS])
}

pub fn samples_header() -> Vec<String> {
    header(&[&R_COLS])
}

pub fn history_header() -> Vec<String> {
    header(&[
        &["t", "error_deg", "s1", "s2", "s3", "inv_s1", "inv_s2", "inv_s3"],
        &M_COLS,
        &F_COLS,
        &["updated"],
    ])
}

pub fn grid_header() -> Vec<String> {
    header(&[&["lat", "lon", "density"]])
}

pub fn sigma_header() -> Vec<String> {
    header(&[&["point", "axis", "x", "y", "z", "lat", "lon"]])
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes a CSV with the given header; each row must match its width.
pub fn write_csv(path: &Path, head: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(head).map_err(|e| io_err(path, e))?;
    for row in rows {
        debug_assert_eq!(row.len(), head.len());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a CSV whose header must equal `head`; returns raw string rows.
pub fn read_csv(path: &Path, head: &[String]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let got = r.headers().map_err(|e| io_err(path, e))?.clone();
    if got.len() != head.len() || got.iter().zip(head).any(|(a, b)| a != b) {
        return Err(Error::Format(format!(
            "{}: unexpected header '{}' (expected '{}')",
            path.display(),
            got.iter().collect::<Vec<_>>().join(","),
            head.join(",")
        )));
    }
    r.records()
        .map(|rec| rec.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

fn field(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<f64> {
    let s = rec.get(i).unwrap_or("");
    s.trim().parse::<f64>().map_err(|_| {
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        Error::Format(format!("{}:{line}: column {} is not a number: '{s}'", path.display(), i + 1))
    })
}

fn fields<const N: usize>(path: &Path, rec: &csv::StringRecord, start: usize) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for (k, v) in out.iter_mut().enumerate() {
        *v = field(path, rec, start + k)?;
    }
    Ok(out)
}

fn rotation(path: &Path, m: [f64; 9]) -> Result<Rotation> {
    Rotation::from_matrix(from_row_major(&m))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn push_matrix(row: &mut Vec<String>, m: &Matrix3<f64>) {
    row.extend(row_major(m).iter().map(|x| num(*x)));
}

pub fn write_truth(path: &Path, states: &[(f64, TrueState)]) -> Result<()> {
    let rows = states.iter().map(|(t, s)| {
        let mut row = vec![num(*t)];
        push_matrix(&mut row, s.r.matrix());
        row.extend(s.omega.iter().map(|x| num(*x)));
        row
    });
    write_csv(path, &truth_header(), rows)
}

pub fn read_truth(path: &Path) -> Result<Vec<(f64, TrueState)>> {
    read_csv(path, &truth_header())?
        .iter()
        .map(|rec| {
            let t = field(path, rec, 0)?;
            let r = rotation(path, fields::<9>(path, rec, 1)?)?;
            let w = fields::<3>(path, rec, 10)?;
            Ok((t, TrueState { r, omega: Vector3::from(w) }))
        })
        .collect()
}

pub fn write_gyro(path: &Path, samples: &[GyroSample]) -> Result<()> {
    let rows = samples.iter().map(|g| {
        let mut row = vec![num(g.t)];
        row.extend(g.omega.iter().map(|x| num(*x)));
        row
    });
    write_csv(path, &gyro_header(), rows)
}

pub fn read_gyro(path: &Path) -> Result<Vec<GyroSample>> {
    read_csv(path, &gyro_header())?
        .iter()
        .map(|rec| {
            let [t, x, y, z] = fields::<4>(path, rec, 0)?;
            Ok(GyroSample { t, omega: Vector3::new(x, y, z) })
        })
        .collect()
}

pub fn write_attitude(path: &Path, samples: &[AttitudeSample]) -> Result<()> {
    let rows = samples.iter().map(|a| {
        let mut row = vec![num(a.t)];
        push_matrix(&mut row, a.r.matrix());
        row
    });
    write_csv(path, &attitude_header(), rows)
}

pub fn read_attitude(path: &Path) -> Result<Vec<AttitudeSample>> {
    read_csv(path, &attitude_header())?
        .iter()
        .map(|rec| {
            let t = field(path, rec, 0)?;
            let r = rotation(path, fields::<9>(path, rec, 1)?)?;
            Ok(AttitudeSample { t, r })
        })
        .collect()
}

pub fn write_samples(path: &Path, samples: &[Rotation]) -> Result<()> {
    let rows = samples.iter().map(|r| {
        let mut row = Vec::with_capacity(9);
        push_matrix(&mut row, r.matrix());
        row
    });
    write_csv(path, &samples_header(), rows)
}

pub fn read_samples(path: &Path) -> Result<Vec<Rotation>> {
    read_csv(path, &samples_header())?
        .iter()
        .map(|rec| rotation(path, fields::<9>(path, rec, 0)?))
        .collect()
}

pub fn write_history(path: &Path, history: &FilterHistory) -> Result<()> {
    let rows = history.records.iter().map(|r| {
        let mut row = vec![num(r.t), r.error_deg.map(num).unwrap_or_default()];
        row.extend(r.s.iter().map(|x| num(*x)));
        row.extend(r.inverse_s().iter().map(|x| num(*x)));
        push_matrix(&mut row, r.mode.matrix());
        push_matrix(&mut row, &r.f);
        row.push(if r.updated { "1" } else { "0" }.into());
        row
    });
    write_csv(path, &history_header(), rows)
}

pub fn read_history(path: &Path) -> Result<FilterHistory> {
    let records = read_csv(path, &history_header())?
        .iter()
        .map(|rec| {
            let t = field(path, rec, 0)?;
            let error_deg = match rec.get(1).unwrap_or("").trim() {
                "" => None,
                _ => Some(field(path, rec, 1)?),
            };
            let s = Vector3::from(fields::<3>(path, rec, 2)?);
            let mode = rotation(path, fields::<9>(path, rec, 8)?)?;
            let f = from_row_major(&fields::<9>(path, rec, 17)?);
            let updated = match rec.get(26).unwrap_or("") {
                "1" => true,
                "0" => false,
                other => return Err(Error::Format(format!("{}: bad updated flag '{other}'", path.display()))),
            };
            Ok(FilterRecord { t, error_deg, f, s, mode, updated })
        })
        .collect::<Result<_>>()?;
    Ok(FilterHistory { records })
}

/// One row per cell, latitude outer, angles in radians.
pub fn write_grid(path: &Path, grid: &DensityGrid) -> Result<()> {
    let rows = (0..grid.n_lat).flat_map(|i| {
        (0..grid.n_lon).map(move |j| vec![num(grid.latitude(i)), num(grid.longitude(j)), num(grid.value(i, j))])
    });
    write_csv(path, &grid_header(), rows)
}

pub fn read_grid(path: &Path, axis: usize, n_lat: usize, n_lon: usize) -> Result<DensityGrid> {
    let recs = read_csv(path, &grid_header())?;
    if recs.len() != n_lat * n_lon {
        return Err(Error::Format(format!(
            "{}: {} rows for a {n_lat}x{n_lon} grid",
            path.display(),
            recs.len()
        )));
    }
    let values = recs.iter().map(|r| field(path, r, 2)).collect::<Result<_>>()?;
    Ok(DensityGrid { axis, n_lat, n_lon, values })
}

/// Body axes of each sigma point as unit vectors, 1-based `point` and `axis`
/// (point 1 is the mode).
pub fn write_sigma_points(path: &Path, set: &SigmaSet) -> Result<()> {
    let rows = set.points.iter().enumerate().flat_map(|(p, r)| {
        (0..3).map(move |a| {
            let v = r.column(a);
            let lat = v[2].clamp(-1.0, 1.0).asin();
            let lon = v[1].atan2(v[0]);
            vec![
                (p + 1).to_string(),
                (a + 1).to_string(),
                num(v[0]),
                num(v[1]),
                num(v[2]),
                num(lat),
                num(lon),
            ]
        })
    });
    write_csv(path, &sigma_header(), rows)
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Reads a JSON document after checking its `schema_version`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    match v.get("schema_version").and_then(|x| x.as_u64()) {
        Some(n) if n == SCHEMA_VERSION as u64 => {}
        Some(n) => {
            return Err(Error::Format(format!(
                "{}: unsupported schema_version {n} (this build reads {SCHEMA_VERSION})",
                path.display()
            )))
        }
        None => return Err(Error::Format(format!("{}: missing schema_version", path.display()))),
    }
    serde_json::from_value(v).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileCounts {
    pub truth: usize,
    pub gyro: usize,
    pub attitude: usize,
}

/// Describes a simulated measurement set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub seed: u64,
    pub truth_file: String,
    pub gyro_file: String,
    pub attitude_file: String,
    pub rows: FileCounts,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub generator: String,
    pub case: String,
    pub seed: u64,
    /// Seed recorded in the manifest of the measurement set.
    pub measurement_seed: u64,
    pub sigma: f64,
    pub records: usize,
    pub updates: usize,
    pub convergence_threshold_deg: f64,
    /// First time after which the error stays below the threshold.
    pub convergence_time: Option<f64>,
    pub steady_state_window: [f64; 2],
    pub steady_state_error_deg: Option<f64>,
    pub final_error_deg: Option<f64>,
    pub final_singular_values: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub schema_version: u32,
    pub generator: String,
    /// Time of the exported estimate, when taken from a filter history.
    pub t: Option<f64>,
    pub f: [f64; 9],
    pub log_c: f64,
    pub singular_values: [f64; 3],
    pub resolution: [usize; 2],
    /// Per-axis CSV files, body axes 1 to 3.
    pub files: [String; 3],
    pub peaks: [f64; 3],
    pub weighted_sums: [f64; 3],
    pub sigma: f64,
    /// `None` when no sigma points exist for this estimate and spread.
    pub sigma_points_file: Option<String>,
}

pub fn generator() -> String {
    format!("mfa {}", env!("CARGO_PKG_VERSION"))
}
