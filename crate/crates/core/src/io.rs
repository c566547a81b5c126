//! CSV files: datasets, weight vectors, survival curves and learning curves.
//!
//! Dataset schema: a header row with columns `x0..x{d-1}` (floats) and the
//! optional columns `y` (class id), `s` (stratum id), `t` (time) and `e`
//! (`0`/`1` event flag). An absent optional column means the field is absent
//! for every record.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Record, WeightVector};
use crate::error::{Error, Result};
use crate::train::EpochLog;
use crate::weights::KmCurve;

/// Summary of a parsed dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub d: usize,
    pub n_classes: Option<usize>,
    pub n_strata: Option<usize>,
}

#[derive(Default)]
struct Columns {
    x: Vec<usize>,
    y: Option<usize>,
    s: Option<usize>,
    t: Option<usize>,
    e: Option<usize>,
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<Columns> {
    let mut cols = Columns::default();
    let mut x_cols: Vec<(usize, usize)> = Vec::new();
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        let slot = match name {
            "y" => &mut cols.y,
            "s" => &mut cols.s,
            "t" => &mut cols.t,
            "e" => &mut cols.e,
            _ => {
                let idx = name
                    .strip_prefix('x')
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .ok_or_else(|| Error::schema(format!("{}: unknown column {name:?}", path.display())))?;
                x_cols.push((idx, i));
                continue;
            }
        };
        if slot.replace(i).is_some() {
            return Err(Error::schema(format!("{}: duplicate column {name:?}", path.display())));
        }
    }
    x_cols.sort_unstable();
    for (expected, &(idx, _)) in x_cols.iter().enumerate() {
        if idx != expected {
            return Err(Error::schema(format!(
                "{}: feature columns must be x0..x{{d-1}}, found x{idx} where x{expected} was expected",
                path.display()
            )));
        }
    }
    if x_cols.is_empty() && cols.t.is_none() {
        return Err(Error::schema(format!("{}: no feature columns", path.display())));
    }
    if cols.t.is_some() != cols.e.is_some() {
        return Err(Error::schema(format!("{}: columns t and e must appear together", path.display())));
    }
    cols.x = x_cols.into_iter().map(|(_, i)| i).collect();
    Ok(cols)
}

fn cell(row: &csv::StringRecord, i: usize) -> &str {
    row.get(i).unwrap_or("").trim()
}

/// Reads a dataset CSV with strict typing.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = parse_header(path, &header)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { path: path.to_path_buf(), line, message };
        if row.len() != header.len() {
            return Err(Error::schema(format!(
                "{} line {line}: {} cells, header has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        let features = cols
            .x
            .iter()
            .map(|&i| {
                let v = cell(&row, i);
                v.parse::<f64>()
                    .ok()
                    .filter(|f| f.is_finite())
                    .ok_or_else(|| bad(format!("feature {:?} is not a finite number", v)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rec = Record::new(features);
        let int = |i: usize, what: &str| -> Result<usize> {
            let v = cell(&row, i);
            v.parse::<usize>().map_err(|_| bad(format!("{what} {v:?} is not a nonnegative integer")))
        };
        if let Some(i) = cols.y {
            rec.label = Some(int(i, "label")?);
        }
        if let Some(i) = cols.s {
            rec.stratum = Some(int(i, "stratum")?);
        }
        if let (Some(ti), Some(ei)) = (cols.t, cols.e) {
            let t = cell(&row, ti);
            let t = t
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .ok_or_else(|| bad(format!("time {t:?} is not a nonnegative number")))?;
            let e = match cell(&row, ei) {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("event flag {other:?} must be 0 or 1"))),
            };
            rec = rec.with_survival(t, e);
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::validation(format!("{}: no data rows", path.display())));
    }
    let data = Dataset::new(records)?;
    let report = LoadReport { rows: data.len(), d: data.dim(), n_classes: data.n_classes(), n_strata: data.n_strata() };
    Ok((data, report))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { path: path.to_path_buf(), line, message: format!("{other:?}") },
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::validation(format!("{other:?}")),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a dataset using the same schema [`read_dataset`] accepts.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    let first = &data.records()[0];
    if first.label.is_some() {
        header.push("y".into());
    }
    if first.stratum.is_some() {
        header.push("s".into());
    }
    if first.time.is_some() {
        header.push("t".into());
        header.push("e".into());
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = data.records().iter().map(|r| {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        if let Some(y) = r.label {
            row.push(y.to_string());
        }
        if let Some(s) = r.stratum {
            row.push(s.to_string());
        }
        if let (Some(t), Some(e)) = (r.time, r.event) {
            row.push(t.to_string());
            row.push(if e { "1" } else { "0" }.into());
        }
        row
    });
    write_rows(path, &header_refs, rows)
}

/// One-column CSV `w`.
pub fn write_weights(path: impl AsRef<Path>, w: &WeightVector) -> Result<()> {
    write_rows(path.as_ref(), &["w"], w.as_slice().iter().map(|v| vec![v.to_string()]))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightVector> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 1 || header.get(0).map(str::trim) != Some("w") {
        return Err(Error::schema(format!("{}: expected a single column `w`", path.display())));
    }
    let mut values = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let v = cell(&row, 0);
        values.push(v.parse::<f64>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("weight {v:?} is not a number"),
        })?);
    }
    WeightVector::new(values)
}

/// Two-column CSV `t,s` of a survival curve.
pub fn write_km(path: impl AsRef<Path>, km: &KmCurve) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["t", "s"],
        km.times.iter().zip(&km.survival).map(|(t, s)| vec![t.to_string(), s.to_string()]),
    )
}

/// Learning curve with header `epoch,objective,miss_rate,top_k_error`.
pub fn write_learning_curve(path: impl AsRef<Path>, epochs: &[EpochLog]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["epoch", "objective", "miss_rate", "top_k_error"],
        epochs.iter().map(|e| {
            vec![e.epoch.to_string(), e.objective.to_string(), e.miss_rate.to_string(), e.top_k_error.to_string()]
        }),
    )
}

/// Two-column numeric curve with the given header.
pub fn write_xy(path: impl AsRef<Path>, header: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    write_rows(path.as_ref(), &header, points.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
