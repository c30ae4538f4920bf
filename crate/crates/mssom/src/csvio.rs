//! Flight CSV ingestion and emission.
//!
//! Header row first, feature columns by name, optional trailing `FlPhase`
//! column with integer phase codes. Rows with a missing or non-numeric feature
//! are dropped and counted; a bad `FlPhase` value is an error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use mssom_core::{Dataset, FlightFrame, PhaseLabel};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "FlPhase";

/// Loads `path`, keeping the columns named in `schema` in schema order. The
/// file id recorded on each frame is the file name.
pub fn load_flight_csv<S: AsRef<str>>(path: &Path, schema: &[S]) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let columns = schema
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name.as_ref())
                .ok_or_else(|| Error::MissingColumn(name.as_ref().to_string()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let label_column = headers.iter().position(|h| h == LABEL_COLUMN);
    let file_id: Arc<str> = file_id(path).into();

    let mut frames = Vec::new();
    let mut dropped = 0;
    for (row_index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let features: Option<Vec<f64>> = columns
            .iter()
            .map(|&c| {
                record
                    .get(c)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        let Some(features) = features else {
            dropped += 1;
            continue;
        };
        let label = match label_column.and_then(|c| record.get(c)) {
            None | Some("") => None,
            Some(raw) => Some(parse_label(raw)?),
        };
        frames.push(FlightFrame {
            features,
            label,
            source_file: file_id.clone(),
            row_index,
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let names = schema.iter().map(|s| s.as_ref().to_string()).collect();
    Ok(Dataset::new(names, frames)?.with_dropped_rows(dropped))
}

/// Loads with the header's own feature columns: every column but `FlPhase`.
pub fn load_csv_auto(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    let schema: Vec<String> = headers
        .iter()
        .filter(|h| *h != LABEL_COLUMN)
        .map(String::from)
        .collect();
    load_flight_csv(path, &schema)
}

/// Accepts integer codes, also written as `3.0`.
fn parse_label(raw: &str) -> mssom_core::Result<PhaseLabel> {
    let value: f64 = raw
        .parse()
        .map_err(|_| mssom_core::Error::UnknownPhase(raw.to_string()))?;
    if value.fract() != 0.0 || !value.is_finite() {
        return Err(mssom_core::Error::UnknownPhase(raw.to_string()));
    }
    PhaseLabel::from_code(value as i64)
}

pub fn file_id(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Writes features with shortest round-trip formatting, so reloading is
/// bit-exact. The label column is written when any frame is labeled.
pub fn write_flight_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_flight_csv_to(data, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_flight_csv_to<W: Write>(data: &Dataset, out: &mut W) -> std::io::Result<()> {
    let labeled = data.frames().iter().any(|f| f.label.is_some());
    let mut header = data.feature_names().join(",");
    if labeled {
        header.push(',');
        header.push_str(LABEL_COLUMN);
    }
    writeln!(out, "{header}")?;
    let mut line = String::new();
    for frame in data.frames() {
        line.clear();
        for (i, v) in frame.features.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:?}"));
        }
        if labeled {
            line.push(',');
            if let Some(l) = frame.label {
                line.push_str(&l.code().to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Writes `row_index,phase_code,phase_name`; abstentions leave both empty.
pub fn write_predictions(
    rows: &[(usize, Option<PhaseLabel>)],
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "row_index,phase_code,phase_name").map_err(io)?;
    for (row, label) in rows {
        match label {
            Some(l) => writeln!(out, "{row},{},{}", l.code(), l.name()),
            None => writeln!(out, "{row},,"),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
