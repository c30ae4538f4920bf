//! Grid reports: a versioned JSON record file and a rendered text table.
//!
//! The JSON file holds one record per cell at full precision. Wall-clock time
//! is not part of a record, so two runs with the same seed emit identical
//! bytes whatever the worker count. The text table rounds to 2 decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mssom_core::eval::compare_by_validation;
use mssom_core::{CellOutcome, ExperimentResult, GridSpec, NormalizationKind, PhaseLabel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "mssom-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMapEntry {
    pub code: u8,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub label_map: Vec<LabelMapEntry>,
    pub grid: Option<GridSpec>,
    pub records: Vec<ExperimentResult>,
}

impl Report {
    pub fn new(grid: Option<GridSpec>, records: Vec<ExperimentResult>) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            version: REPORT_VERSION,
            label_map: PhaseLabel::ALL
                .iter()
                .map(|l| LabelMapEntry {
                    code: l.code(),
                    name: l.name().to_string(),
                })
                .collect(),
            grid,
            records,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text)?;
        if report.schema != REPORT_SCHEMA || report.version != REPORT_VERSION {
            return Err(Error::format(
                "report",
                1,
                format!("unsupported report {} {}", report.schema, report.version),
            ));
        }
        Ok(report)
    }
}

/// Writes `<path>` (JSON) and `<path>.txt` (rendered table).
pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))?;
    let table = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.txt", ext.to_string_lossy()),
        None => "txt".into(),
    });
    fs::write(&table, render_table(&report.records)).map_err(|e| Error::io(&table, e))
}

pub fn parse_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Report::from_json(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Column {
    neighbors: Option<usize>,
    norm: NormalizationKind,
}

#[derive(Default)]
struct Aggregate {
    validation: Vec<f64>,
    test: Vec<f64>,
    failed: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// One block per label budget: rows are map sizes, columns neighbor count by
/// normalization. Cells show the mean over repeats of test and validation
/// overall accuracy; `-` marks configurations where every repeat failed. The
/// configuration holding the best single validation result is starred.
pub fn render_table(records: &[ExperimentResult]) -> String {
    let mut out = String::new();
    if records.is_empty() {
        out.push_str("no records\n");
        return out;
    }
    let mut budgets: BTreeMap<Option<usize>, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in records {
        budgets.entry(r.cell.label_budget).or_default().push(r);
    }
    for (budget, rs) in budgets {
        let mut cells: BTreeMap<(usize, Column), Aggregate> = BTreeMap::new();
        for r in &rs {
            let col = Column {
                neighbors: r.cell.neighbors,
                norm: r.cell.normalization,
            };
            let agg = cells.entry((r.cell.som_size, col)).or_default();
            match &r.outcome {
                CellOutcome::Completed { validation, test, .. } => {
                    agg.validation.push(validation.metrics.overall_accuracy);
                    agg.test.push(test.metrics.overall_accuracy);
                }
                CellOutcome::Failed { .. } => agg.failed += 1,
            }
        }
        let best = rs
            .iter()
            .filter(|r| r.validation().is_some())
            .min_by(|a, b| compare_by_validation(a, b))
            .map(|r| {
                (
                    r.cell.som_size,
                    Column {
                        neighbors: r.cell.neighbors,
                        norm: r.cell.normalization,
                    },
                )
            });
        let mut sizes: Vec<usize> = cells.keys().map(|k| k.0).collect();
        sizes.dedup();
        let mut columns: Vec<Column> = cells.keys().map(|k| k.1).collect();
        columns.sort();
        columns.dedup();
        let failed: usize = cells.values().map(|a| a.failed).sum();

        match budget {
            Some(k) => writeln!(out, "== {k} labels per class ==").unwrap(),
            None => writeln!(out, "== naive (all labels) ==").unwrap(),
        }
        for (title, pick) in [
            ("test", (|a: &Aggregate| mean(&a.test)) as fn(&Aggregate) -> Option<f64>),
            ("validation", |a: &Aggregate| mean(&a.validation)),
        ] {
            writeln!(out, "{title} overall accuracy (%), mean over repeats").unwrap();
            write!(out, "{:<7}", "size").unwrap();
            for c in &columns {
                let head = match c.neighbors {
                    Some(n) => format!("{}/N{n}", c.norm),
                    None => c.norm.to_string(),
                };
                write!(out, " {head:>12}").unwrap();
            }
            out.push('\n');
            for &size in &sizes {
                write!(out, "{:<7}", format!("{size}x{size}")).unwrap();
                for &c in &columns {
                    let cell = cells
                        .get(&(size, c))
                        .map(|a| match pick(a) {
                            Some(v) => format!("{v:.2}"),
                            None => "-".to_string(),
                        })
                        .unwrap_or_default();
                    let star = if best == Some((size, c)) { "*" } else { "" };
                    write!(out, " {:>12}", format!("{cell}{star}")).unwrap();
                }
                out.push('\n');
            }
        }
        if failed > 0 {
            writeln!(out, "{failed} failed cell runs").unwrap();
        }
        out.push('\n');
    }
    out
}
