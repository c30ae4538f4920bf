//! Versioned line-oriented text formats.
//!
//! Every file starts with a `<magic> <version>` line followed by
//! `key value...` lines; blank lines and lines starting with `#` are ignored.
//! Reals are written with shortest round-trip formatting, so a write/read
//! cycle reproduces every value bit for bit.
//!
//! Model (`mssom-model 1`):
//!
//! ```text
//! mssom-model 1
//! grid <rows> <cols>
//! dims <d>
//! epochs <n>
//! lr <initial> <final>
//! radius <initial> <final>
//! seed <u64>
//! normalization <minmax|standard|robust>
//! location <d reals>
//! scale <d reals>
//! feature <name>            # d lines, names may contain spaces
//! unit <id> <d reals>       # rows*cols lines, ids in order
//! ```
//!
//! Vote table (`mssom-votes 1`), either kind:
//!
//! ```text
//! kind msom
//! units <n>
//! neighbors <N>
//! vote <id> <code> <6 counts> <6 distance sums>
//!
//! kind naive
//! units <n>
//! vote <id> <6 counts> <fallback unit or ->
//! ```
//!
//! U-Matrix (`mssom-umatrix 1`):
//!
//! ```text
//! grid <rows> <cols>
//! edge <a> <b> <weight>     # 2rc - r - c lines, a < b
//! unit <id> <mean incident weight>
//! labels <id> <6 counts>    # optional, units hosting labeled samples
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::{FromStr, SplitWhitespace};

use mssom_core::{
    Edge, LabeledAssignment, MajorityVoteTable, NaiveVoteTable, NormalizationKind,
    NormalizationStats, PhaseLabel, Som, SomConfig, UMatrix, UnitVote, NUM_CLASSES,
};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "mssom-model";
pub const VOTES_MAGIC: &str = "mssom-votes";
pub const UMATRIX_MAGIC: &str = "mssom-umatrix";
pub const FORMAT_VERSION: u32 = 1;

/// A trained map together with the normalization it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationStats,
    pub som: Som,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VoteTable {
    Msom(MajorityVoteTable),
    Naive(NaiveVoteTable),
}

/// An imported U-Matrix plus any per-unit label counts stored with it.
#[derive(Clone, Debug, PartialEq)]
pub struct UMatrixExport {
    pub umatrix: UMatrix,
    pub labels: Vec<(usize, [usize; NUM_CLASSES])>,
}

fn push_reals(out: &mut String, values: &[f64]) {
    for v in values {
        write!(out, " {v:?}").unwrap();
    }
}

pub fn model_to_string(m: &Model) -> String {
    let c = m.som.config();
    let mut out = format!("{MODEL_MAGIC} {FORMAT_VERSION}\n");
    writeln!(out, "grid {} {}", c.rows, c.cols).unwrap();
    writeln!(out, "dims {}", m.som.dims()).unwrap();
    writeln!(out, "epochs {}", c.epochs).unwrap();
    writeln!(out, "lr {:?} {:?}", c.lr_initial, c.lr_final).unwrap();
    writeln!(out, "radius {:?} {:?}", c.radius_initial, c.radius_final).unwrap();
    writeln!(out, "seed {}", c.seed).unwrap();
    writeln!(out, "normalization {}", m.normalization.kind).unwrap();
    out.push_str("location");
    push_reals(&mut out, &m.normalization.location);
    out.push_str("\nscale");
    push_reals(&mut out, &m.normalization.scale);
    out.push('\n');
    for name in &m.feature_names {
        writeln!(out, "feature {name}").unwrap();
    }
    for unit in 0..m.som.units() {
        write!(out, "unit {unit}").unwrap();
        push_reals(&mut out, m.som.weights(unit));
        out.push('\n');
    }
    out
}

pub fn model_from_str(text: &str, path: &Path) -> Result<Model> {
    let mut p = Parser::new(text, path, MODEL_MAGIC)?;
    let (rows, cols) = {
        let mut f = p.expect("grid")?;
        (p.value(&mut f)?, p.value(&mut f)?)
    };
    let dims: usize = p.single("dims")?;
    let epochs: usize = p.single("epochs")?;
    let (lr_initial, lr_final) = p.pair("lr")?;
    let (radius_initial, radius_final) = p.pair("radius")?;
    let seed: u64 = p.single("seed")?;
    let kind: NormalizationKind = p.single_str("normalization")?;
    let location = p.reals("location", dims)?;
    let scale = p.reals("scale", dims)?;
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(p.error("normalization scale must be finite and non-zero"));
    }
    let mut feature_names = Vec::with_capacity(dims);
    for _ in 0..dims {
        feature_names.push(p.rest("feature")?);
    }
    let config = SomConfig {
        rows,
        cols,
        epochs,
        lr_initial,
        lr_final,
        radius_initial,
        radius_final,
        seed,
    };
    let mut codebook = Vec::with_capacity(rows * cols * dims);
    for unit in 0..rows * cols {
        let mut f = p.expect("unit")?;
        p.index(&mut f, unit)?;
        codebook.extend(p.exact_reals(f, dims)?);
    }
    p.finish()?;
    Ok(Model {
        feature_names,
        normalization: NormalizationStats {
            kind,
            location,
            scale,
        },
        som: Som::from_parts(config, dims, codebook)?,
    })
}

pub fn votes_to_string(table: &VoteTable) -> String {
    let mut out = format!("{VOTES_MAGIC} {FORMAT_VERSION}\n");
    match table {
        VoteTable::Msom(t) => {
            writeln!(out, "kind msom\nunits {}\nneighbors {}", t.units(), t.n_neighbors()).unwrap();
            for (unit, v) in t.votes().iter().enumerate() {
                write!(out, "vote {unit} {}", v.prediction.code()).unwrap();
                for c in v.counts {
                    write!(out, " {c}").unwrap();
                }
                push_reals(&mut out, &v.distance_sums);
                out.push('\n');
            }
        }
        VoteTable::Naive(t) => {
            writeln!(out, "kind naive\nunits {}", t.units()).unwrap();
            for unit in 0..t.units() {
                write!(out, "vote {unit}").unwrap();
                for c in t.counts(unit).unwrap() {
                    write!(out, " {c}").unwrap();
                }
                match t.fallback_from(unit) {
                    Some(v) => writeln!(out, " {v}").unwrap(),
                    None => out.push_str(" -\n"),
                }
            }
        }
    }
    out
}

pub fn votes_from_str(text: &str, path: &Path) -> Result<VoteTable> {
    let mut p = Parser::new(text, path, VOTES_MAGIC)?;
    let kind: String = p.single_str("kind")?;
    let units: usize = p.single("units")?;
    let table = match kind.as_str() {
        "msom" => {
            let n: usize = p.single("neighbors")?;
            let mut votes = Vec::with_capacity(units);
            for unit in 0..units {
                let mut f = p.expect("vote")?;
                p.index(&mut f, unit)?;
                let code: i64 = p.value(&mut f)?;
                let prediction = PhaseLabel::from_code(code)?;
                let counts = p.counts(&mut f)?;
                let sums = p.exact_reals(f, NUM_CLASSES)?;
                votes.push(UnitVote {
                    prediction,
                    counts,
                    distance_sums: sums.try_into().unwrap(),
                });
            }
            VoteTable::Msom(MajorityVoteTable::from_votes(n, votes)?)
        }
        "naive" => {
            let mut counts = Vec::with_capacity(units);
            let mut fallback = Vec::with_capacity(units);
            for unit in 0..units {
                let mut f = p.expect("vote")?;
                p.index(&mut f, unit)?;
                counts.push(p.counts(&mut f)?);
                let raw = f.next().ok_or_else(|| p.error("missing fallback unit"))?;
                fallback.push(match raw {
                    "-" => None,
                    v => Some(v.parse().map_err(|_| p.error(format!("bad unit `{v}`")))?),
                });
                p.end(f)?;
            }
            VoteTable::Naive(NaiveVoteTable::from_parts(counts, fallback)?)
        }
        other => return Err(p.error(format!("unknown vote table kind `{other}`"))),
    };
    p.finish()?;
    Ok(table)
}

pub fn umatrix_to_string(u: &UMatrix, assign: Option<&LabeledAssignment>) -> String {
    let mut out = format!("{UMATRIX_MAGIC} {FORMAT_VERSION}\n");
    writeln!(out, "grid {} {}", u.rows(), u.cols()).unwrap();
    for e in u.edges() {
        writeln!(out, "edge {} {} {:?}", e.a, e.b, e.weight).unwrap();
    }
    for (unit, d) in u.unit_mean_dist().iter().enumerate() {
        writeln!(out, "unit {unit} {d:?}").unwrap();
    }
    if let Some(assign) = assign {
        for (unit, counts) in assign.per_unit() {
            write!(out, "labels {unit}").unwrap();
            for c in counts {
                write!(out, " {c}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn umatrix_from_str(text: &str, path: &Path) -> Result<UMatrixExport> {
    let mut p = Parser::new(text, path, UMATRIX_MAGIC)?;
    let (rows, cols) = {
        let mut f = p.expect("grid")?;
        (p.value(&mut f)?, p.value(&mut f)?)
    };
    if rows == 0 || cols == 0 {
        return Err(p.error("grid dimensions must be positive"));
    }
    let n_edges = 2 * rows * cols - rows - cols;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let mut f = p.expect("edge")?;
        let a = p.value(&mut f)?;
        let b = p.value(&mut f)?;
        let weight = p.exact_reals(f, 1)?[0];
        edges.push(Edge { a, b, weight });
    }
    let umatrix = UMatrix::from_edges(rows, cols, &edges)?;
    for unit in 0..rows * cols {
        let mut f = p.expect("unit")?;
        p.index(&mut f, unit)?;
        let stored = p.exact_reals(f, 1)?[0];
        if stored.to_bits() != umatrix.unit_mean_dist()[unit].to_bits() {
            return Err(p.error(format!("unit {unit} mean distance disagrees with its edges")));
        }
    }
    let mut labels = Vec::new();
    while p.peek_key() == Some("labels") {
        let mut f = p.expect("labels")?;
        let unit: usize = p.value(&mut f)?;
        if unit >= rows * cols || labels.last().is_some_and(|&(u, _)| u >= unit) {
            return Err(p.error(format!("bad labels unit {unit}")));
        }
        let counts = p.counts(&mut f)?;
        p.end(f)?;
        labels.push((unit, counts));
    }
    p.finish()?;
    Ok(UMatrixExport { umatrix, labels })
}

pub fn read_model(path: &Path) -> Result<Model> {
    model_from_str(&read(path)?, path)
}

pub fn read_votes(path: &Path) -> Result<VoteTable> {
    votes_from_str(&read(path)?, path)
}

pub fn read_umatrix(path: &Path) -> Result<UMatrixExport> {
    umatrix_from_str(&read(path)?, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

struct Parser<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    path: PathBuf,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, path: &Path, magic: &str) -> Result<Self> {
        let iter: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim_end()))
                .filter(|(_, l)| !l.trim_start().is_empty() && !l.trim_start().starts_with('#')),
        );
        let mut p = Self {
            lines: iter.peekable(),
            path: path.to_path_buf(),
            line: 0,
        };
        let header = p.next_line()?;
        let mut f = header.split_whitespace();
        if f.next() != Some(magic) {
            return Err(p.error(format!("expected `{magic}` header")));
        }
        let version: u32 = p.value(&mut f)?;
        if version != FORMAT_VERSION {
            return Err(p.error(format!("unsupported version {version}")));
        }
        p.end(f)?;
        Ok(p)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::format(&self.path, self.line, message)
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((n, l)) => {
                self.line = n;
                Ok(l)
            }
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn peek_key(&mut self) -> Option<&'a str> {
        self.lines.peek().and_then(|(_, l)| l.split_whitespace().next())
    }

    fn expect(&mut self, key: &str) -> Result<SplitWhitespace<'a>> {
        let line = self.next_line()?;
        let mut f = line.split_whitespace();
        match f.next() {
            Some(k) if k == key => Ok(f),
            other => Err(self.error(format!("expected `{key}`, found `{}`", other.unwrap_or("")))),
        }
    }

    /// Everything after `key `, kept verbatim.
    fn rest(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?.trim_start();
        match line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) if !rest.is_empty() => Ok(rest.to_string()),
            _ => Err(self.error(format!("expected `{key} <value>`"))),
        }
    }

    fn value<T: FromStr>(&self, f: &mut SplitWhitespace<'a>) -> Result<T> {
        let raw = f.next().ok_or_else(|| self.error("missing value"))?;
        raw.parse().map_err(|_| self.error(format!("bad value `{raw}`")))
    }

    fn end(&self, mut f: SplitWhitespace<'a>) -> Result<()> {
        match f.next() {
            None => Ok(()),
            Some(extra) => Err(self.error(format!("unexpected `{extra}`"))),
        }
    }

    fn single<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let mut f = self.expect(key)?;
        let v = self.value(&mut f)?;
        self.end(f)?;
        Ok(v)
    }

    fn single_str<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.single(key)
    }

    fn pair(&mut self, key: &str) -> Result<(f64, f64)> {
        let f = self.expect(key)?;
        let v = self.exact_reals(f, 2)?;
        Ok((v[0], v[1]))
    }

    fn reals(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let f = self.expect(key)?;
        self.exact_reals(f, n)
    }

    fn exact_reals(&self, f: SplitWhitespace<'a>, n: usize) -> Result<Vec<f64>> {
        let values = f
            .map(|raw| raw.parse::<f64>().map_err(|_| self.error(format!("bad real `{raw}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != n {
            return Err(self.error(format!("expected {n} values, found {}", values.len())));
        }
        Ok(values)
    }

    fn counts(&self, f: &mut SplitWhitespace<'a>) -> Result<[usize; NUM_CLASSES]> {
        let mut counts = [0; NUM_CLASSES];
        for c in &mut counts {
            *c = self.value(f)?;
        }
        Ok(counts)
    }

    fn index(&self, f: &mut SplitWhitespace<'a>, expected: usize) -> Result<()> {
        let got: usize = self.value(f)?;
        if got != expected {
            return Err(self.error(format!("expected unit {expected}, found {got}")));
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        match self.lines.next() {
            None => Ok(()),
            Some((n, l)) => {
                self.line = n;
                Err(self.error(format!("trailing content `{l}`")))
            }
        }
    }
}
