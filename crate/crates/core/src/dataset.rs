//! Flight frames, label budgets and synthetic data.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 6;

/// Phase of flight. The numeric codes are the ones stored in the `FlPhase`
/// column of the flight CSVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum PhaseLabel {
    #[serde(rename = "TXI")]
    Taxi = 0,
    #[serde(rename = "TOF")]
    TakeOff = 1,
    #[serde(rename = "ICL")]
    InitialClimb = 2,
    #[serde(rename = "APR")]
    Approach = 3,
    #[serde(rename = "LDG")]
    Landing = 4,
    #[serde(rename = "ENR")]
    EnRoute = 5,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; NUM_CLASSES] = [
        PhaseLabel::Taxi,
        PhaseLabel::TakeOff,
        PhaseLabel::InitialClimb,
        PhaseLabel::Approach,
        PhaseLabel::Landing,
        PhaseLabel::EnRoute,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Taxi => "TXI",
            PhaseLabel::TakeOff => "TOF",
            PhaseLabel::InitialClimb => "ICL",
            PhaseLabel::Approach => "APR",
            PhaseLabel::Landing => "LDG",
            PhaseLabel::EnRoute => "ENR",
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|c| Self::ALL.get(c).copied())
            .ok_or(Error::LabelOutOfRange(code))
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownPhase(name.to_string()))
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The 48 sensor columns of the preprocessed NGAFID Cessna 172S exports, in
/// file order. The label column `FlPhase` follows them.
pub const NGAFID_FEATURES: [&str; 48] = [
    "AirportDistance",
    "AltAGL",
    "AltMSL Lag Diff",
    "amp1",
    "amp2",
    "AOASimple",
    "CAS",
    "Coordination Index",
    "E1 CHT Divergence",
    "E1 CHT1",
    "E1 CHT2",
    "E1 CHT3",
    "E1 CHT4",
    "E1 EGT Divergence",
    "E1 EGT1",
    "E1 EGT2",
    "E1 EGT3",
    "E1 EGT4",
    "E1 FFlow",
    "E1 OilP",
    "E1 OilT",
    "E1 RPM",
    "FQtyL",
    "FQtyR",
    "GndSpd",
    "HAL",
    "HDG",
    "HPLfd",
    "IAS",
    "LatAc",
    "LOC-I Index",
    "NAV1",
    "NAV2",
    "NormAc",
    "OAT",
    "Pitch",
    "Roll",
    "RunwayDistance",
    "Stall Index",
    "TAS",
    "Total Fuel",
    "TRK",
    "volt1",
    "volt2",
    "VPLwas",
    "VSpd",
    "VSpd Calculated",
    "VSpdG",
];

/// Identity of a row: the file it came from and its data-row index there.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleRef {
    pub source_file: String,
    pub row_index: usize,
}

impl SampleRef {
    pub fn new(source_file: impl Into<String>, row_index: usize) -> Self {
        Self {
            source_file: source_file.into(),
            row_index,
        }
    }
}

impl fmt::Display for SampleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source_file, self.row_index)
    }
}

/// One per-second row of flight data.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightFrame {
    pub features: Vec<f64>,
    pub label: Option<PhaseLabel>,
    pub source_file: Arc<str>,
    pub row_index: usize,
}

impl FlightFrame {
    pub fn sample_ref(&self) -> SampleRef {
        SampleRef::new(&*self.source_file, self.row_index)
    }
}

impl AsRef<[f64]> for FlightFrame {
    fn as_ref(&self) -> &[f64] {
        &self.features
    }
}

/// Per-class row counts, indexed by [`PhaseLabel`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram(pub [usize; NUM_CLASSES]);

impl ClassHistogram {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Index<PhaseLabel> for ClassHistogram {
    type Output = usize;
    fn index(&self, label: PhaseLabel) -> &usize {
        &self.0[label.index()]
    }
}

impl IndexMut<PhaseLabel> for ClassHistogram {
    fn index_mut(&mut self, label: PhaseLabel) -> &mut usize {
        &mut self.0[label.index()]
    }
}

/// An ordered collection of frames sharing one feature schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    frames: Vec<FlightFrame>,
    feature_names: Vec<String>,
    class_histogram: ClassHistogram,
    dropped_rows: usize,
}

impl Dataset {
    /// Checks that every frame has `feature_names.len()` finite features.
    pub fn new(feature_names: Vec<String>, frames: Vec<FlightFrame>) -> Result<Self> {
        let dims = feature_names.len();
        if dims == 0 {
            return Err(Error::InvalidConfig("a dataset needs at least one feature".into()));
        }
        for (row, frame) in frames.iter().enumerate() {
            if frame.features.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: frame.features.len(),
                });
            }
            if let Some(feature) = frame.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, feature });
            }
        }
        let class_histogram = histogram_of(&frames);
        Ok(Self {
            frames,
            feature_names,
            class_histogram,
            dropped_rows: 0,
        })
    }

    pub fn empty(feature_names: Vec<String>) -> Self {
        Self {
            frames: Vec::new(),
            feature_names,
            class_histogram: ClassHistogram::default(),
            dropped_rows: 0,
        }
    }

    pub fn with_dropped_rows(mut self, dropped: usize) -> Self {
        self.dropped_rows = dropped;
        self
    }

    pub fn frames(&self) -> &[FlightFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<FlightFrame> {
        self.frames
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn dims(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Rows skipped at ingestion because a feature was missing or non-numeric.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn class_histogram(&self) -> ClassHistogram {
        self.class_histogram
    }

    /// Every labeled frame as a [`LabeledSample`], in dataset order.
    pub fn labeled_samples(&self) -> Vec<LabeledSample> {
        self.frames
            .iter()
            .filter_map(|f| {
                f.label.map(|label| LabeledSample {
                    sample: f.sample_ref(),
                    features: f.features.clone(),
                    label,
                })
            })
            .collect()
    }

    /// Concatenates datasets in the given order. All parts must share a schema.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyData)?;
        let mut frames = Vec::with_capacity(parts.iter().map(Dataset::len).sum());
        let mut dropped = 0;
        for part in parts {
            if part.feature_names != first.feature_names {
                return Err(Error::InvalidConfig(format!(
                    "feature schema of {} columns does not match {} columns",
                    part.dims(),
                    first.dims()
                )));
            }
            frames.extend(part.frames.iter().cloned());
            dropped += part.dropped_rows;
        }
        Ok(Self {
            class_histogram: histogram_of(&frames),
            frames,
            feature_names: first.feature_names.clone(),
            dropped_rows: dropped,
        })
    }

    /// A copy without the frames whose identity is in `removed`.
    pub fn without(&self, removed: &BTreeSet<SampleRef>) -> Dataset {
        let frames: Vec<FlightFrame> = self
            .frames
            .iter()
            .filter(|f| !removed.contains(&f.sample_ref()))
            .cloned()
            .collect();
        Self {
            class_histogram: histogram_of(&frames),
            frames,
            feature_names: self.feature_names.clone(),
            dropped_rows: self.dropped_rows,
        }
    }

    /// Applies `f` to every feature vector; labels and identities are kept.
    pub fn map_features<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let frames = self
            .frames
            .iter()
            .map(|frame| {
                Ok(FlightFrame {
                    features: f(&frame.features)?,
                    label: frame.label,
                    source_file: frame.source_file.clone(),
                    row_index: frame.row_index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Dataset::new(self.feature_names.clone(), frames)?;
        out.dropped_rows = self.dropped_rows;
        Ok(out)
    }
}

fn histogram_of(frames: &[FlightFrame]) -> ClassHistogram {
    let mut hist = ClassHistogram::default();
    for label in frames.iter().filter_map(|f| f.label) {
        hist[label] += 1;
    }
    hist
}

/// Counts of labeled frames per class. Unlabeled frames are ignored.
pub fn class_histogram(d: &Dataset) -> ClassHistogram {
    d.class_histogram()
}

/// Which files labeled rows may be drawn from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    SingleFile(String),
    MultiFile(Vec<String>),
}

impl LabelSource {
    fn admits(&self, file: &str) -> bool {
        match self {
            LabelSource::SingleFile(id) => id == file,
            LabelSource::MultiFile(ids) => ids.iter().any(|id| id == file),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelBudget {
    per_class: usize,
    source: LabelSource,
    seed: u64,
}

impl LabelBudget {
    pub fn new(per_class: usize, source: LabelSource, seed: u64) -> Result<Self> {
        if per_class == 0 {
            return Err(Error::InvalidConfig("label budget must be at least 1 per class".into()));
        }
        Ok(Self {
            per_class,
            source,
            seed,
        })
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn source(&self) -> &LabelSource {
        &self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub sample: SampleRef,
    pub features: Vec<f64>,
    pub label: PhaseLabel,
}

impl AsRef<[f64]> for LabeledSample {
    fn as_ref(&self) -> &[f64] {
        &self.features
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelDraw {
    /// Drawn samples grouped by class code, each group in dataset order.
    pub labeled: Vec<LabeledSample>,
    /// The input with the drawn rows removed.
    pub remainder: Dataset,
}

/// Draws `min(k, available)` labeled rows per class, uniformly without
/// replacement, from the frames of `d` whose file is admitted by the budget's
/// source.
///
/// Each class uses its own RNG stream keyed by `(seed, k)` with the class code
/// as stream id, so the draw for one class does not depend on any other.
pub fn sample_labels_per_class(d: &Dataset, budget: &LabelBudget) -> Result<LabelDraw> {
    draw_per_class(d, budget, true)
}

/// Like [`sample_labels_per_class`] but classes with no rows are skipped.
pub(crate) fn draw_per_class(
    d: &Dataset,
    budget: &LabelBudget,
    require_every_class: bool,
) -> Result<LabelDraw> {
    let mut candidates: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, frame) in d.frames.iter().enumerate() {
        if let Some(label) = frame.label {
            if budget.source.admits(&frame.source_file) {
                candidates[label.index()].push(i);
            }
        }
    }

    let key = rng::mix(budget.seed, budget.per_class as u64);
    let mut chosen = Vec::new();
    for class in PhaseLabel::ALL {
        let pool = &candidates[class.index()];
        if pool.is_empty() {
            if require_every_class {
                return Err(Error::ClassAbsent(class));
            }
            continue;
        }
        let amount = budget.per_class.min(pool.len());
        let mut rng = rng::stream(key, u64::from(class.code()));
        let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), amount)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        picked.sort_unstable();
        chosen.extend(picked);
    }

    let labeled = chosen
        .iter()
        .map(|&i| {
            let frame = &d.frames[i];
            LabeledSample {
                sample: frame.sample_ref(),
                features: frame.features.clone(),
                label: frame.label.expect("candidates are labeled"),
            }
        })
        .collect();

    let drawn: BTreeSet<usize> = chosen.into_iter().collect();
    let frames: Vec<FlightFrame> = d
        .frames
        .iter()
        .enumerate()
        .filter(|(i, _)| !drawn.contains(i))
        .map(|(_, f)| f.clone())
        .collect();
    let remainder = Dataset {
        class_histogram: histogram_of(&frames),
        frames,
        feature_names: d.feature_names.clone(),
        dropped_rows: d.dropped_rows,
    };
    Ok(LabelDraw { labeled, remainder })
}

/// Isotropic unit-variance Gaussian clusters, one per phase, with class centers
/// at least `separation` apart.
///
/// The centers depend only on `(dims, separation, seed)`; [`sample`](Self::sample)
/// can then draw any number of independent datasets around the same centers.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGenerator {
    dims: usize,
    separation: f64,
    seed: u64,
    centers: Vec<Vec<f64>>,
}

impl SyntheticGenerator {
    pub fn new(dims: usize, separation: f64, seed: u64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidConfig("synthetic data needs dims >= 1".into()));
        }
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(Error::InvalidConfig("separation must be positive".into()));
        }
        let mut rng = rng::stream(rng::mix(seed, 0xC3), 0);
        let mut side = 2.0 * separation;
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(NUM_CLASSES);
        let mut attempts = 0;
        while centers.len() < NUM_CLASSES {
            let candidate: Vec<f64> = (0..dims).map(|_| rng.random::<f64>() * side).collect();
            if centers.iter().all(|c| euclidean(c, &candidate) >= separation) {
                centers.push(candidate);
                attempts = 0;
            } else {
                attempts += 1;
                if attempts == 256 {
                    side *= 1.5;
                    attempts = 0;
                }
            }
        }
        Ok(Self {
            dims,
            separation,
            seed,
            centers,
        })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Draws `counts[c]` rows for each class `c`, classes in code order, tagged
    /// with `source_file`. Distinct `stream` values give independent draws.
    pub fn sample(&self, counts: [usize; NUM_CLASSES], source_file: &str, stream: u64) -> Result<Dataset> {
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::EmptyData);
        }
        let source: Arc<str> = Arc::from(source_file);
        let mut rng = rng::stream(rng::mix(self.seed, 0x5A), stream);
        let mut frames = Vec::with_capacity(counts.iter().sum());
        for class in PhaseLabel::ALL {
            let center = &self.centers[class.index()];
            for _ in 0..counts[class.index()] {
                let features = center
                    .iter()
                    .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                frames.push(FlightFrame {
                    features,
                    label: Some(class),
                    source_file: source.clone(),
                    row_index: frames.len(),
                });
            }
        }
        let names = (0..self.dims).map(|i| format!("f{i}")).collect();
        Dataset::new(names, frames)
    }
}

/// One synthetic file: `generator(dims, separation, seed).sample(counts)`.
pub fn generate_synthetic(
    n_per_class: [usize; NUM_CLASSES],
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    SyntheticGenerator::new(dims, separation, seed)?.sample(
        n_per_class,
        &format!("synthetic-{seed}"),
        0,
    )
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_euclidean(a, b))
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
