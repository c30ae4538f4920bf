//! Metrics, experiment grid cells and best-cell selection.
//!
//! A grid cell is one (label budget, map size, neighbor count, normalization,
//! repeat) combination. [`run_cell`] executes a cell end to end from its
//! derived seed, so cells can run in any order or in parallel and any single
//! cell can be reproduced on its own.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classify::{Fallback, MajorityVoteTable, NaiveVoteTable};
use crate::dataset::{
    draw_per_class, sample_labels_per_class, Dataset, LabelBudget, LabelSource, LabeledSample,
    PhaseLabel, SampleRef, NUM_CLASSES,
};
use crate::normalize::{NormalizationKind, NormalizationStats};
use crate::rng;
use crate::som::{Som, SomConfig};
use crate::topo::{DistanceGraph, LabeledAssignment, UMatrix};
use crate::{Error, Result};

/// Rows are true classes, columns predictions. Samples the classifier left
/// without a prediction are counted per true class in `abstained`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
    #[serde(default)]
    pub abstained: [u64; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: PhaseLabel, prediction: Option<PhaseLabel>) {
        match prediction {
            Some(p) => self.counts[truth.index()][p.index()] += 1,
            None => self.abstained[truth.index()] += 1,
        }
    }

    pub fn support(&self, class: PhaseLabel) -> u64 {
        self.counts[class.index()].iter().sum::<u64>() + self.abstained[class.index()]
    }

    pub fn total(&self) -> u64 {
        PhaseLabel::ALL.iter().map(|&c| self.support(c)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }
}

/// Percentages at full precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall_accuracy: f64,
    /// Recall per class; `None` when the class has no true samples.
    pub per_class_accuracy: [Option<f64>; NUM_CLASSES],
    /// Unweighted mean of the defined per-class values.
    pub mean_per_class: f64,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let total = cm.total();
        if total == 0 {
            return Err(Error::Empty);
        }
        let per_class_accuracy = PhaseLabel::ALL.map(|c| {
            let support = cm.support(c);
            (support > 0).then(|| cm.counts[c.index()][c.index()] as f64 / support as f64 * 100.0)
        });
        let defined: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
        Ok(Self {
            overall_accuracy: cm.correct() as f64 / total as f64 * 100.0,
            mean_per_class: defined.iter().sum::<f64>() / defined.len() as f64,
            per_class_accuracy,
        })
    }

    /// Classes without true samples, excluded from the mean.
    pub fn absent_classes(&self) -> Vec<PhaseLabel> {
        PhaseLabel::ALL
            .into_iter()
            .filter(|c| self.per_class_accuracy[c.index()].is_none())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

pub fn evaluate(
    predictions: &[PhaseLabel],
    truths: &[PhaseLabel],
) -> Result<(ConfusionMatrix, Metrics)> {
    let wrapped: Vec<Option<PhaseLabel>> = predictions.iter().copied().map(Some).collect();
    evaluate_with_abstentions(&wrapped, truths)
}

/// As [`evaluate`]; a `None` prediction counts as a miss.
pub fn evaluate_with_abstentions(
    predictions: &[Option<PhaseLabel>],
    truths: &[PhaseLabel],
) -> Result<(ConfusionMatrix, Metrics)> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truths.iter().zip(predictions) {
        cm.record(t, p);
    }
    let metrics = Metrics::from_confusion(&cm)?;
    Ok((cm, metrics))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Topological vote over a small labeled budget.
    MsSom,
    /// Per-unit majority of every labeled row left after validation sampling.
    Naive,
}

/// Map training schedule shared by all cells; the size and seed vary per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// `None` means `size / 2`.
    pub radius_initial: Option<f64>,
    pub radius_final: f64,
}

impl Default for SomSchedule {
    fn default() -> Self {
        let d = SomConfig::new(2, 2, 0);
        Self {
            epochs: d.epochs,
            lr_initial: d.lr_initial,
            lr_final: d.lr_final,
            radius_initial: None,
            radius_final: d.radius_final,
        }
    }
}

impl SomSchedule {
    pub fn config(&self, size: usize, seed: u64) -> SomConfig {
        let mut c = SomConfig::new(size, size, seed);
        c.epochs = self.epochs;
        c.lr_initial = self.lr_initial;
        c.lr_final = self.lr_final;
        if let Some(r) = self.radius_initial {
            c.radius_initial = r;
        }
        c.radius_final = self.radius_final;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub strategy: Strategy,
    /// Square map side lengths.
    pub som_sizes: Vec<usize>,
    /// Ignored by the naive strategy.
    pub neighbor_counts: Vec<usize>,
    pub normalizations: Vec<NormalizationKind>,
    /// Labels per class. Ignored by the naive strategy.
    pub label_budgets: Vec<usize>,
    /// Validation rows per class; `None` uses the cell's label budget.
    pub validation_per_class: Option<usize>,
    pub repeats: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub som: SomSchedule,
}

impl GridSpec {
    /// The map sizes and neighbor counts used for each label budget.
    pub fn label_sweep(labels_per_class: usize, base_seed: u64) -> Result<Self> {
        let (sizes, neighbors): (&[usize], &[usize]) = match labels_per_class {
            5 => (&[5, 7, 10], &[3, 5, 7]),
            10 => (&[5, 7, 10, 15], &[3, 5, 7, 10]),
            20 | 30 | 40 => (&[5, 7, 10, 15, 20, 25], &[3, 5, 7, 10, 15]),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "no preset for {other} labels per class"
                )))
            }
        };
        Ok(Self {
            strategy: Strategy::MsSom,
            som_sizes: sizes.to_vec(),
            neighbor_counts: neighbors.to_vec(),
            normalizations: NormalizationKind::ALL.to_vec(),
            label_budgets: alloc::vec![labels_per_class],
            validation_per_class: None,
            repeats: 10,
            base_seed,
            som: SomSchedule::default(),
        })
    }

    /// The naive fully-labeled baseline sweep with 20 validation rows per class.
    pub fn naive_baseline(base_seed: u64) -> Self {
        Self {
            strategy: Strategy::Naive,
            som_sizes: alloc::vec![5, 10, 15, 20, 25],
            neighbor_counts: Vec::new(),
            normalizations: NormalizationKind::ALL.to_vec(),
            label_budgets: Vec::new(),
            validation_per_class: Some(20),
            repeats: 10,
            base_seed,
            som: SomSchedule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.som_sizes.is_empty() || self.som_sizes.iter().any(|&s| s < 2) {
            return bad("map sizes must be non-empty and >= 2");
        }
        if self.normalizations.is_empty() {
            return bad("at least one normalization is required");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if self.validation_per_class == Some(0) {
            return bad("validation rows per class must be >= 1");
        }
        if self.strategy == Strategy::MsSom {
            if self.neighbor_counts.is_empty() || self.neighbor_counts.contains(&0) {
                return bad("neighbor counts must be non-empty and >= 1");
            }
            if self.label_budgets.is_empty() || self.label_budgets.contains(&0) {
                return bad("label budgets must be non-empty and >= 1");
            }
        } else if self.validation_per_class.is_none() {
            return bad("the naive strategy needs an explicit validation size");
        }
        self.som.config(self.som_sizes[0], 0).validate()
    }

    /// Every cell, ordered by budget, size, normalization, neighbors, repeat.
    pub fn cells(&self) -> Vec<CellId> {
        let budgets: Vec<Option<usize>> = match self.strategy {
            Strategy::MsSom => self.label_budgets.iter().copied().map(Some).collect(),
            Strategy::Naive => alloc::vec![None],
        };
        let neighbors: Vec<Option<usize>> = match self.strategy {
            Strategy::MsSom => self.neighbor_counts.iter().copied().map(Some).collect(),
            Strategy::Naive => alloc::vec![None],
        };
        let mut cells = Vec::new();
        for &label_budget in &budgets {
            for &som_size in &self.som_sizes {
                for &normalization in &self.normalizations {
                    for &n in &neighbors {
                        for repeat in 0..self.repeats {
                            cells.push(CellId {
                                label_budget,
                                som_size,
                                neighbors: n,
                                normalization,
                                repeat,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub label_budget: Option<usize>,
    pub som_size: usize,
    pub neighbors: Option<usize>,
    pub normalization: NormalizationKind,
    pub repeat: usize,
}

impl CellId {
    /// Stable per-cell seed; independent of which other cells exist.
    pub fn derive_seed(&self, base_seed: u64) -> u64 {
        let norm = match self.normalization {
            NormalizationKind::MinMax => 0,
            NormalizationKind::Standard => 1,
            NormalizationKind::Robust => 2,
        };
        rng::mix_all(
            base_seed,
            &[
                self.label_budget.map_or(0, |b| b as u64 + 1),
                self.som_size as u64,
                self.neighbors.map_or(0, |n| n as u64 + 1),
                norm,
                self.repeat as u64,
            ],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Completed {
        normalization_stats: NormalizationStats,
        labeled_rows: usize,
        validation: Evaluation,
        test: Evaluation,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cell: CellId,
    pub seed: u64,
    pub outcome: CellOutcome,
    /// Not serialized: reports must not depend on timing.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentResult {
    pub fn validation(&self) -> Option<&Evaluation> {
        match &self.outcome {
            CellOutcome::Completed { validation, .. } => Some(validation),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn test(&self) -> Option<&Evaluation> {
        match &self.outcome {
            CellOutcome::Completed { test, .. } => Some(test),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Inputs shared by every cell. The training pool is used without labels;
/// labeled and validation rows are drawn from `label_pool` and removed from
/// `test_pool` by row identity before scoring.
#[derive(Clone, Debug)]
pub struct GridData {
    pub train_pool: Dataset,
    pub label_pool: Dataset,
    pub test_pool: Dataset,
}

const STREAM_SOM: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_VALIDATION: u64 = 3;

/// Runs one cell. Failures are captured in the outcome; `wall_clock` is left
/// at zero for the caller to fill in.
pub fn run_cell(spec: &GridSpec, cell: &CellId, data: &GridData) -> ExperimentResult {
    let seed = cell.derive_seed(spec.base_seed);
    let outcome = match execute_cell(spec, cell, seed, data) {
        Ok(outcome) => outcome,
        Err(e) => CellOutcome::Failed {
            error: e.to_string(),
        },
    };
    ExperimentResult {
        cell: *cell,
        seed,
        outcome,
        wall_clock: Duration::ZERO,
    }
}

fn execute_cell(spec: &GridSpec, cell: &CellId, seed: u64, data: &GridData) -> Result<CellOutcome> {
    let stats = NormalizationStats::fit(cell.normalization, data.train_pool.frames())?;
    let train = stats.transform_dataset(&data.train_pool)?;
    let som = Som::train(
        spec.som.config(cell.som_size, rng::mix(seed, STREAM_SOM)),
        train.frames(),
    )?;

    let files: BTreeSet<&str> = data
        .label_pool
        .frames()
        .iter()
        .map(|f| &*f.source_file)
        .collect();
    let source = LabelSource::MultiFile(files.into_iter().map(String::from).collect());
    let validation_k = |fallback: usize| spec.validation_per_class.unwrap_or(fallback);

    let (labeled, validation) = match (spec.strategy, cell.label_budget) {
        (Strategy::MsSom, Some(k)) => {
            let budget = LabelBudget::new(k, source.clone(), rng::mix(seed, STREAM_LABELS))?;
            let draw = sample_labels_per_class(&data.label_pool, &budget)?;
            let vbudget =
                LabelBudget::new(validation_k(k), source, rng::mix(seed, STREAM_VALIDATION))?;
            let validation = draw_per_class(&draw.remainder, &vbudget, false)?;
            (draw.labeled, validation.labeled)
        }
        (Strategy::Naive, _) => {
            let vbudget =
                LabelBudget::new(validation_k(0), source, rng::mix(seed, STREAM_VALIDATION))?;
            let validation = draw_per_class(&data.label_pool, &vbudget, false)?;
            (validation.remainder.labeled_samples(), validation.labeled)
        }
        (Strategy::MsSom, None) => {
            return Err(Error::InvalidConfig("MS-SOM cell without a label budget".into()))
        }
    };

    let mut drawn: BTreeSet<SampleRef> = labeled.iter().map(|s| s.sample.clone()).collect();
    drawn.extend(validation.iter().map(|s| s.sample.clone()));
    let test_set = stats.transform_dataset(&data.test_pool.without(&drawn))?;
    let labeled = normalize_samples(&stats, labeled)?;
    let validation = normalize_samples(&stats, validation)?;

    let predictor = match spec.strategy {
        Strategy::MsSom => {
            let n = cell
                .neighbors
                .ok_or_else(|| Error::InvalidConfig("MS-SOM cell without a neighbor count".into()))?;
            let graph = DistanceGraph::from_umatrix(&UMatrix::from_som(&som));
            let assign = LabeledAssignment::new(&som, &labeled)?;
            Predictor::Topological(MajorityVoteTable::build(&graph, &assign, n)?)
        }
        Strategy::Naive => Predictor::Naive(NaiveVoteTable::build(
            &som,
            &labeled,
            Fallback::NearestLabeledUnit,
        )?),
    };

    let score = |rows: &mut dyn Iterator<Item = (&[f64], PhaseLabel)>| -> Result<Evaluation> {
        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for (x, truth) in rows {
            preds.push(predictor.predict(&som, x)?);
            truths.push(truth);
        }
        let (confusion, metrics) = evaluate_with_abstentions(&preds, &truths)?;
        Ok(Evaluation { confusion, metrics })
    };
    let validation_eval = score(&mut validation.iter().map(|s| (s.features.as_slice(), s.label)))?;
    let test_eval = score(
        &mut test_set
            .frames()
            .iter()
            .filter_map(|f| f.label.map(|l| (f.features.as_slice(), l))),
    )?;

    Ok(CellOutcome::Completed {
        normalization_stats: stats,
        labeled_rows: labeled.len(),
        validation: validation_eval,
        test: test_eval,
    })
}

enum Predictor {
    Topological(MajorityVoteTable),
    Naive(NaiveVoteTable),
}

impl Predictor {
    fn predict(&self, som: &Som, x: &[f64]) -> Result<Option<PhaseLabel>> {
        let unit = som.best_matching_unit(x)?;
        match self {
            Predictor::Topological(t) => t.predict_unit(unit).map(Some),
            Predictor::Naive(t) => t.predict_unit(unit),
        }
    }
}

fn normalize_samples(
    stats: &NormalizationStats,
    samples: Vec<LabeledSample>,
) -> Result<Vec<LabeledSample>> {
    samples
        .into_iter()
        .map(|s| {
            Ok(LabeledSample {
                features: stats.transform(&s.features)?,
                ..s
            })
        })
        .collect()
}

/// Orders completed results best-first: highest validation accuracy, then
/// smaller map, fewer neighbors, `MinMax < Standard < Robust`, lower seed.
pub fn compare_by_validation(a: &ExperimentResult, b: &ExperimentResult) -> Ordering {
    let acc = |r: &ExperimentResult| r.validation().map(|v| v.metrics.overall_accuracy);
    match (acc(a), acc(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then(a.cell.som_size.cmp(&b.cell.som_size))
    .then(a.cell.neighbors.cmp(&b.cell.neighbors))
    .then(a.cell.normalization.cmp(&b.cell.normalization))
    .then(a.seed.cmp(&b.seed))
}

pub fn select_best_by_validation(results: &[ExperimentResult]) -> Result<&ExperimentResult> {
    results
        .iter()
        .filter(|r| r.validation().is_some())
        .min_by(|a, b| compare_by_validation(a, b))
        .ok_or(Error::Empty)
}
