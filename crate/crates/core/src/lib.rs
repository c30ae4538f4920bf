//! Minimally supervised self-organizing map (MS-SOM) classification.
//!
//! A SOM is trained on unlabeled rows, a handful of labeled rows are projected
//! onto it, and every unit is assigned the majority class of its `N`
//! topologically nearest labeled samples, where "nearest" is shortest-path
//! distance over the U-Matrix graph. A naive fully-labeled SOM classifier is
//! provided as the baseline, together with the metrics and per-cell experiment
//! logic used by the grid runner.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, CSV ingestion,
//! parallel grid execution and the CLI live in the `mssom` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod dataset;
pub mod eval;
pub mod normalize;
pub mod rng;
pub mod som;
pub mod topo;

mod error;

pub use classify::{
    build_msom_table, build_naive_table, msom_predict, naive_predict, Fallback,
    MajorityVoteTable, NaiveVoteTable, UnitVote,
};
pub use dataset::{
    class_histogram, generate_synthetic, sample_labels_per_class, ClassHistogram, Dataset,
    FlightFrame, LabelBudget, LabelDraw, LabelSource, LabeledSample, PhaseLabel, SampleRef,
    SyntheticGenerator, NGAFID_FEATURES, NUM_CLASSES,
};
pub use error::{Error, Result};
pub use eval::{
    compare_by_validation, evaluate, evaluate_with_abstentions, run_cell, select_best_by_validation,
    CellId, CellOutcome, ConfusionMatrix, Evaluation, ExperimentResult, GridData, GridSpec,
    Metrics, SomSchedule, Strategy,
};
pub use normalize::{fit_normalizer, NormalizationKind, NormalizationStats};
pub use som::{best_matching_unit, quantization_error, train_som, Som, SomConfig};
pub use topo::{
    build_umatrix, k_nearest_labeled, shortest_paths_from, AssignedLabel, DistanceGraph, Edge,
    LabeledAssignment, Neighbor, NeighborList, ShortestPaths, UMatrix,
};
