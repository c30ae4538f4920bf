//! Per-unit vote tables: the topological MS-SOM vote and the naive baseline.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSample, PhaseLabel, NUM_CLASSES};
use crate::som::Som;
use crate::topo::{
    k_nearest_labeled, shortest_paths_from, DistanceGraph, LabeledAssignment, UMatrix,
};
use crate::{Error, Result};

/// Vote breakdown for one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitVote {
    pub prediction: PhaseLabel,
    pub counts: [usize; NUM_CLASSES],
    /// Summed graph distance of the neighbors voting for each class.
    pub distance_sums: [f64; NUM_CLASSES],
}

/// Highest count wins; then the smaller summed distance; then the lower code.
pub(crate) fn decide(counts: &[usize; NUM_CLASSES], sums: &[f64; NUM_CLASSES]) -> Option<PhaseLabel> {
    let mut best: Option<PhaseLabel> = None;
    for class in PhaseLabel::ALL {
        let i = class.index();
        if counts[i] == 0 {
            continue;
        }
        best = match best {
            Some(b) if counts[b.index()] > counts[i] => Some(b),
            Some(b) if counts[b.index()] == counts[i] && sums[b.index()] <= sums[i] => Some(b),
            _ => Some(class),
        };
    }
    best
}

/// Cached MS-SOM prediction for every unit of a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityVoteTable {
    n_neighbors: usize,
    votes: Vec<UnitVote>,
}

impl MajorityVoteTable {
    /// For every unit, votes among its `n` nearest labeled samples by graph
    /// distance. Dijkstra runs only from the units hosting labeled samples.
    pub fn build(g: &DistanceGraph, assign: &LabeledAssignment, n: usize) -> Result<Self> {
        if assign.is_empty() {
            return Err(Error::NoLabeledData);
        }
        if n == 0 {
            return Err(Error::InvalidConfig("neighbor count must be >= 1".into()));
        }
        let paths = shortest_paths_from(g, &assign.labeled_units())?;
        let votes = (0..g.n_units())
            .map(|unit| {
                let list = k_nearest_labeled(&paths, assign, unit, n)?;
                let mut counts = [0; NUM_CLASSES];
                let mut distance_sums = [0.0; NUM_CLASSES];
                for nb in &list.neighbors {
                    counts[nb.label.index()] += 1;
                    distance_sums[nb.label.index()] += nb.distance;
                }
                let prediction = decide(&counts, &distance_sums).ok_or(Error::NoLabeledData)?;
                Ok(UnitVote {
                    prediction,
                    counts,
                    distance_sums,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n_neighbors: n,
            votes,
        })
    }

    /// Rebuilds a stored table, checking each prediction against its breakdown.
    pub fn from_votes(n_neighbors: usize, votes: Vec<UnitVote>) -> Result<Self> {
        for (unit, v) in votes.iter().enumerate() {
            if decide(&v.counts, &v.distance_sums) != Some(v.prediction) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "stored prediction for unit {unit} contradicts its vote counts"
                )));
            }
        }
        Ok(Self { n_neighbors, votes })
    }

    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    pub fn votes(&self) -> &[UnitVote] {
        &self.votes
    }

    pub fn units(&self) -> usize {
        self.votes.len()
    }

    pub fn predict_unit(&self, unit: usize) -> Result<PhaseLabel> {
        self.votes
            .get(unit)
            .map(|v| v.prediction)
            .ok_or(Error::InvalidUnit(unit))
    }
}

pub fn build_msom_table(
    g: &DistanceGraph,
    assign: &LabeledAssignment,
    n: usize,
) -> Result<MajorityVoteTable> {
    MajorityVoteTable::build(g, assign, n)
}

/// BMU lookup followed by a table lookup.
pub fn msom_predict(som: &Som, table: &MajorityVoteTable, x: &[f64]) -> Result<PhaseLabel> {
    check_table(som, table.units())?;
    table.predict_unit(som.best_matching_unit(x)?)
}

fn check_table(som: &Som, units: usize) -> Result<()> {
    if som.units() != units {
        return Err(Error::InvalidConfig(alloc::format!(
            "vote table covers {units} units but the map has {}",
            som.units()
        )));
    }
    Ok(())
}

/// What the naive table predicts for a unit no labeled sample mapped to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// Borrow the prediction of the nearest non-empty unit by graph distance
    /// (lowest id on ties).
    NearestLabeledUnit,
    /// Leave the unit without a prediction.
    Disabled,
}

/// Per-unit majority of the labeled samples mapped to each unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveVoteTable {
    counts: Vec<[usize; NUM_CLASSES]>,
    own: Vec<Option<PhaseLabel>>,
    /// For empty units: the unit whose prediction is borrowed.
    fallback_from: Vec<Option<usize>>,
}

impl NaiveVoteTable {
    /// `labeled` must be normalized like the map's training data.
    pub fn build(som: &Som, labeled: &[LabeledSample], fallback: Fallback) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::NoLabeledData);
        }
        let mut counts = vec![[0usize; NUM_CLASSES]; som.units()];
        for s in labeled {
            counts[som.best_matching_unit(&s.features)?][s.label.index()] += 1;
        }
        let zero = [0.0; NUM_CLASSES];
        let own: Vec<Option<PhaseLabel>> = counts.iter().map(|c| decide(c, &zero)).collect();

        let mut fallback_from = vec![None; som.units()];
        if fallback == Fallback::NearestLabeledUnit {
            let g = DistanceGraph::from_umatrix(&UMatrix::from_som(som));
            for unit in (0..som.units()).filter(|&u| own[u].is_none()) {
                let dist = g.dijkstra(unit)?;
                fallback_from[unit] = (0..som.units())
                    .filter(|&v| own[v].is_some())
                    .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
            }
        }
        Ok(Self {
            counts,
            own,
            fallback_from,
        })
    }

    /// Rebuilds a stored table. Own predictions are recomputed from `counts`;
    /// every fallback must point at a unit with an own prediction.
    pub fn from_parts(
        counts: Vec<[usize; NUM_CLASSES]>,
        fallback_from: Vec<Option<usize>>,
    ) -> Result<Self> {
        if counts.len() != fallback_from.len() {
            return Err(Error::DimensionMismatch {
                expected: counts.len(),
                got: fallback_from.len(),
            });
        }
        let zero = [0.0; NUM_CLASSES];
        let own: Vec<Option<PhaseLabel>> = counts.iter().map(|c| decide(c, &zero)).collect();
        if own.iter().all(Option::is_none) {
            return Err(Error::NoLabeledData);
        }
        for (unit, f) in fallback_from.iter().enumerate() {
            if let Some(v) = *f {
                if own[unit].is_some() || own.get(v).copied().flatten().is_none() {
                    return Err(Error::InvalidUnit(v));
                }
            }
        }
        Ok(Self {
            counts,
            own,
            fallback_from,
        })
    }

    pub fn units(&self) -> usize {
        self.own.len()
    }

    /// Label counts of the samples mapped to `unit`.
    pub fn counts(&self, unit: usize) -> Option<&[usize; NUM_CLASSES]> {
        self.counts.get(unit)
    }

    /// The unit's own majority, `None` for empty units.
    pub fn own_prediction(&self, unit: usize) -> Option<PhaseLabel> {
        self.own.get(unit).copied().flatten()
    }

    pub fn fallback_from(&self, unit: usize) -> Option<usize> {
        self.fallback_from.get(unit).copied().flatten()
    }

    /// Own majority, else the borrowed one; `None` only with fallback disabled.
    pub fn predict_unit(&self, unit: usize) -> Result<Option<PhaseLabel>> {
        if unit >= self.units() {
            return Err(Error::InvalidUnit(unit));
        }
        Ok(self.own[unit].or_else(|| self.fallback_from[unit].and_then(|v| self.own[v])))
    }
}

pub fn build_naive_table(
    som: &Som,
    labeled: &[LabeledSample],
    fallback: Fallback,
) -> Result<NaiveVoteTable> {
    NaiveVoteTable::build(som, labeled, fallback)
}

pub fn naive_predict(som: &Som, table: &NaiveVoteTable, x: &[f64]) -> Result<Option<PhaseLabel>> {
    check_table(som, table.units())?;
    table.predict_unit(som.best_matching_unit(x)?)
}
