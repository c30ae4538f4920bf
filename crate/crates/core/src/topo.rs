//! U-Matrix graph, Dijkstra shortest paths and labeled-neighbor ranking.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{euclidean, LabeledSample, PhaseLabel, SampleRef, NUM_CLASSES};
use crate::som::Som;
use crate::{Error, Result};

/// Undirected edge between grid-adjacent units, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Distances between the codebook vectors of 4-adjacent units.
///
/// Edges are listed unit by unit in id order, the right neighbor before the
/// one below.
#[derive(Clone, Debug, PartialEq)]
pub struct UMatrix {
    rows: usize,
    cols: usize,
    edges: Vec<Edge>,
    unit_mean_dist: Vec<f64>,
}

/// Grid-adjacent pairs in canonical edge order.
fn grid_pairs(rows: usize, cols: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..rows * cols).flat_map(move |u| {
        let (r, c) = (u / cols, u % cols);
        let right = (c + 1 < cols).then_some((u, u + 1));
        let down = (r + 1 < rows).then_some((u, u + cols));
        right.into_iter().chain(down)
    })
}

impl UMatrix {
    pub fn from_som(som: &Som) -> Self {
        let edges = grid_pairs(som.rows(), som.cols())
            .map(|(a, b)| Edge {
                a,
                b,
                weight: euclidean(som.weights(a), som.weights(b)),
            })
            .collect();
        Self::assemble(som.rows(), som.cols(), edges)
    }

    /// Builds from explicit weights; `edges` must cover every grid-adjacent
    /// pair exactly once (in any order, either orientation) with weights >= 0.
    pub fn from_edges(rows: usize, cols: usize, edges: &[Edge]) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidConfig(format!("{rows}x{cols} grid is too small")));
        }
        let mut given = BTreeMap::new();
        for e in edges {
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "edge {}-{} has invalid weight {}",
                    key.0, key.1, e.weight
                )));
            }
            if given.insert(key, e.weight).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate edge {}-{}", key.0, key.1)));
            }
        }
        let mut ordered = Vec::with_capacity(edges.len());
        for (a, b) in grid_pairs(rows, cols) {
            let weight = given
                .remove(&(a, b))
                .ok_or_else(|| Error::InvalidConfig(format!("missing edge {a}-{b}")))?;
            ordered.push(Edge { a, b, weight });
        }
        if let Some(((a, b), _)) = given.into_iter().next() {
            return Err(Error::InvalidConfig(format!("{a}-{b} is not a grid edge")));
        }
        Ok(Self::assemble(rows, cols, ordered))
    }

    fn assemble(rows: usize, cols: usize, edges: Vec<Edge>) -> Self {
        let units = rows * cols;
        let mut sum = vec![0.0; units];
        let mut degree = vec![0usize; units];
        for e in &edges {
            sum[e.a] += e.weight;
            sum[e.b] += e.weight;
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let unit_mean_dist = sum.iter().zip(&degree).map(|(s, &d)| s / d as f64).collect();
        Self {
            rows,
            cols,
            edges,
            unit_mean_dist,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Mean weight of each unit's incident edges.
    pub fn unit_mean_dist(&self) -> &[f64] {
        &self.unit_mean_dist
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.edges
            .iter()
            .find(|e| (e.a, e.b) == key)
            .map(|e| e.weight)
    }
}

pub fn build_umatrix(som: &Som) -> UMatrix {
    UMatrix::from_som(som)
}

/// Adjacency-list view of a [`UMatrix`] for shortest-path queries.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl DistanceGraph {
    pub fn from_umatrix(u: &UMatrix) -> Self {
        let mut adjacency = vec![Vec::with_capacity(4); u.units()];
        for e in u.edges() {
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        Self { adjacency }
    }

    pub fn n_units(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, unit: usize) -> &[(usize, f64)] {
        &self.adjacency[unit]
    }

    /// Single-source Dijkstra; every unit is reachable on a grid.
    pub fn dijkstra(&self, source: usize) -> Result<Vec<f64>> {
        if source >= self.n_units() {
            return Err(Error::InvalidUnit(source));
        }
        let mut dist = vec![f64::INFINITY; self.n_units()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier {
            dist: 0.0,
            unit: source,
        });
        while let Some(Frontier { dist: d, unit }) = heap.pop() {
            if d > dist[unit] {
                continue;
            }
            for &(next, w) in &self.adjacency[unit] {
                let candidate = d + w;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    heap.push(Frontier {
                        dist: candidate,
                        unit: next,
                    });
                }
            }
        }
        Ok(dist)
    }
}

/// Min-heap entry.
#[derive(Clone, Copy, Debug)]
struct Frontier {
    dist: f64,
    unit: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.unit.cmp(&self.unit))
    }
}

/// Distances from a set of source units to every unit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShortestPaths {
    by_source: BTreeMap<usize, Vec<f64>>,
}

impl ShortestPaths {
    pub fn distance(&self, source: usize, unit: usize) -> Option<f64> {
        self.by_source.get(&source).and_then(|d| d.get(unit).copied())
    }

    pub fn from_source(&self, source: usize) -> Option<&[f64]> {
        self.by_source.get(&source).map(Vec::as_slice)
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_source.keys().copied()
    }
}

/// Runs Dijkstra from each distinct source.
pub fn shortest_paths_from(g: &DistanceGraph, sources: &[usize]) -> Result<ShortestPaths> {
    if sources.is_empty() {
        return Err(Error::InvalidConfig("no source units given".into()));
    }
    let mut by_source = BTreeMap::new();
    for &s in sources {
        if let alloc::collections::btree_map::Entry::Vacant(e) = by_source.entry(s) {
            e.insert(g.dijkstra(s)?);
        }
    }
    Ok(ShortestPaths { by_source })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignedLabel {
    pub sample: SampleRef,
    pub label: PhaseLabel,
    pub bmu: usize,
}

/// Labeled samples projected onto their best-matching units.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledAssignment {
    entries: Vec<AssignedLabel>,
}

impl LabeledAssignment {
    /// `labeled` must already be normalized like the map's training data.
    pub fn new(som: &Som, labeled: &[LabeledSample]) -> Result<Self> {
        let entries = labeled
            .iter()
            .map(|s| {
                Ok(AssignedLabel {
                    sample: s.sample.clone(),
                    label: s.label,
                    bmu: som.best_matching_unit(&s.features)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn from_entries(entries: Vec<AssignedLabel>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[AssignedLabel] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct BMUs in ascending id order.
    pub fn labeled_units(&self) -> Vec<usize> {
        let mut units: Vec<usize> = self.entries.iter().map(|e| e.bmu).collect();
        units.sort_unstable();
        units.dedup();
        units
    }

    /// Label counts per hosting unit.
    pub fn per_unit(&self) -> BTreeMap<usize, [usize; NUM_CLASSES]> {
        let mut map: BTreeMap<usize, [usize; NUM_CLASSES]> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.bmu).or_default()[e.label.index()] += 1;
        }
        map
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub sample: SampleRef,
    pub label: PhaseLabel,
    pub bmu: usize,
    pub distance: f64,
}

/// Labeled samples ordered by graph distance from `query_unit`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub query_unit: usize,
    pub neighbors: Vec<Neighbor>,
}

/// Ranks every labeled sample by the graph distance between `query_unit` and
/// the sample's BMU, breaking ties by BMU id then sample identity, and keeps
/// the first `min(n, len)`.
///
/// `paths` must contain a run from every labeled BMU; the graph is
/// undirected, so the distance from a BMU to the query is the one needed.
pub fn k_nearest_labeled(
    paths: &ShortestPaths,
    assign: &LabeledAssignment,
    query_unit: usize,
    n: usize,
) -> Result<NeighborList> {
    if assign.is_empty() {
        return Err(Error::NoLabeledData);
    }
    if n == 0 {
        return Err(Error::InvalidConfig("neighbor count must be >= 1".into()));
    }
    let mut ranked = assign
        .entries()
        .iter()
        .map(|e| {
            let distance = paths
                .distance(e.bmu, query_unit)
                .ok_or(Error::InvalidUnit(if paths.by_source.contains_key(&e.bmu) {
                    query_unit
                } else {
                    e.bmu
                }))?;
            Ok((distance, e))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|(da, a), (db, b)| {
        da.total_cmp(db)
            .then(a.bmu.cmp(&b.bmu))
            .then_with(|| a.sample.cmp(&b.sample))
    });
    ranked.truncate(n);
    Ok(NeighborList {
        query_unit,
        neighbors: ranked
            .into_iter()
            .map(|(distance, e)| Neighbor {
                sample: e.sample.clone(),
                label: e.label,
                bmu: e.bmu,
                distance,
            })
            .collect(),
    })
}
