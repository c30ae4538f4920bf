//! Parallel grid execution and grid input assembly.

use std::path::PathBuf;
use std::time::Instant;

use mssom_core::{
    run_cell, Dataset, ExperimentResult, GridData, GridSpec, SyntheticGenerator, NUM_CLASSES,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvio::load_flight_csv;
use crate::error::Result;

/// Class totals over the six labeled flight files.
pub const CORPUS_TOTALS: [usize; NUM_CLASSES] = [6981, 131, 2840, 3561, 254, 27272];

/// Runs every cell of `spec` on up to `workers` threads. Results come back in
/// [`GridSpec::cells`] order and do not depend on `workers`.
pub fn run_grid(spec: &GridSpec, data: &GridData, workers: usize) -> Result<Vec<ExperimentResult>> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let start = Instant::now();
                let mut r = run_cell(spec, cell, data);
                r.wall_clock = start.elapsed();
                r
            })
            .collect()
    }))
}

/// Scales `totals` to `rows`, keeping every non-empty class at >= 1 row.
/// Largest-remainder rounding, so the result sums to `rows` exactly.
pub fn scale_counts(totals: [usize; NUM_CLASSES], rows: usize) -> [usize; NUM_CLASSES] {
    let sum: usize = totals.iter().sum();
    let mut counts = [0; NUM_CLASSES];
    if sum == 0 {
        return counts;
    }
    let mut rema: Vec<(usize, usize)> = Vec::with_capacity(NUM_CLASSES);
    for (i, &t) in totals.iter().enumerate() {
        counts[i] = t * rows / sum;
        rema.push(((t * rows) % sum, i));
    }
    let mut left = rows - counts.iter().sum::<usize>();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &rema {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..NUM_CLASSES {
        if totals[i] > 0 && counts[i] == 0 {
            counts[i] = 1;
            let big = (0..NUM_CLASSES).max_by_key(|&j| counts[j]).unwrap();
            counts[big] -= 1;
        }
    }
    counts
}

/// Shape of the desk-scale stand-in for the flight corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub dims: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 4100,
            dims: 8,
            separation: 6.0,
            seed: 0,
        }
    }
}

/// A training file and an equally sized test file drawn around the same class
/// centers, both with corpus class proportions. Labels come from the
/// training file.
pub fn synthetic_grid_data(spec: &SyntheticSpec) -> Result<GridData> {
    let gen = SyntheticGenerator::new(spec.dims, spec.separation, spec.seed)?;
    let counts = scale_counts(CORPUS_TOTALS, spec.rows);
    let train = gen.sample(counts, "synthetic-train", 1)?;
    let test = gen.sample(counts, "synthetic-test", 2)?;
    Ok(GridData {
        label_pool: train.clone(),
        train_pool: train,
        test_pool: test,
    })
}

/// Flight files for each grid role. Files listed under both `labels` and
/// `test` lose their drawn rows from the test pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FileSplit {
    pub train: Vec<PathBuf>,
    pub labels: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

pub fn load_split<S: AsRef<str>>(split: &FileSplit, schema: &[S]) -> Result<GridData> {
    let load = |paths: &[PathBuf]| -> Result<Dataset> {
        let parts = paths
            .iter()
            .map(|p| load_flight_csv(p, schema))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::concat(&parts)?)
    };
    Ok(GridData {
        train_pool: load(&split.train)?,
        label_pool: load(&split.labels)?,
        test_pool: load(&split.test)?,
    })
}
