//! Rectangular self-organizing map: training and best-matching-unit search.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{squared_euclidean, Dataset};
use crate::rng;
use crate::{Error, Result};

/// Training configuration. Distances are Euclidean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub radius_initial: f64,
    pub radius_final: f64,
    pub seed: u64,
}

impl SomConfig {
    /// 20 epochs, learning rate 0.5 to 0.01, radius `max(rows, cols) / 2` to 1.
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            epochs: 20,
            lr_initial: 0.5,
            lr_final: 0.01,
            radius_initial: rows.max(cols) as f64 / 2.0,
            radius_final: 1.0,
            seed,
        }
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{msg} ({self:?})")));
        if self.rows < 2 || self.cols < 2 {
            return bad("SOM needs at least 2 rows and 2 columns");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final && self.lr_initial.is_finite()) {
            return bad("learning rates must satisfy lr_initial >= lr_final > 0");
        }
        if !(self.radius_final >= 0.0
            && self.radius_initial >= self.radius_final
            && self.radius_initial.is_finite())
        {
            return bad("radii must satisfy radius_initial >= radius_final >= 0");
        }
        Ok(())
    }

    /// Linear interpolation from initial to final over the epochs.
    fn schedule(&self, epoch: usize) -> (f64, f64) {
        let t = if self.epochs == 1 {
            0.0
        } else {
            epoch as f64 / (self.epochs - 1) as f64
        };
        (
            self.lr_initial + (self.lr_final - self.lr_initial) * t,
            self.radius_initial + (self.radius_final - self.radius_initial) * t,
        )
    }
}

/// A trained map. Unit `(r, c)` has flat id `r * cols + c`; the codebook is
/// stored row-major, one `dims`-long vector per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Som {
    config: SomConfig,
    dims: usize,
    codebook: Vec<f64>,
    initial_quantization_error: Option<f64>,
    quantization_errors: Vec<f64>,
}

impl Som {
    /// Rebuilds a map from stored parts (e.g. a model file).
    pub fn from_parts(config: SomConfig, dims: usize, codebook: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if dims == 0 || codebook.len() != config.units() * dims {
            return Err(Error::DimensionMismatch {
                expected: config.units() * dims,
                got: codebook.len(),
            });
        }
        if let Some(i) = codebook.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dims,
                feature: i % dims,
            });
        }
        Ok(Self {
            config,
            dims,
            codebook,
            initial_quantization_error: None,
            quantization_errors: Vec::new(),
        })
    }

    pub fn config(&self) -> &SomConfig {
        &self.config
    }

    pub fn rows(&self) -> usize {
        self.config.rows
    }

    pub fn cols(&self) -> usize {
        self.config.cols
    }

    pub fn units(&self) -> usize {
        self.config.units()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn codebook(&self) -> &[f64] {
        &self.codebook
    }

    pub fn weights(&self, unit: usize) -> &[f64] {
        &self.codebook[unit * self.dims..(unit + 1) * self.dims]
    }

    pub fn unit_id(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    pub fn unit_coords(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols(), unit % self.cols())
    }

    /// Quantization error of the sampled initial codebook, when trained here.
    pub fn initial_quantization_error(&self) -> Option<f64> {
        self.initial_quantization_error
    }

    /// Quantization error on the training data after each epoch.
    pub fn quantization_errors(&self) -> &[f64] {
        &self.quantization_errors
    }

    /// Trains on `samples` (already normalized).
    ///
    /// Units start at randomly chosen samples. Each epoch visits the samples
    /// in a fresh shuffled order and, for each one, pulls every unit towards
    /// it by `lr * exp(-d^2 / (2 sigma^2))`, with `d` the grid distance to the
    /// BMU. `lr` and `sigma` decay linearly per epoch.
    pub fn train<S: AsRef<[f64]>>(config: SomConfig, samples: &[S]) -> Result<Self> {
        config.validate()?;
        let dims = samples.first().ok_or(Error::EmptyData)?.as_ref().len();
        for s in samples {
            if s.as_ref().len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: s.as_ref().len(),
                });
            }
        }
        if dims == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }

        let units = config.units();
        let mut init_rng = rng::stream(config.seed, 0);
        let picks: Vec<usize> = if samples.len() >= units {
            index::sample(&mut init_rng, samples.len(), units).into_vec()
        } else {
            (0..units).map(|_| init_rng.random_range(0..samples.len())).collect()
        };
        let mut codebook = Vec::with_capacity(units * dims);
        for i in picks {
            codebook.extend_from_slice(samples[i].as_ref());
        }

        let mut som = Self {
            config,
            dims,
            codebook,
            initial_quantization_error: None,
            quantization_errors: Vec::with_capacity(0),
        };
        som.initial_quantization_error = Some(som.mean_bmu_distance(samples));

        let (rows, cols) = (som.rows(), som.cols());
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut shuffle_rng = rng::stream(som.config.seed, 1);
        // Neighborhood weights indexed by |dr| * cols + |dc|.
        let mut kernel = vec![0.0; units];
        for epoch in 0..som.config.epochs {
            let (lr, sigma) = som.config.schedule(epoch);
            for dr in 0..rows {
                for dc in 0..cols {
                    let d2 = (dr * dr + dc * dc) as f64;
                    kernel[dr * cols + dc] = if sigma > 0.0 {
                        libm::exp(-d2 / (2.0 * sigma * sigma))
                    } else if d2 == 0.0 {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
            order.shuffle(&mut shuffle_rng);
            for &i in &order {
                let x = samples[i].as_ref();
                let bmu = som.bmu_unchecked(x);
                let (br, bc) = som.unit_coords(bmu);
                for unit in 0..units {
                    let (r, c) = (unit / cols, unit % cols);
                    let h = kernel[r.abs_diff(br) * cols + c.abs_diff(bc)];
                    if h == 0.0 {
                        continue;
                    }
                    let step = lr * h;
                    let w = &mut som.codebook[unit * dims..(unit + 1) * dims];
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj += step * (xj - *wj);
                    }
                }
            }
            debug_assert!(som.codebook.iter().all(|v| v.is_finite()));
            let qe = som.mean_bmu_distance(samples);
            som.quantization_errors.push(qe);
        }
        Ok(som)
    }

    /// Unit with the smallest Euclidean distance to `x`; lowest id on ties.
    pub fn best_matching_unit(&self, x: &[f64]) -> Result<usize> {
        self.check_dims(x.len())?;
        Ok(self.bmu_unchecked(x))
    }

    fn bmu_unchecked(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (unit, w) in self.codebook.chunks_exact(self.dims).enumerate() {
            let d = squared_euclidean(w, x);
            if d < best_d {
                best_d = d;
                best = unit;
            }
        }
        best
    }

    fn mean_bmu_distance<S: AsRef<[f64]>>(&self, samples: &[S]) -> f64 {
        let total: f64 = samples
            .iter()
            .map(|s| {
                let x = s.as_ref();
                libm::sqrt(squared_euclidean(self.weights(self.bmu_unchecked(x)), x))
            })
            .sum();
        total / samples.len() as f64
    }

    /// Mean distance from each sample to its BMU's codebook vector.
    pub fn quantization_error<S: AsRef<[f64]>>(&self, samples: &[S]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptyData);
        }
        for s in samples {
            self.check_dims(s.as_ref().len())?;
        }
        Ok(self.mean_bmu_distance(samples))
    }

    fn check_dims(&self, len: usize) -> Result<()> {
        if len != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: len,
            });
        }
        Ok(())
    }
}

pub fn train_som(config: SomConfig, data: &Dataset) -> Result<Som> {
    Som::train(config, data.frames())
}

pub fn best_matching_unit(som: &Som, x: &[f64]) -> Result<usize> {
    som.best_matching_unit(x)
}

pub fn quantization_error(som: &Som, data: &Dataset) -> Result<f64> {
    som.quantization_error(data.frames())
}
