//! Per-feature min-max, z-score and robust scaling.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{Error, Result};

/// Ordered `MinMax < Standard < Robust`; grid tie-breaks rely on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationKind {
    MinMax,
    Standard,
    Robust,
}

impl NormalizationKind {
    pub const ALL: [NormalizationKind; 3] = [Self::MinMax, Self::Standard, Self::Robust];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MinMax => "minmax",
            Self::Standard => "standard",
            Self::Robust => "robust",
        }
    }
}

impl fmt::Display for NormalizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown normalization `{s}`")))
    }
}

/// Fitted per-feature parameters.
///
/// `location` is the min, mean or median and `scale` the range, population
/// standard deviation or interquartile range, depending on `kind`. A zero
/// scale is stored as 1, which is the denominator actually applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub kind: NormalizationKind,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Fits `kind` over every frame of `data`.
pub fn fit_normalizer(kind: NormalizationKind, data: &Dataset) -> Result<NormalizationStats> {
    NormalizationStats::fit(kind, data.frames())
}

impl NormalizationStats {
    pub fn fit<S: AsRef<[f64]>>(kind: NormalizationKind, rows: &[S]) -> Result<Self> {
        let dims = rows.first().ok_or(Error::EmptyData)?.as_ref().len();
        let mut location = Vec::with_capacity(dims);
        let mut scale = Vec::with_capacity(dims);
        let mut column = Vec::with_capacity(rows.len());
        for j in 0..dims {
            column.clear();
            for row in rows {
                let row = row.as_ref();
                if row.len() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        got: row.len(),
                    });
                }
                column.push(row[j]);
            }
            let (loc, spread) = match kind {
                NormalizationKind::MinMax => {
                    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (min, max - min)
                }
                NormalizationKind::Standard => {
                    let n = column.len() as f64;
                    let mean = column.iter().sum::<f64>() / n;
                    let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    (mean, libm::sqrt(var))
                }
                NormalizationKind::Robust => {
                    column.sort_unstable_by(f64::total_cmp);
                    let q1 = quantile_sorted(&column, 0.25);
                    let q3 = quantile_sorted(&column, 0.75);
                    (quantile_sorted(&column, 0.5), q3 - q1)
                }
            };
            location.push(loc);
            scale.push(if spread == 0.0 || !spread.is_finite() { 1.0 } else { spread });
        }
        Ok(Self {
            kind,
            location,
            scale,
        })
    }

    pub fn dims(&self) -> usize {
        self.location.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<alloc::vec::Vec<f64>> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(self.location.iter().zip(&self.scale))
            .map(|(v, (loc, s))| (v - loc) / s)
            .collect())
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        data.map_features(|x| self.transform(x))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Linear interpolation between order statistics: `h = (n - 1) p`.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
