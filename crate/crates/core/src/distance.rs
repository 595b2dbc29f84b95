//! Mixed-type project distance.
//!
//! `d(p, q) = (1/m) * sqrt(sum_t delta(p_t, q_t))` over the `m` predictor
//! columns, where a categorical column contributes 0 or 1 and a continuous
//! column contributes a range-normalized squared difference.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureKind, FeatureStats, FeatureValue, ProjectRecord, ProjectSet};

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("schema has no predictor columns")]
    NoPredictors,
    #[error("column {column} has zero range in the training data but the compared values differ")]
    ZeroRange { column: usize },
    #[error("column {column}: value does not match the declared feature kind")]
    KindMismatch { column: usize },
    #[error("column {column}: continuous predictor has no statistics")]
    MissingStats { column: usize },
    #[error("invalid statistics for column {column}: max < min")]
    InvalidStats { column: usize },
    #[error("k = {k} is outside 1..={pool}")]
    KOutOfRange { k: usize, pool: usize },
}

pub type Result<T, E = DistanceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    /// Position of the column in the schema.
    pub column: usize,
    pub kind: FeatureKind,
    /// Present for continuous predictors.
    pub stats: Option<FeatureStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceConfig {
    predictors: Vec<Predictor>,
    /// `true`: `(a-b)^2 / (max-min)`; `false`: `((a-b) / (max-min))^2`.
    pub literal_eq2: bool,
}

impl DistanceConfig {
    pub fn new(predictors: Vec<Predictor>, literal_eq2: bool) -> Result<Self> {
        if predictors.is_empty() {
            return Err(DistanceError::NoPredictors);
        }
        for p in &predictors {
            if p.kind == FeatureKind::Continuous {
                let s = p
                    .stats
                    .ok_or(DistanceError::MissingStats { column: p.column })?;
                if !(s.max >= s.min) {
                    return Err(DistanceError::InvalidStats { column: p.column });
                }
            }
        }
        Ok(Self {
            predictors,
            literal_eq2,
        })
    }

    /// Use every predictor column of the schema with stats from `train`.
    pub fn from_training(train: &ProjectSet, literal_eq2: bool) -> Result<Self> {
        Self::for_columns(train, &train.schema().predictor_indices(), literal_eq2)
    }

    pub fn for_columns(train: &ProjectSet, columns: &[usize], literal_eq2: bool) -> Result<Self> {
        let features = train.schema().features();
        let predictors = columns
            .iter()
            .map(|&column| Predictor {
                column,
                kind: features[column].kind,
                stats: train.stats()[column],
            })
            .collect();
        Self::new(predictors, literal_eq2)
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    /// Number of predictor features, `m`.
    pub fn m(&self) -> usize {
        self.predictors.len()
    }
}

/// Contribution of one feature to the inner sum.
pub fn feature_delta(
    a: &FeatureValue,
    b: &FeatureValue,
    kind: FeatureKind,
    stats: Option<&FeatureStats>,
    literal_eq2: bool,
) -> std::result::Result<f64, DeltaError> {
    match kind {
        FeatureKind::Continuous => {
            let (FeatureValue::Num(x), FeatureValue::Num(y)) = (a, b) else {
                return Err(DeltaError::KindMismatch);
            };
            let stats = stats.ok_or(DeltaError::MissingStats)?;
            let range = stats.range();
            let diff = x - y;
            if range == 0.0 {
                return if diff == 0.0 {
                    Ok(0.0)
                } else {
                    Err(DeltaError::ZeroRange)
                };
            }
            Ok(if literal_eq2 {
                diff * diff / range
            } else {
                let r = diff / range;
                r * r
            })
        }
        FeatureKind::Categorical => match (a, b) {
            (FeatureValue::Cat(x), FeatureValue::Cat(y)) => Ok(if x == y { 0.0 } else { 1.0 }),
            _ => Err(DeltaError::KindMismatch),
        },
    }
}

/// Column-free failure of [`feature_delta`]; [`distance`] attaches the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DeltaError {
    #[error("zero range with differing values")]
    ZeroRange,
    #[error("value kind mismatch")]
    KindMismatch,
    #[error("missing statistics")]
    MissingStats,
}

impl DeltaError {
    fn at(self, column: usize) -> DistanceError {
        match self {
            DeltaError::ZeroRange => DistanceError::ZeroRange { column },
            DeltaError::KindMismatch => DistanceError::KindMismatch { column },
            DeltaError::MissingStats => DistanceError::MissingStats { column },
        }
    }
}

/// `sum_t delta(p_t, q_t)`: the part of the distance under the square root.
pub fn delta_sum(p: &ProjectRecord, q: &ProjectRecord, cfg: &DistanceConfig) -> Result<f64> {
    let mut sum = 0.0;
    for pred in &cfg.predictors {
        let (a, b) = match (p.values.get(pred.column), q.values.get(pred.column)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(DistanceError::KindMismatch {
                    column: pred.column,
                })
            }
        };
        sum += feature_delta(a, b, pred.kind, pred.stats.as_ref(), cfg.literal_eq2)
            .map_err(|e| e.at(pred.column))?;
    }
    Ok(sum)
}

pub fn distance(p: &ProjectRecord, q: &ProjectRecord, cfg: &DistanceConfig) -> Result<f64> {
    Ok(delta_sum(p, q, cfg)?.sqrt() / cfg.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Ascending by distance, then by index.
pub fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.index.cmp(&b.index))
}

/// Every pool record, nearest first.
///
/// Sorting happens on the inner sum: the square root can map two sums a
/// few ulps apart to the same distance, which would let the index
/// tie-break reorder them.
pub fn ranked_neighbors(
    query: &ProjectRecord,
    pool: &ProjectSet,
    cfg: &DistanceConfig,
) -> Result<Vec<Neighbor>> {
    let mut sums = pool
        .records()
        .iter()
        .enumerate()
        .map(|(index, r)| delta_sum(query, r, cfg).map(|distance| Neighbor { index, distance }))
        .collect::<Result<Vec<_>>>()?;
    sums.sort_by(neighbor_order);
    let m = cfg.m() as f64;
    for n in &mut sums {
        n.distance = n.distance.sqrt() / m;
    }
    Ok(sums)
}

pub fn nearest_neighbors(
    query: &ProjectRecord,
    pool: &ProjectSet,
    cfg: &DistanceConfig,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if k == 0 || k > pool.len() {
        return Err(DistanceError::KOutOfRange {
            k,
            pool: pool.len(),
        });
    }
    let mut all = ranked_neighbors(query, pool, cfg)?;
    all.truncate(k);
    Ok(all)
}
