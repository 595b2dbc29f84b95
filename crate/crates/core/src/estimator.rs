//! Effort estimates: the bisecting-tree leaf mean, fixed-K nearest
//! neighbours, and the per-project best-K search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bktree::{BkTree, TreeError};
use crate::dataset::{ProjectRecord, ProjectSet};
use crate::distance::{self, DistanceConfig, DistanceError};

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("k = {k} exceeds the training set size {train}")]
    KTooLarge { k: usize, train: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("actual effort must be positive, got {0}")]
    NonPositiveActual(f64),
    #[error("unknown method `{0}` (expected bk, bestk or k<N>)")]
    UnknownMethod(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T, E = EstimateError> = std::result::Result<T, E>;

/// Estimation method tag: `bk`, `k<N>` or `bestk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Bk,
    FixedK(usize),
    BestK,
}

impl Method {
    /// The benchmark line-up: BK plus K = 1, 2, 4, 8, 16.
    pub const STANDARD: [Method; 6] = [
        Method::Bk,
        Method::FixedK(1),
        Method::FixedK(2),
        Method::FixedK(4),
        Method::FixedK(8),
        Method::FixedK(16),
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bk => f.write_str("bk"),
            Method::FixedK(k) => write!(f, "k{k}"),
            Method::BestK => f.write_str("bestk"),
        }
    }
}

impl FromStr for Method {
    type Err = EstimateError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bk" => Ok(Method::Bk),
            "bestk" => Ok(Method::BestK),
            t => match t.strip_prefix('k').and_then(|n| n.parse::<usize>().ok()) {
                Some(k) if k >= 1 => Ok(Method::FixedK(k)),
                _ => Err(EstimateError::UnknownMethod(s.to_string())),
            },
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub project_id: String,
    pub predicted_effort: f64,
    pub method: Method,
    pub k_used: usize,
    pub analogy_ids: Vec<String>,
}

/// Unweighted mean effort of the given training rows.
fn mean_effort(train: &ProjectSet, indices: impl Iterator<Item = usize>) -> (f64, Vec<String>) {
    let mut sum = 0.0;
    let mut ids = Vec::new();
    for i in indices {
        sum += train.effort(i);
        ids.push(train.records()[i].id.clone());
    }
    (sum / ids.len() as f64, ids)
}

/// Mean effort of the members of the leaf closest to `query`.
pub fn estimate_bk(tree: &BkTree<'_>, query: &ProjectRecord) -> Result<Estimate> {
    let leaf = tree.find_leaf(query)?;
    let (predicted_effort, analogy_ids) =
        mean_effort(tree.train(), leaf.cluster.members.iter().copied());
    Ok(Estimate {
        project_id: query.id.clone(),
        predicted_effort,
        method: Method::Bk,
        k_used: analogy_ids.len(),
        analogy_ids,
    })
}

pub fn estimate_fixed_k(
    train: &ProjectSet,
    cfg: &DistanceConfig,
    query: &ProjectRecord,
    k: usize,
) -> Result<Estimate> {
    if k == 0 {
        return Err(EstimateError::ZeroK);
    }
    if k > train.len() {
        return Err(EstimateError::KTooLarge {
            k,
            train: train.len(),
        });
    }
    let nn = distance::nearest_neighbors(query, train, cfg, k)?;
    let (predicted_effort, analogy_ids) = mean_effort(train, nn.iter().map(|n| n.index));
    Ok(Estimate {
        project_id: query.id.clone(),
        predicted_effort,
        method: Method::FixedK(k),
        k_used: k,
        analogy_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestK {
    pub k: usize,
    pub mre: f64,
    pub predicted_effort: f64,
}

/// Try every K in `1..=|train|` and keep the one with the lowest MRE
/// against `actual_effort`; ties keep the smaller K.
pub fn best_k_search(
    train: &ProjectSet,
    cfg: &DistanceConfig,
    query: &ProjectRecord,
    actual_effort: f64,
) -> Result<BestK> {
    if !(actual_effort > 0.0) {
        return Err(EstimateError::NonPositiveActual(actual_effort));
    }
    let ranked = distance::ranked_neighbors(query, train, cfg)?;
    let mut best: Option<BestK> = None;
    let mut sum = 0.0;
    for (i, n) in ranked.iter().enumerate() {
        sum += train.effort(n.index);
        let k = i + 1;
        let predicted = sum / k as f64;
        let mre = (actual_effort - predicted).abs() / actual_effort;
        if best.is_none_or(|b| mre < b.mre) {
            best = Some(BestK {
                k,
                mre,
                predicted_effort: predicted,
            });
        }
    }
    Ok(best.expect("training set is nonempty"))
}

/// Frequency of each K value.
pub fn k_histogram<S: AsRef<str>>(results: &[(S, usize)]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for (_, k) in results {
        *h.entry(*k).or_insert(0) += 1;
    }
    h
}
