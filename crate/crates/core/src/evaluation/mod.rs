//! Leave-one-out evaluation, accuracy metrics and significance tests.

mod compare;
mod metrics;
mod report;
mod wilcoxon;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bktree::{BkTree, BuildParams};
use crate::dataset::{DatasetError, ProjectSet};
use crate::distance::{DistanceConfig, DistanceError};
use crate::estimator::{self, EstimateError, Method};
use crate::seed::derive_seed;

pub use compare::{compare_methods, Comparison, PairCell};
pub use metrics::{mmre, pred, pred_count, FoldResult};
pub use report::{reports_from_csv, reports_to_csv};
pub use wilcoxon::{midranks, wilcoxon_ranksum, PMethod, RankSumTest, EXACT_LIMIT};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("leave-one-out needs at least 3 projects, got {0}")]
    TooFewProjects(usize),
    #[error("project `{project_id}` has non-positive actual effort {actual}")]
    NonPositiveActual { project_id: String, actual: f64 },
    #[error("no folds to summarize")]
    NoFolds,
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("reports `{0}` and `{1}` cover different projects")]
    MismatchedFolds(String, String),
    #[error("malformed report CSV: {0}")]
    ReportFormat(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoocvParams {
    pub literal_eq2: bool,
    pub build: BuildParams,
    pub pred_level: f64,
}

impl Default for LoocvParams {
    fn default() -> Self {
        Self {
            literal_eq2: true,
            build: BuildParams::default(),
            pred_level: 0.25,
        }
    }
}

/// LOOCV results of one method. A method that cannot run on the dataset
/// (K larger than every training fold) has `not_applicable` set, no folds
/// and no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub n: usize,
    pub folds: Vec<FoldResult>,
    pub mmre: Option<f64>,
    /// Percentage in `[0, 100]`.
    pub pred: Option<f64>,
    pub pred_level: f64,
    /// Folds with MRE strictly below `pred_level`.
    pub lambda: usize,
    pub not_applicable: Option<String>,
}

impl EvaluationReport {
    pub fn from_folds(method: Method, folds: Vec<FoldResult>, pred_level: f64) -> Result<Self> {
        let mmre = metrics::mmre(&folds)?;
        let pred = metrics::pred(&folds, pred_level)?;
        Ok(Self {
            method,
            n: folds.len(),
            lambda: metrics::pred_count(&folds, pred_level),
            folds,
            mmre: Some(mmre),
            pred: Some(pred),
            pred_level,
            not_applicable: None,
        })
    }

    pub fn not_applicable(method: Method, pred_level: f64, reason: impl Into<String>) -> Self {
        Self {
            method,
            n: 0,
            folds: Vec::new(),
            mmre: None,
            pred: None,
            pred_level,
            lambda: 0,
            not_applicable: Some(reason.into()),
        }
    }

    pub fn is_applicable(&self) -> bool {
        self.not_applicable.is_none()
    }

    pub fn abs_residuals(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.abs_residual).collect()
    }

    /// `(project_id, k_used)` per fold.
    pub fn k_values(&self) -> Vec<(String, usize)> {
        self.folds
            .iter()
            .map(|f| (f.project_id.clone(), f.k_used))
            .collect()
    }
}

/// Held-out index and training indices of fold `fold` out of `n`.
pub fn leave_one_out_split(n: usize, fold: usize) -> (usize, Vec<usize>) {
    (fold, (0..n).filter(|&i| i != fold).collect())
}

/// Run one method under leave-one-out. Feature statistics (and for `bk`
/// the tree) are rebuilt from each training fold; fold `f` is seeded with
/// `derive_seed(master_seed, [f])`. Folds run in parallel and the result
/// does not depend on scheduling.
pub fn loocv(
    ps: &ProjectSet,
    method: Method,
    params: &LoocvParams,
    master_seed: u64,
) -> Result<EvaluationReport> {
    let n = ps.len();
    if n < 3 {
        return Err(EvalError::TooFewProjects(n));
    }
    if let Method::FixedK(k) = method {
        if k > n - 1 {
            return Ok(EvaluationReport::not_applicable(
                method,
                params.pred_level,
                format!("K = {k} exceeds the training fold size {}", n - 1),
            ));
        }
    }
    let folds = (0..n)
        .into_par_iter()
        .map(|f| run_fold(ps, method, params, f, derive_seed(master_seed, &[f as u64])))
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_folds(method, folds, params.pred_level)
}

fn run_fold(
    ps: &ProjectSet,
    method: Method,
    params: &LoocvParams,
    fold: usize,
    seed: u64,
) -> Result<FoldResult> {
    let (test, train_idx) = leave_one_out_split(ps.len(), fold);
    let train = ps.subset(&train_idx)?;
    let cfg = DistanceConfig::from_training(&train, params.literal_eq2)?;
    let query = &ps.records()[test];
    let actual = ps.effort(test);
    let (predicted, k) = match method {
        Method::Bk => {
            let tree =
                BkTree::build(&train, &cfg, params.build, seed).map_err(EstimateError::from)?;
            let est = estimator::estimate_bk(&tree, query)?;
            (est.predicted_effort, est.k_used)
        }
        Method::FixedK(k) => {
            let est = estimator::estimate_fixed_k(&train, &cfg, query, k)?;
            (est.predicted_effort, est.k_used)
        }
        Method::BestK => {
            let b = estimator::best_k_search(&train, &cfg, query, actual)?;
            (b.predicted_effort, b.k)
        }
    };
    FoldResult::new(query.id.clone(), actual, predicted, k)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::sync::Arc;

    use super::*;
    use crate::dataset::{
        FeatureKind, FeatureRole, FeatureSchema, FeatureValue, ProjectRecord, Schema,
    };

    fn set(points: &[(f64, f64)]) -> ProjectSet {
        let schema = Schema::new(vec![
            FeatureSchema::new("x", FeatureKind::Continuous, FeatureRole::Predictor),
            FeatureSchema::new("e", FeatureKind::Continuous, FeatureRole::Effort),
        ])
        .unwrap();
        let records = points
            .iter()
            .enumerate()
            .map(|(i, &(x, e))| ProjectRecord {
                id: format!("p{i}"),
                values: vec![FeatureValue::Num(x), FeatureValue::Num(e)],
                effort: Some(e),
            })
            .collect();
        ProjectSet::new(Arc::new(schema), records).unwrap()
    }

    #[test]
    fn duplicates_predict_perfectly() {
        let ps = set(&[(1.0, 5.0), (1.0, 5.0), (1.0, 5.0)]);
        let r = loocv(&ps, Method::FixedK(1), &LoocvParams::default(), 0).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.mmre, Some(0.0));
        assert_eq!(r.pred, Some(100.0));
        assert_eq!(r.lambda, 3);
    }

    #[test]
    fn k_beyond_training_fold_is_not_applicable() {
        let ps = set(&[(1.0, 5.0), (2.0, 6.0), (3.0, 7.0)]);
        let r = loocv(&ps, Method::FixedK(3), &LoocvParams::default(), 0).unwrap();
        assert!(!r.is_applicable());
        assert!(r.mmre.is_none());
        let r = loocv(&ps, Method::FixedK(2), &LoocvParams::default(), 0).unwrap();
        assert!(r.is_applicable());
    }

    #[test]
    fn too_small() {
        let ps = set(&[(1.0, 5.0), (2.0, 6.0)]);
        assert!(matches!(
            loocv(&ps, Method::Bk, &LoocvParams::default(), 0),
            Err(EvalError::TooFewProjects(2))
        ));
    }

    #[test]
    fn hand_traced_k2() {
        // x:      0   1   3   6   10
        // effort: 10  20  30  40  50
        // Fold neighbours (K=2) under |dx| with ties to the lower index:
        //   p0 -> p1(1), p2(3)  => 25
        //   p1 -> p0(1), p2(2)  => 20
        //   p2 -> p1(2), p0(3)  => 15   (p3 is also at 3; p0 has lower index)
        //   p3 -> p2(3), p4(4)  => 40
        //   p4 -> p3(4), p2(7)  => 35
        let ps = set(&[
            (0.0, 10.0),
            (1.0, 20.0),
            (3.0, 30.0),
            (6.0, 40.0),
            (10.0, 50.0),
        ]);
        let r = loocv(&ps, Method::FixedK(2), &LoocvParams::default(), 0).unwrap();
        let predicted: Vec<f64> = r.folds.iter().map(|f| f.predicted).collect();
        assert_eq!(predicted, vec![25.0, 20.0, 15.0, 40.0, 35.0]);
        let want = [15.0 / 10.0, 0.0, 15.0 / 30.0, 0.0, 15.0 / 50.0];
        for (f, w) in r.folds.iter().zip(want) {
            assert!((f.mre - w).abs() < 1e-15);
        }
    }

    #[test]
    fn folds_audit() {
        let n = 9;
        let mut tested = HashSet::new();
        for f in 0..n {
            let (test, train) = leave_one_out_split(n, f);
            assert!(!train.contains(&test));
            assert_eq!(train.len(), n - 1);
            assert!(tested.insert(test));
        }
        assert_eq!(tested.len(), n);
    }

    #[test]
    fn deterministic_per_seed() {
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| ((i * 37 % 17) as f64, 1.0 + i as f64))
            .collect();
        let ps = set(&pts);
        let a = loocv(&ps, Method::Bk, &LoocvParams::default(), 9).unwrap();
        let b = loocv(&ps, Method::Bk, &LoocvParams::default(), 9).unwrap();
        assert_eq!(a, b);
    }
}
