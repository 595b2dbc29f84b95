use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Outcome for one held-out project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub project_id: String,
    pub actual: f64,
    pub predicted: f64,
    pub mre: f64,
    pub abs_residual: f64,
    pub k_used: usize,
}

impl FoldResult {
    pub fn new(
        project_id: impl Into<String>,
        actual: f64,
        predicted: f64,
        k_used: usize,
    ) -> Result<Self> {
        let project_id = project_id.into();
        if !(actual > 0.0) {
            return Err(EvalError::NonPositiveActual { project_id, actual });
        }
        let abs_residual = (actual - predicted).abs();
        Ok(Self {
            project_id,
            actual,
            predicted,
            mre: abs_residual / actual,
            abs_residual,
            k_used,
        })
    }
}

/// Mean magnitude of relative error (a fraction, not a percentage).
pub fn mmre(folds: &[FoldResult]) -> Result<f64> {
    check(folds)?;
    Ok(folds.iter().map(|f| f.mre).sum::<f64>() / folds.len() as f64)
}

/// Number of folds with MRE strictly below `level`.
pub fn pred_count(folds: &[FoldResult], level: f64) -> usize {
    folds.iter().filter(|f| f.mre < level).count()
}

/// Percentage of folds with MRE strictly below `level`.
pub fn pred(folds: &[FoldResult], level: f64) -> Result<f64> {
    check(folds)?;
    Ok(100.0 * pred_count(folds, level) as f64 / folds.len() as f64)
}

fn check(folds: &[FoldResult]) -> Result<()> {
    if folds.is_empty() {
        return Err(EvalError::NoFolds);
    }
    if let Some(f) = folds.iter().find(|f| !(f.actual > 0.0)) {
        return Err(EvalError::NonPositiveActual {
            project_id: f.project_id.clone(),
            actual: f.actual,
        });
    }
    Ok(())
}
