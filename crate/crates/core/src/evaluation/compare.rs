use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::wilcoxon::{wilcoxon_ranksum, PMethod};
use super::{EvalError, EvaluationReport, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub statistic: f64,
    pub p_value: f64,
    pub method: PMethod,
    pub significant: bool,
}

/// Symmetric matrix of rank-sum tests on absolute residuals. Cells that
/// involve a not-applicable report are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub methods: Vec<String>,
    pub alpha: f64,
    pub cells: Vec<Vec<Option<PairCell>>>,
}

impl Comparison {
    pub fn cell(&self, row: usize, col: usize) -> Option<&PairCell> {
        self.cells[row][col].as_ref()
    }
}

pub fn compare_methods(reports: &[EvaluationReport], alpha: f64) -> Result<Comparison> {
    let applicable: Vec<&EvaluationReport> = reports.iter().filter(|r| r.is_applicable()).collect();
    if let Some((first, rest)) = applicable.split_first() {
        let ids = fold_ids(first);
        if let Some(other) = rest.iter().find(|r| fold_ids(r) != ids) {
            return Err(EvalError::MismatchedFolds(
                first.method.to_string(),
                other.method.to_string(),
            ));
        }
    }
    let residuals: Vec<Vec<f64>> = reports.iter().map(|r| r.abs_residuals()).collect();
    let n = reports.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            if !reports[i].is_applicable() || !reports[j].is_applicable() {
                continue;
            }
            let t = wilcoxon_ranksum(&residuals[i], &residuals[j])?;
            let cell = PairCell {
                statistic: t.statistic,
                p_value: t.p_value,
                method: t.method,
                significant: t.p_value < alpha,
            };
            cells[i][j] = Some(cell);
            if i != j {
                // statistic is oriented to the row method
                let mirrored = wilcoxon_ranksum(&residuals[j], &residuals[i])?;
                cells[j][i] = Some(PairCell {
                    statistic: mirrored.statistic,
                    ..cell
                });
            }
        }
    }
    Ok(Comparison {
        methods: reports.iter().map(|r| r.method.to_string()).collect(),
        alpha,
        cells,
    })
}

fn fold_ids(r: &EvaluationReport) -> BTreeSet<&str> {
    r.folds.iter().map(|f| f.project_id.as_str()).collect()
}
