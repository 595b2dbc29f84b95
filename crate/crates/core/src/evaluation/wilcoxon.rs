//! Two-sided Wilcoxon rank-sum test.
//!
//! The statistic is the sum of the pooled midranks of the first sample.
//! With at most [`EXACT_LIMIT`] observations in total the p-value is exact:
//! the null distribution of the rank sum (ties included) is counted over all
//! `C(n, n_x)` ways of drawing the first sample. Larger samples use the
//! normal approximation with tie-corrected variance and a 0.5 continuity
//! correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{EvalError, Result};

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Pooled midranks (1-based) of `x` followed by `y`.
pub fn midranks(x: &[f64], y: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon_ranksum(x: &[f64], y: &[f64]) -> Result<RankSumTest> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteSample);
    }
    let ranks = midranks(x, y);
    let statistic: f64 = ranks[..x.len()].iter().sum();
    let n = ranks.len();
    let (p_value, method) = if n <= EXACT_LIMIT {
        (exact_p(&ranks, x.len()), PMethod::Exact)
    } else {
        (normal_p(&ranks, x.len(), statistic), PMethod::Normal)
    };
    Ok(RankSumTest {
        statistic,
        p_value: p_value.clamp(f64::MIN_POSITIVE, 1.0),
        method,
    })
}

/// Count-based two-sided p: `P(|W - E[W]| >= |w - E[W]|)` under the
/// permutation null. Doubled ranks keep every sum an integer.
fn exact_p(ranks: &[f64], nx: usize) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; nx + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=nx).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let observed: usize = doubled[..nx].iter().sum();
    // E[W] = nx (n + 1) / 2, so the doubled mean is nx (n + 1)
    let centre2 = nx * (n + 1);
    let dev = |s: usize| s.abs_diff(centre2);
    let obs_dev = dev(observed);
    let dist = &ways[nx];
    let total: f64 = dist.iter().sum();
    let extreme: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s) >= obs_dev)
        .map(|(_, c)| c)
        .sum();
    extreme / total
}

fn normal_p(ranks: &[f64], nx: usize, statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let nx_f = nx as f64;
    let ny_f = n - nx_f;
    let mean = nx_f * (n + 1.0) / 2.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nx_f * ny_f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let dev = ((statistic - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    // two-sided: 2 * (1 - Phi(z)) = erfc(z / sqrt 2)
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let t = wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.statistic, 6.0);
        assert_eq!(t.p_value, 0.1);
        assert_eq!(t.method, PMethod::Exact);
    }

    #[test]
    fn identical_samples_not_significant() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert!(wilcoxon_ranksum(&x, &x).unwrap().p_value >= 0.99);
        let big: Vec<f64> = (0..30).map(|i| (i * 7 % 11) as f64).collect();
        let t = wilcoxon_ranksum(&big, &big).unwrap();
        assert_eq!(t.method, PMethod::Normal);
        assert!(t.p_value >= 0.99);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(
            midranks(&[1.0, 2.0, 2.0], &[4.0, 2.0]),
            vec![1.0, 3.0, 3.0, 5.0, 3.0]
        );
    }

    #[test]
    fn all_tied_is_one() {
        let t = wilcoxon_ranksum(&[2.0; 12], &[2.0; 12]).unwrap();
        assert_eq!(t.p_value, 1.0);
        let t = wilcoxon_ranksum(&[2.0; 3], &[2.0; 3]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn normal_path_detects_shift() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let t = wilcoxon_ranksum(&x, &y).unwrap();
        assert_eq!(t.method, PMethod::Normal);
        assert!(t.p_value < 0.05);
        assert!(t.p_value > 0.0);
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            wilcoxon_ranksum(&[], &[1.0]),
            Err(EvalError::EmptySample)
        ));
        assert!(matches!(
            wilcoxon_ranksum(&[1.0], &[]),
            Err(EvalError::EmptySample)
        ));
    }

    #[test]
    fn normal_matches_known_value() {
        // x = 1..=15, y = 16..=30: W = 120, E = 232.5, var = 15*15*31/12 = 581.25.
        // scipy.stats.mannwhitneyu(x, y, method="asymptotic") gives 3.3918213908250945e-06.
        let x: Vec<f64> = (1..=15).map(f64::from).collect();
        let y: Vec<f64> = (16..=30).map(f64::from).collect();
        let t = wilcoxon_ranksum(&x, &y).unwrap();
        assert_eq!(t.statistic, 120.0);
        assert!((t.p_value - 3.3918213908250945e-06).abs() < 1e-12);
    }
}
