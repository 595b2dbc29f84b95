//! Alternating (Voronoi iteration) k-medoids over a precomputed
//! dissimilarity matrix, and the per-cluster compactness measure.
//!
//! One restart:
//! 1. draw `k` distinct initial medoids uniformly from the items;
//! 2. assign every item to its nearest medoid (ties go to the medoid with
//!    the lower item index; a medoid always keeps itself);
//! 3. replace each cluster's medoid by the member with the smallest
//!    distance sum to the other members (ties go to the lower index);
//! 4. stop when the medoid set no longer changes, else repeat from 2.
//!
//! The objective (sum of member-to-medoid distances) is recorded after
//! every assignment and never increases.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ProjectSet;
use crate::distance::{self, DistanceConfig, DistanceError};
use crate::seed::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum KMedoidsError {
    #[error("k = {k} must be between 1 and the number of items ({items})")]
    InvalidK { k: usize, items: usize },
    #[error("item {0} is outside the dissimilarity matrix")]
    ItemOutOfRange(usize),
    #[error("medoid {0} is not a member of the cluster")]
    MedoidNotMember(usize),
    #[error("dissimilarity matrix is not square")]
    NotSquare,
    #[error("dissimilarity entry ({0}, {1}) is negative, non-finite or asymmetric")]
    InvalidEntry(usize, usize),
    #[error("restarts must be at least 1")]
    NoRestarts,
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

pub type Result<T, E = KMedoidsError> = std::result::Result<T, E>;

/// Symmetric, zero-diagonal, nonnegative `n x n` matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Fill the upper triangle with `f(i, j)` for `i < j` and mirror it.
    pub fn from_fn<E>(
        n: usize,
        mut f: impl FnMut(usize, usize) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j)?;
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(KMedoidsError::NotSquare);
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                let bad = !d.is_finite() || d < 0.0 || d != rows[j][i] || (i == j && d != 0.0);
                if bad {
                    return Err(KMedoidsError::InvalidEntry(i, j));
                }
            }
        }
        Ok(Self {
            n,
            entries: rows.concat(),
        })
    }

    /// Pairwise project distances over a training set.
    pub fn from_projects(ps: &ProjectSet, cfg: &DistanceConfig) -> Result<Self> {
        let r = ps.records();
        Ok(Self::from_fn(r.len(), |i, j| {
            distance::distance(&r[i], &r[j], cfg)
        })?)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Ascending item indices.
    pub members: Vec<usize>,
    pub medoid: usize,
    pub compactness: f64,
}

impl Cluster {
    /// Cluster over `members` with its distance-sum minimizing medoid.
    pub fn from_members(d: &DissimilarityMatrix, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        let medoid = medoid_of(d, &members);
        let compactness = compactness_unchecked(&members, medoid, d);
        Self {
            members,
            medoid,
            compactness,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sum of distances from `candidate` to every member.
pub fn distance_sum(d: &DissimilarityMatrix, candidate: usize, members: &[usize]) -> f64 {
    let row = d.row(candidate);
    members.iter().map(|&j| row[j]).sum()
}

/// Member minimizing the distance sum to all members; ties go to the
/// earliest member in `members` order (lowest index when sorted).
pub fn medoid_of(d: &DissimilarityMatrix, members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_sum = f64::INFINITY;
    for &c in members {
        let s = distance_sum(d, c, members);
        if s < best_sum {
            best = c;
            best_sum = s;
        }
    }
    best
}

/// Mean squared member-to-medoid distance.
pub fn compactness(members: &[usize], medoid: usize, d: &DissimilarityMatrix) -> Result<f64> {
    if !members.contains(&medoid) {
        return Err(KMedoidsError::MedoidNotMember(medoid));
    }
    Ok(compactness_unchecked(members, medoid, d))
}

fn compactness_unchecked(members: &[usize], medoid: usize, d: &DissimilarityMatrix) -> f64 {
    let row = d.row(medoid);
    let sq: f64 = members.iter().map(|&j| row[j] * row[j]).sum();
    sq / members.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMedoidsResult {
    /// Ordered by ascending medoid index.
    pub clusters: Vec<Cluster>,
    /// Sum of member-to-medoid distances of the kept restart.
    pub objective: f64,
    /// Objective after each assignment step of the kept restart.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Every pair of items is at distance zero, so every partition is optimal.
    pub degenerate: bool,
    /// Which restart produced the result.
    pub restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMedoids {
    pub k: usize,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl KMedoids {
    pub const DEFAULT_RESTARTS: usize = 5;
    pub const DEFAULT_MAX_ITERATIONS: usize = 100;

    pub fn new(k: usize) -> Self {
        Self {
            k,
            restarts: Self::DEFAULT_RESTARTS,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Cluster `items` (indices into `d`). Restart `r` is seeded with
    /// `derive_seed(seed, [r])`; the lowest objective wins, ties keep the
    /// earlier restart.
    pub fn fit(
        &self,
        d: &DissimilarityMatrix,
        items: &[usize],
        seed: u64,
    ) -> Result<KMedoidsResult> {
        if self.k == 0 || self.k > items.len() {
            return Err(KMedoidsError::InvalidK {
                k: self.k,
                items: items.len(),
            });
        }
        if self.restarts == 0 {
            return Err(KMedoidsError::NoRestarts);
        }
        if let Some(&bad) = items.iter().find(|&&i| i >= d.len()) {
            return Err(KMedoidsError::ItemOutOfRange(bad));
        }
        let mut items = items.to_vec();
        items.sort_unstable();
        items.dedup();

        let mut best: Option<KMedoidsResult> = None;
        for r in 0..self.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
            let init: Vec<usize> = sample(&mut rng, items.len(), self.k)
                .into_iter()
                .map(|p| items[p])
                .collect();
            let run = self.run_from(d, &items, init, r);
            if best.as_ref().is_none_or(|b| run.objective < b.objective) {
                best = Some(run);
            }
        }
        let mut out = best.expect("at least one restart");
        out.degenerate = items
            .iter()
            .all(|&i| items.iter().all(|&j| d.get(i, j) == 0.0));
        Ok(out)
    }

    /// One alternating run from the given initial medoids.
    pub fn run_from(
        &self,
        d: &DissimilarityMatrix,
        items: &[usize],
        mut medoids: Vec<usize>,
        restart: usize,
    ) -> KMedoidsResult {
        medoids.sort_unstable();
        let mut trace = Vec::new();
        let mut converged = false;
        let mut groups = assign(d, items, &medoids);
        trace.push(objective(d, &groups, &medoids));
        for _ in 0..self.max_iterations {
            let mut next: Vec<usize> = groups.iter().map(|g| medoid_of(d, g)).collect();
            next.sort_unstable();
            if next == medoids {
                converged = true;
                break;
            }
            medoids = next;
            groups = assign(d, items, &medoids);
            trace.push(objective(d, &groups, &medoids));
        }
        let objective = *trace.last().expect("trace is nonempty");
        let clusters = groups
            .into_iter()
            .zip(&medoids)
            .map(|(members, &medoid)| {
                let compactness = compactness_unchecked(&members, medoid, d);
                Cluster {
                    members,
                    medoid,
                    compactness,
                }
            })
            .collect();
        KMedoidsResult {
            clusters,
            objective,
            objective_trace: trace,
            converged,
            degenerate: false,
            restart,
        }
    }
}

/// Member lists per medoid (medoids sorted ascending, members ascending).
fn assign(d: &DissimilarityMatrix, items: &[usize], medoids: &[usize]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); medoids.len()];
    for &i in items {
        let slot = match medoids.binary_search(&i) {
            Ok(own) => own,
            Err(_) => {
                let row = d.row(i);
                let mut best = 0;
                for (c, &m) in medoids.iter().enumerate().skip(1) {
                    if row[m] < row[medoids[best]] {
                        best = c;
                    }
                }
                best
            }
        };
        groups[slot].push(i);
    }
    groups
}

fn objective(d: &DissimilarityMatrix, groups: &[Vec<usize>], medoids: &[usize]) -> f64 {
    groups
        .iter()
        .zip(medoids)
        .map(|(g, &m)| distance_sum(d, m, g))
        .sum()
}

/// Convenience wrapper: `KMedoids::new(k).with_restarts(restarts).fit(..)`.
pub fn k_medoids(
    d: &DissimilarityMatrix,
    items: &[usize],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<Cluster>> {
    Ok(KMedoids::new(k)
        .with_restarts(restarts)
        .fit(d, items, seed)?
        .clusters)
}
