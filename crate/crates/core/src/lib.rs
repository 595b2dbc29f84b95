//! Case-based software effort estimation.
//!
//! For each project to estimate, the analogy set is the leaf of a bisecting
//! k-medoids tree whose medoid is closest to the project; the estimate is
//! the mean effort of that leaf. The crate also provides the fixed-K
//! nearest-neighbour baselines, an exhaustive best-K search, and a
//! leave-one-out harness with MMRE, PRED and Wilcoxon rank-sum comparisons.
//!
//! ```
//! use bkcbr::dataset::{parse_dataset, Schema};
//! use bkcbr::estimator::Method;
//! use bkcbr::evaluation::{loocv, LoocvParams};
//!
//! let schema = Schema::parse("size,continuous,predictor\neffort,continuous,effort\n").unwrap();
//! let ps = parse_dataset("size,effort\n1,10\n2,12\n9,40\n10,44\n", schema).unwrap();
//! let report = loocv(&ps, Method::FixedK(1), &LoocvParams::default(), 42).unwrap();
//! assert_eq!(report.n, 4);
//! ```

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bktree;
pub mod dataset;
pub mod distance;
pub mod estimator;
pub mod evaluation;
pub mod kmedoids;
pub mod seed;

pub use bktree::{build_tree, BkNode, BkTree, BuildParams};
pub use dataset::{describe, load_dataset, ProjectRecord, ProjectSet, Schema};
pub use distance::{distance, DistanceConfig};
pub use estimator::{Estimate, Method};
pub use evaluation::{loocv, EvaluationReport, LoocvParams};
