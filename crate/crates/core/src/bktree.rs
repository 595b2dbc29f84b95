//! Bisecting k-medoids tree.
//!
//! Starting from the whole training set, every cluster of the current level
//! is trial-split with 2-medoids. The split is kept when both children are
//! strictly more compact than the parent; otherwise the parent becomes a
//! leaf. Levels are expanded breadth-first until no cluster is split.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ProjectRecord, ProjectSet};
use crate::distance::{self, DistanceConfig, DistanceError};
use crate::kmedoids::{Cluster, DissimilarityMatrix, KMedoids, KMedoidsError};
use crate::seed::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error(transparent)]
    KMedoids(#[from] KMedoidsError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("dump line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = TreeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildParams {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            restarts: KMedoids::DEFAULT_RESTARTS,
            max_iterations: KMedoids::DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Compactness of the two clusters a trial bisection produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSplit {
    pub left: f64,
    pub right: f64,
}

impl TrialSplit {
    pub fn max(&self) -> f64 {
        self.left.max(self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Indices refer to the training set.
    pub cluster: Cluster,
    pub children: Option<[usize; 2]>,
    /// Set for every node of size >= 2: the accepted split for internal
    /// nodes, the rejected one for leaves.
    pub trial: Option<TrialSplit>,
}

impl BkNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Nodes are stored in breadth-first creation order; node 0 is the root.
#[derive(Debug, Clone)]
pub struct BkTree<'a> {
    nodes: Vec<BkNode>,
    leaves: Vec<usize>,
    train: &'a ProjectSet,
    cfg: &'a DistanceConfig,
    seed: u64,
}

impl<'a> BkTree<'a> {
    /// Build the tree over `train`. The bisection of the cluster at level
    /// `l`, position `p` within that level uses `derive_seed(seed, [l, p])`.
    pub fn build(
        train: &'a ProjectSet,
        cfg: &'a DistanceConfig,
        params: BuildParams,
        seed: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(TreeError::EmptyTraining);
        }
        let d = DissimilarityMatrix::from_projects(train, cfg)?;
        let nodes = bisect_all(&d, params, seed)?;
        let leaves = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect();
        Ok(Self {
            nodes,
            leaves,
            train,
            cfg,
            seed,
        })
    }

    pub fn root(&self) -> &BkNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[BkNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &BkNode {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BkNode> {
        self.leaves.iter().map(|&i| &self.nodes[i])
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn train(&self) -> &'a ProjectSet {
        self.train
    }

    pub fn config(&self) -> &'a DistanceConfig {
        self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Leaf whose medoid is closest to `query`; ties go to the leaf whose
    /// medoid has the lowest training index.
    pub fn find_leaf(&self, query: &ProjectRecord) -> Result<&BkNode> {
        let mut best: Option<(&BkNode, f64)> = None;
        for leaf in self.leaves() {
            let medoid = &self.train.records()[leaf.cluster.medoid];
            let dist = distance::distance(query, medoid, self.cfg)?;
            let better = match best {
                None => true,
                Some((b, bd)) => {
                    dist < bd || (dist == bd && leaf.cluster.medoid < b.cluster.medoid)
                }
            };
            if better {
                best = Some((leaf, dist));
            }
        }
        Ok(best.expect("a tree has at least one leaf").0)
    }

    /// One line per node:
    /// `depth\tnode_id\tparent_id\tmedoid_id\tcompactness\tmember_ids`.
    /// The root's parent is `-`; ids are training record ids.
    pub fn dump(&self) -> String {
        let records = self.train.records();
        let mut out = String::new();
        for n in &self.nodes {
            let parent = n.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            let members: Vec<&str> = n
                .cluster
                .members
                .iter()
                .map(|&i| records[i].id.as_str())
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                n.depth,
                n.id,
                parent,
                records[n.cluster.medoid].id,
                n.cluster.compactness,
                members.join(",")
            );
        }
        out
    }
}

pub fn build_tree<'a>(
    train: &'a ProjectSet,
    cfg: &'a DistanceConfig,
    params: BuildParams,
    seed: u64,
) -> Result<BkTree<'a>> {
    BkTree::build(train, cfg, params, seed)
}

pub fn dump_tree(tree: &BkTree<'_>) -> String {
    tree.dump()
}

/// Level-by-level bisection over all items of `d`.
pub fn bisect_all(d: &DissimilarityMatrix, params: BuildParams, seed: u64) -> Result<Vec<BkNode>> {
    let kmedoids = KMedoids {
        k: 2,
        restarts: params.restarts,
        max_iterations: params.max_iterations,
    };
    let mut nodes = vec![BkNode {
        id: 0,
        parent: None,
        depth: 0,
        cluster: Cluster::from_members(d, (0..d.len()).collect()),
        children: None,
        trial: None,
    }];
    let mut level = vec![0usize];
    let mut depth = 0usize;
    while !level.is_empty() {
        let mut next = Vec::new();
        for (pos, &id) in level.iter().enumerate() {
            if nodes[id].cluster.len() < 2 {
                continue;
            }
            let split_seed = derive_seed(seed, &[depth as u64, pos as u64]);
            let res = kmedoids.fit(d, &nodes[id].cluster.members, split_seed)?;
            let [left, right]: [Cluster; 2] = res
                .clusters
                .try_into()
                .expect("2-medoids yields two clusters");
            let trial = TrialSplit {
                left: left.compactness,
                right: right.compactness,
            };
            nodes[id].trial = Some(trial);
            if trial.max() < nodes[id].cluster.compactness {
                let base = nodes.len();
                for (offset, cluster) in [left, right].into_iter().enumerate() {
                    nodes.push(BkNode {
                        id: base + offset,
                        parent: Some(id),
                        depth: depth + 1,
                        cluster,
                        children: None,
                        trial: None,
                    });
                    next.push(base + offset);
                }
                nodes[id].children = Some([base, base + 1]);
            }
        }
        level = next;
        depth += 1;
    }
    Ok(nodes)
}

/// One parsed line of a tree dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpNode {
    pub depth: usize,
    pub node_id: usize,
    pub parent_id: Option<usize>,
    pub medoid_id: String,
    pub compactness: f64,
    pub members: Vec<String>,
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpNode>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| TreeError::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err("expected 6 tab-separated fields"));
        }
        let parent_id = match fields[2] {
            "-" => None,
            p => Some(p.parse().map_err(|_| err("bad parent id"))?),
        };
        out.push(DumpNode {
            depth: fields[0].parse().map_err(|_| err("bad depth"))?,
            node_id: fields[1].parse().map_err(|_| err("bad node id"))?,
            parent_id,
            medoid_id: fields[3].to_string(),
            compactness: fields[4].parse().map_err(|_| err("bad compactness"))?,
            members: fields[5]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        });
    }
    Ok(out)
}

/// Member-id sets of the leaves (nodes no other node names as parent).
pub fn dump_leaf_partition(nodes: &[DumpNode]) -> Vec<BTreeSet<String>> {
    let parents: HashMap<usize, ()> = nodes
        .iter()
        .filter_map(|n| n.parent_id.map(|p| (p, ())))
        .collect();
    nodes
        .iter()
        .filter(|n| !parents.contains_key(&n.node_id))
        .map(|n| n.members.iter().cloned().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dataset::{FeatureKind, FeatureRole, FeatureSchema, FeatureValue, Schema};

    pub(crate) fn one_d(values: &[f64]) -> ProjectSet {
        let schema = Schema::new(vec![
            FeatureSchema::new("x", FeatureKind::Continuous, FeatureRole::Predictor),
            FeatureSchema::new("e", FeatureKind::Continuous, FeatureRole::Effort),
        ])
        .unwrap();
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ProjectRecord {
                id: format!("p{i}"),
                values: vec![FeatureValue::Num(v), FeatureValue::Num(v + 1.0)],
                effort: Some(v + 1.0),
            })
            .collect();
        ProjectSet::new(Arc::new(schema), records).unwrap()
    }

    #[test]
    fn identical_projects_give_single_leaf() {
        let ps = one_d(&[5.0; 6]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 1).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.root().cluster.compactness, 0.0);
        assert_eq!(
            tree.root().trial,
            Some(TrialSplit {
                left: 0.0,
                right: 0.0
            })
        );
    }

    #[test]
    fn singleton_is_leaf() {
        let ps = one_d(&[3.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 1).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert!(tree.root().trial.is_none());
        assert!(tree.dump().starts_with("0\t0\t-\tp0\t0\tp0\n"));
    }

    #[test]
    fn pair_splits_when_distinct() {
        let ps = one_d(&[0.0, 1.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 1).unwrap();
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn distinct_triples_keep_splitting() {
        // Any three distinct points split into a singleton and a pair whose
        // compactness d^2/2 is below the parent's (d1^2 + d2^2)/3, and pairs
        // always split, so the blobs end as singleton leaves.
        let ps = one_d(&[0.0, 1.0, 2.0, 100.0, 101.0, 102.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 7).unwrap();
        let root = tree.root();
        let [a, b] = root.children.unwrap();
        assert_eq!(tree.node(a).cluster.members, vec![0, 1, 2]);
        assert_eq!(tree.node(b).cluster.members, vec![3, 4, 5]);
        assert_eq!(tree.leaf_count(), 6);
        assert!(tree.leaves().all(|l| l.cluster.len() == 1));
    }

    #[test]
    fn duplicate_blobs_two_leaves() {
        let ps = one_d(&[0.0, 0.0, 0.0, 100.0, 100.0, 100.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 7).unwrap();
        let leaves: Vec<Vec<usize>> = tree.leaves().map(|l| l.cluster.members.clone()).collect();
        assert_eq!(leaves, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn find_leaf_picks_nearest_medoid() {
        let ps = one_d(&[0.0, 0.0, 0.0, 100.0, 100.0, 100.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 7).unwrap();
        let leaf = tree.find_leaf(&ps.records()[4]).unwrap();
        assert_eq!(leaf.cluster.members, vec![3, 4, 5]);
        let leaf = tree.find_leaf(&ps.records()[0]).unwrap();
        assert_eq!(leaf.cluster.members, vec![0, 1, 2]);
        // equidistant query: both medoids at 50, lower medoid index wins
        let mid = ProjectRecord {
            id: "q".into(),
            values: vec![FeatureValue::Num(50.0), FeatureValue::Missing],
            effort: None,
        };
        assert_eq!(tree.find_leaf(&mid).unwrap().cluster.medoid, 0);
    }

    #[test]
    fn dump_round_trips_partition() {
        let ps = one_d(&[0.0, 1.0, 2.0, 100.0, 101.0, 102.0, 50.0]);
        let cfg = DistanceConfig::from_training(&ps, true).unwrap();
        let tree = build_tree(&ps, &cfg, BuildParams::default(), 7).unwrap();
        let parsed = parse_dump(&tree.dump()).unwrap();
        assert_eq!(parsed.len(), tree.nodes().len());
        let mut got = dump_leaf_partition(&parsed);
        let mut want: Vec<BTreeSet<String>> = tree
            .leaves()
            .map(|l| {
                l.cluster
                    .members
                    .iter()
                    .map(|&i| ps.records()[i].id.clone())
                    .collect()
            })
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        for (p, n) in parsed.iter().zip(tree.nodes()) {
            assert_eq!(p.compactness, n.cluster.compactness);
        }
    }

    #[test]
    fn parse_dump_rejects_garbage() {
        assert!(parse_dump("0\t0\t-\n").is_err());
        assert!(parse_dump("x\t0\t-\ta\t0\ta\n").is_err());
    }
}
