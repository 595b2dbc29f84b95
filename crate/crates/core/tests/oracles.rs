//! Implementations checked against brute-force recomputation.

mod common;

use bkcbr::bktree::{BkTree, BuildParams};
use bkcbr::dataset::{FeatureKind, FeatureValue};
use bkcbr::distance::{distance, nearest_neighbors, DistanceConfig};
use bkcbr::estimator::{best_k_search, estimate_fixed_k};
use bkcbr::evaluation::{wilcoxon_ranksum, PMethod};
use bkcbr::kmedoids::KMedoids;
use rand::Rng;

use common::{random_matrix, random_set, rng};

/// The distance formula written out again from the raw values.
fn direct_distance(p: &[FeatureValue], q: &[FeatureValue], cfg: &DistanceConfig) -> f64 {
    let mut s = 0.0;
    for pred in cfg.predictors() {
        s += match (pred.kind, &p[pred.column], &q[pred.column]) {
            (FeatureKind::Categorical, a, b) => f64::from(u8::from(a != b)),
            (FeatureKind::Continuous, FeatureValue::Num(a), FeatureValue::Num(b)) => {
                let range = pred.stats.unwrap().range();
                if a == b {
                    0.0
                } else if cfg.literal_eq2 {
                    (a - b).powi(2) / range
                } else {
                    ((a - b) / range).powi(2)
                }
            }
            other => panic!("unexpected value pair {other:?}"),
        };
    }
    s.sqrt() / cfg.m() as f64
}

#[test]
fn distance_matches_direct_formula() {
    let mut r = rng(1);
    for trial in 0..50 {
        let ps = random_set(&mut r, 10, 1 + trial % 4, trial % 3, trial % 2 == 0);
        for literal in [true, false] {
            let cfg = DistanceConfig::from_training(&ps, literal).unwrap();
            for p in ps.records() {
                for q in ps.records() {
                    let got = distance(p, q, &cfg).unwrap();
                    let want = direct_distance(&p.values, &q.values, &cfg);
                    assert!(
                        (got - want).abs() <= 1e-12 * want.max(1.0),
                        "{got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn nearest_neighbors_match_full_sort() {
    let mut r = rng(2);
    for trial in 0..50 {
        let ps = random_set(&mut r, 20, 1 + trial % 3, trial % 2, trial % 3 == 0);
        let cfg = DistanceConfig::from_training(&ps, trial % 2 == 0).unwrap();
        let query = &ps.records()[r.gen_range(0..20)];
        let mut all: Vec<(f64, usize)> = ps
            .records()
            .iter()
            .enumerate()
            .map(|(i, p)| (distance(query, p, &cfg).unwrap(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = nearest_neighbors(query, &ps, &cfg, 5).unwrap();
        let got_d: Vec<f64> = got.iter().map(|n| n.distance).collect();
        let want_d: Vec<f64> = all[..5].iter().map(|x| x.0).collect();
        assert_eq!(got_d, want_d);
        // equal distances may only come in ascending index order
        for w in got.windows(2) {
            assert!(w[0].distance < w[1].distance || w[0].index < w[1].index);
        }
    }
}

#[test]
fn best_k_matches_exhaustive_search() {
    let mut r = rng(3);
    let mut checked = 0;
    let mut trial = 0;
    while checked < 50 {
        trial += 1;
        let n = r.gen_range(2..=12);
        let ps = random_set(&mut r, n, 1 + trial % 3, trial % 2, trial % 2 == 1);
        let held = r.gen_range(0..n);
        let train = ps.without(held).unwrap();
        let cfg = DistanceConfig::from_training(&train, true).unwrap();
        let query = &ps.records()[held];
        let actual = query.effort.unwrap();

        let got = best_k_search(&train, &cfg, query, actual);
        if estimate_fixed_k(&train, &cfg, query, 1).is_err() {
            // constant training column that the query differs on
            assert!(got.is_err());
            continue;
        }
        let mut want = (0, f64::INFINITY);
        for k in 1..=train.len() {
            let est = estimate_fixed_k(&train, &cfg, query, k).unwrap();
            let mre = (actual - est.predicted_effort).abs() / actual;
            if mre < want.1 {
                want = (k, mre);
            }
        }
        let got = got.unwrap();
        assert_eq!((got.k, got.mre), want, "trial {trial}");
        checked += 1;
    }
}

fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let rank = |v: f64| {
        let below = pooled.iter().filter(|&&u| u < v).count() as f64;
        let equal = pooled.iter().filter(|&&u| u == v).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = pooled.iter().map(|&v| rank(v)).collect();
    let centre = x.len() as f64 * (n as f64 + 1.0) / 2.0;
    let observed = (ranks[..x.len()].iter().sum::<f64>() - centre).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        total += 1;
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if (w - centre).abs() >= observed {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

#[test]
fn exact_rank_sum_matches_enumeration() {
    let mut r = rng(4);
    for _ in 0..50 {
        let nx = r.gen_range(1..=8);
        let ny = r.gen_range(1..=8);
        let coarse = r.gen_bool(0.5);
        let mut draw = |len| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    if coarse {
                        r.gen_range(0..5) as f64
                    } else {
                        r.gen_range(0.0..100.0)
                    }
                })
                .collect()
        };
        let (x, y) = (draw(nx), draw(ny));
        let t = wilcoxon_ranksum(&x, &y).unwrap();
        assert_eq!(t.method, PMethod::Exact);
        assert_eq!(t.p_value, enumerated_p(&x, &y), "x={x:?} y={y:?}");
        assert_eq!(t.p_value, wilcoxon_ranksum(&y, &x).unwrap().p_value);
    }
}

#[test]
fn find_leaf_matches_scan_of_leaf_medoids() {
    let mut r = rng(5);
    for trial in 0..50 {
        let ps = random_set(&mut r, 30, 2, trial % 2, trial % 3 == 0);
        let (train, queries) = (
            ps.subset(&(0..20).collect::<Vec<_>>()).unwrap(),
            &ps.records()[20..],
        );
        let cfg = DistanceConfig::from_training(&train, true).unwrap();
        let tree = BkTree::build(&train, &cfg, BuildParams::default(), trial as u64).unwrap();
        for q in queries {
            let want = tree
                .leaves()
                .map(|l| {
                    (
                        distance(q, &train.records()[l.cluster.medoid], &cfg).unwrap(),
                        l.cluster.medoid,
                    )
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(tree.find_leaf(q).unwrap().cluster.medoid, want);
        }
    }
}

#[test]
fn restarts_usually_reach_global_optimum() {
    let mut r = rng(6);
    let km = KMedoids::new(2).with_restarts(10);
    let mut hits = 0;
    for trial in 0..100 {
        let n = r.gen_range(2..=8);
        let d = random_matrix(&mut r, n);
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                let cost: f64 = (0..n).map(|i| d.get(i, a).min(d.get(i, b))).sum();
                best = best.min(cost);
            }
        }
        let got = km
            .fit(&d, &(0..n).collect::<Vec<_>>(), trial)
            .unwrap()
            .objective;
        assert!(got >= best - 1e-9);
        if got <= best + 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "global optimum reached in {hits} of 100 trials");
}
