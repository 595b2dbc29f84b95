#![allow(dead_code)]

use std::fmt::Write as _;

use bkcbr::dataset::{parse_dataset, ProjectSet, Schema};
use bkcbr::kmedoids::DissimilarityMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn schema(cont: usize, cat: usize) -> Schema {
    let mut s = String::new();
    for c in 0..cont {
        writeln!(s, "x{c},continuous,predictor").unwrap();
    }
    for c in 0..cat {
        writeln!(s, "c{c},categorical,predictor").unwrap();
    }
    s.push_str("effort,continuous,effort\n");
    Schema::parse(&s).unwrap()
}

/// `n` random projects. Continuous values come from a coarse grid when
/// `coarse` is set, so exact ties and duplicate rows are common.
pub fn random_set(r: &mut impl Rng, n: usize, cont: usize, cat: usize, coarse: bool) -> ProjectSet {
    let mut csv = String::new();
    let header: Vec<String> = (0..cont)
        .map(|c| format!("x{c}"))
        .chain((0..cat).map(|c| format!("c{c}")))
        .chain(["effort".to_string()])
        .collect();
    writeln!(csv, "{}", header.join(",")).unwrap();
    for _ in 0..n {
        let mut row: Vec<String> = Vec::new();
        for _ in 0..cont {
            let v: f64 = if coarse {
                r.gen_range(0..4) as f64
            } else {
                r.gen_range(-50.0..50.0)
            };
            row.push(v.to_string());
        }
        for _ in 0..cat {
            row.push(["a", "b", "c"][r.gen_range(0..3)].to_string());
        }
        row.push(r.gen_range(1.0..500.0f64).to_string());
        writeln!(csv, "{}", row.join(",")).unwrap();
    }
    parse_dataset(&csv, schema(cont, cat)).unwrap()
}

/// One continuous predictor `x` with the given efforts.
pub fn one_d(xs: &[f64], efforts: &[f64]) -> ProjectSet {
    let mut csv = String::from("x,effort\n");
    for (x, e) in xs.iter().zip(efforts) {
        writeln!(csv, "{x},{e}").unwrap();
    }
    parse_dataset(
        &csv,
        Schema::parse("x,continuous,predictor\neffort,continuous,effort\n").unwrap(),
    )
    .unwrap()
}

/// Euclidean distances between random points in the plane.
pub fn random_matrix(r: &mut impl Rng, n: usize) -> DissimilarityMatrix {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (r.gen_range(0.0..10.0), r.gen_range(0.0..10.0)))
        .collect();
    DissimilarityMatrix::from_fn(n, |i, j| {
        Ok::<_, ()>(((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt())
    })
    .unwrap()
}
