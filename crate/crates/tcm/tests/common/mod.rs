//! Shared test helpers: an independent evaluation of the minimization
//! objective (never routed through the QUBO expansion) and deterministic
//! random instance construction.

// each test binary uses a different subset of these helpers
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tcm::model::{CoverageMatrix, Feature, TestCase, TestSuite};

/// Direct objective: sum_i cost_i x_i + lambda * sum_j (1 - |selected in S_j|)^2,
/// skipping features no test covers. Independent oracle for the QUBO path.
pub fn direct_objective(matrix: &CoverageMatrix, lambda: f64, bits: &[bool]) -> f64 {
    let mut total = 0.0;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            total += matrix.costs[i];
        }
    }
    for j in 0..matrix.n_features() {
        let covering = matrix.covering_tests(j);
        if covering.is_empty() {
            continue;
        }
        let hit = covering.iter().filter(|&&i| bits[i]).count() as f64;
        total += lambda * (1.0 - hit) * (1.0 - hit);
    }
    total
}

/// Minimum of the direct objective over all 2^n assignments.
pub fn brute_force_minimum(matrix: &CoverageMatrix, lambda: f64) -> f64 {
    let n = matrix.n_tests();
    assert!(n <= 24);
    let mut best = f64::INFINITY;
    let mut bits = vec![false; n];
    for mask in 0u64..(1 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = mask >> i & 1 == 1;
        }
        best = best.min(direct_objective(matrix, lambda, &bits));
    }
    best
}

/// Random multi-label suite with every feature covered by at least one test
/// and every test covering at least one feature. Unit costs unless
/// `random_costs` is set.
pub fn random_suite(seed: u64, n: usize, m: usize, random_costs: bool) -> TestSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covers = vec![Vec::new(); n];
    for j in 0..m {
        // one guaranteed covering test plus random extras
        let anchor = rng.gen_range(0..n);
        covers[anchor].push(format!("f{j}"));
        for (i, c) in covers.iter_mut().enumerate() {
            if i != anchor && rng.gen_bool(0.25) {
                c.push(format!("f{j}"));
            }
        }
    }
    for c in covers.iter_mut() {
        if c.is_empty() {
            c.push(format!("f{}", rng.gen_range(0..m)));
        }
    }
    let tests = covers
        .into_iter()
        .enumerate()
        .map(|(i, covers)| TestCase {
            id: format!("t{i}"),
            name: None,
            cost: if random_costs {
                (rng.gen_range(1..=80) as f64) / 16.0
            } else {
                1.0
            },
            covers,
            body: None,
        })
        .collect();
    let features = (0..m).map(|j| Feature::new(format!("f{j}"))).collect();
    let suite = TestSuite::new(tests, features);
    suite.validate().expect("random suite is valid");
    suite
}

/// Random suite where every test covers exactly one feature and every
/// feature has at least one test.
pub fn random_single_label_suite(seed: u64, n: usize, m: usize, random_costs: bool) -> TestSuite {
    assert!(n >= m && m >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < m { i } else { rng.gen_range(0..m) })
        .collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let tests = labels
        .into_iter()
        .enumerate()
        .map(|(i, j)| TestCase {
            id: format!("t{i}"),
            name: None,
            cost: if random_costs {
                (rng.gen_range(1..=80) as f64) / 16.0
            } else {
                1.0
            },
            covers: vec![format!("f{j}")],
            body: None,
        })
        .collect();
    let features = (0..m).map(|j| Feature::new(format!("f{j}"))).collect();
    let suite = TestSuite::new(tests, features);
    suite.validate().expect("random suite is valid");
    suite
}
