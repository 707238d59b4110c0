//! Property tests for the spec-level invariants: builder equivalence,
//! penalty soundness, flip-delta consistency, round trips, determinism,
//! and greedy soundness.

mod common;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use common::{direct_objective, random_suite};
use proptest::prelude::*;

use tcm::ingest::{emit_suite, parse_model_output, parse_suite};
use tcm::model::{build_coverage_matrix, Feature, TestCase, TestSuite};
use tcm::qubo::{
    auto_lambda, build_qubo, energy, export_qubo, flip_delta, import_qubo, Assignment, LambdaMode,
    QuboConfig, QuboModel,
};
use tcm::solvers::{exact_solve, greedy_cover, simulated_annealing, AnnealParams};
use tcm::verify::check_coverage;

fn suite_strategy() -> impl Strategy<Value = TestSuite> {
    (1usize..=6, 1usize..=10).prop_flat_map(|(m, n)| {
        let covers = prop::collection::vec(prop::collection::btree_set(0..m, 1..=m), n);
        let costs = prop::collection::vec(0u32..80, n);
        (Just(m), covers, costs).prop_map(|(m, covers, costs)| {
            let tests = covers
                .into_iter()
                .zip(costs)
                .enumerate()
                .map(|(i, (cover, cost))| TestCase {
                    id: format!("t{i}"),
                    name: if i % 3 == 0 {
                        Some(format!("test case {i}"))
                    } else {
                        None
                    },
                    cost: f64::from(cost) / 16.0,
                    covers: cover.into_iter().map(|j| format!("f{j}")).collect(),
                    body: if i % 4 == 0 {
                        Some(format!("assert({i});"))
                    } else {
                        None
                    },
                })
                .collect();
            let features = (0..m).map(|j| Feature::new(format!("f{j}"))).collect();
            TestSuite::new(tests, features)
        })
    })
}

fn model_strategy() -> impl Strategy<Value = QuboModel> {
    (2usize..=10).prop_flat_map(|n| {
        let linear = prop::collection::vec(-1e6f64..1e6, n);
        let pairs = prop::collection::btree_map(
            (0..n, 0..n).prop_filter_map("i < j", |(a, b)| {
                (a != b).then(|| (a.min(b), a.max(b)))
            }),
            -1e6f64..1e6,
            0..=n * 2,
        );
        let offset = -1e6f64..1e6;
        (Just(n), linear, pairs, offset).prop_map(|(n, linear, pairs, offset)| {
            let quadratic: BTreeMap<(usize, usize), f64> =
                pairs.into_iter().filter(|&(_, v)| v != 0.0).collect();
            let names = (0..n).map(|i| format!("x{i}")).collect();
            QuboModel::new(n, linear, quadratic, offset, names)
        })
    })
}

proptest! {
    #[test]
    fn builder_matches_direct_objective(suite in suite_strategy(), lambda in 0.1f64..20.0) {
        let matrix = build_coverage_matrix(&suite).unwrap();
        let model = build_qubo(
            &matrix,
            &QuboConfig { lambda_mode: LambdaMode::Explicit(lambda), exclude_uncoverable: true },
        )
        .unwrap();
        let n = matrix.n_tests();
        for mask in 0u64..(1 << n) {
            let x = Assignment::from_mask(mask, n);
            let direct = direct_objective(&matrix, lambda, &x.bits);
            let e = energy(&model, &x).unwrap();
            prop_assert!((e - direct).abs() <= 1e-9, "mask {mask}: {e} vs {direct}");
        }
    }

    #[test]
    fn flip_delta_matches_energy_difference(
        model in model_strategy(),
        mask in any::<u64>(),
        i_raw in any::<usize>(),
    ) {
        let x = Assignment::from_mask(mask, model.n);
        let i = i_raw % model.n;
        let mut flipped = x.clone();
        flipped.bits[i] = !flipped.bits[i];
        let delta = flip_delta(&model, &x, i).unwrap();
        let expected = energy(&model, &flipped).unwrap() - energy(&model, &x).unwrap();
        prop_assert!((delta - expected).abs() <= 1e-6 * expected.abs().max(1.0));
    }

    #[test]
    fn qubo_export_import_identity(model in model_strategy()) {
        let text = export_qubo(&model);
        prop_assert_eq!(export_qubo(&model), text.clone(), "export must be deterministic");
        let back = import_qubo(&text).unwrap();
        prop_assert_eq!(back.n, model.n);
        prop_assert_eq!(back.linear, model.linear);
        prop_assert_eq!(back.quadratic, model.quadratic);
        prop_assert_eq!(back.offset, model.offset);
    }

    #[test]
    fn suite_parse_emit_identity(suite in suite_strategy()) {
        let text = emit_suite(&suite);
        prop_assert_eq!(parse_suite(&text).unwrap(), suite.clone());
        prop_assert_eq!(parse_model_output(&text).unwrap(), suite.clone());
        let fenced = format!("prose before\n```json\n{text}```\nprose after");
        prop_assert_eq!(parse_model_output(&fenced).unwrap(), suite);
    }

    #[test]
    fn matrix_columns_round_trip(suite in suite_strategy()) {
        let matrix = build_coverage_matrix(&suite).unwrap();
        prop_assert_eq!(matrix.n_features(), suite.features.len());
        prop_assert_eq!(matrix.n_tests(), suite.tests.len());
        for (i, t) in suite.tests.iter().enumerate() {
            let from_cols: BTreeSet<String> = matrix
                .feature_order
                .iter()
                .enumerate()
                .filter_map(|(j, f)| matrix.incidence[j][i].then(|| f.clone()))
                .collect();
            let declared: BTreeSet<String> = t.covers.iter().cloned().collect();
            prop_assert_eq!(from_cols, declared);
        }
    }

    #[test]
    fn sa_is_deterministic_for_fixed_inputs(suite in suite_strategy(), seed in any::<u64>()) {
        let matrix = build_coverage_matrix(&suite).unwrap();
        let model = build_qubo(&matrix, &QuboConfig::default()).unwrap();
        let params = AnnealParams { sweeps: 50, restarts: 2, seed, ..Default::default() };
        let a = simulated_annealing(&model, &params).unwrap();
        let b = simulated_annealing(&model, &params).unwrap();
        prop_assert_eq!(a.assignment, b.assignment);
        prop_assert_eq!(a.energy, b.energy);
    }
}

/// With auto lambda every exact ground state covers all coverable features.
/// Holds for single-label suites; overlapping covering sets void the
/// guarantee (see `overlap_can_sacrifice_coverage` in the solver tests).
#[test]
fn auto_lambda_ground_states_cover_everything() {
    for seed in 0..60u64 {
        let m = 1 + (seed as usize % 6);
        let suite = common::random_single_label_suite(seed, m + (seed as usize % 8), m, true);
        let matrix = build_coverage_matrix(&suite).unwrap();
        let model = build_qubo(&matrix, &QuboConfig::default()).unwrap();
        let result = exact_solve(&model).unwrap();
        let selected: BTreeSet<String> = result.selected_ids(&model).into_iter().collect();
        let report = check_coverage(&matrix, &selected).unwrap();
        assert!(
            report.uncovered.is_empty(),
            "seed {seed}: ground state left {:?} uncovered",
            report.uncovered
        );
    }
}

/// Greedy always covers everything, never beats the optimum, and stays
/// within the (1 + ln m) approximation bound.
#[test]
fn greedy_soundness() {
    for seed in 0..40u64 {
        let n = 4 + (seed as usize % 12);
        let m = 1 + (seed as usize % 6);
        let suite = random_suite(seed, n, m, true);
        let matrix = build_coverage_matrix(&suite).unwrap();
        let greedy = greedy_cover(&matrix).unwrap();
        let selected: BTreeSet<String> = matrix
            .test_order
            .iter()
            .zip(&greedy.assignment.bits)
            .filter_map(|(id, &b)| b.then(|| id.clone()))
            .collect();
        let report = check_coverage(&matrix, &selected).unwrap();
        assert!(report.uncovered.is_empty(), "seed {seed}");

        // optimum set-cover cost from exhaustive search over covering subsets
        let mut best_cost = f64::INFINITY;
        for mask in 0u64..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let covers_all = (0..m).all(|j| {
                matrix.covering_tests(j).iter().any(|&i| bits[i])
            });
            if covers_all {
                let cost: f64 = bits
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &b)| b.then(|| matrix.costs[i]))
                    .sum();
                best_cost = best_cost.min(cost);
            }
        }
        let bound = (1.0 + (m as f64).ln()) * best_cost;
        assert!(
            report.total_cost >= best_cost - 1e-9 && report.total_cost <= bound + 1e-9,
            "seed {seed}: greedy {} optimum {best_cost} bound {bound}",
            report.total_cost
        );
    }
}

/// auto_lambda must strictly exceed the saving from dropping any test.
#[test]
fn auto_lambda_dominates_costs() {
    let lambda = auto_lambda(&[0.5, 2.5, 1.0], 2.0).unwrap();
    assert!(lambda > 2.5);
    assert_eq!(lambda, 5.0);
}
