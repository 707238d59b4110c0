//! Solvers for the QUBO minimization: exhaustive enumeration (ground-truth
//! oracle for small n), simulated annealing, and a greedy weighted set-cover
//! baseline scored against the same model for comparability.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{uncoverable_features, CoverageMatrix};
use crate::qubo::{build_qubo, energy, flip_delta, Assignment, QuboConfig, QuboError, QuboModel};

/// Default cap on exhaustive enumeration.
pub const EXACT_CAP: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("model has {n} variables, over the exact-solve cap of {cap}; use simulated annealing")]
    TooLarge { n: usize, cap: usize },
    #[error("model has no variables")]
    EmptyModel,
    #[error("invalid annealing parameters: {0}")]
    InvalidParams(String),
    #[error("uncoverable features present: {}", .0.join(", "))]
    Uncoverable(Vec<String>),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub wall_time: f64,
    pub sweeps_or_steps: u64,
    pub restarts: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub assignment: Assignment,
    pub energy: f64,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn selected_ids(&self, model: &QuboModel) -> Vec<String> {
        self.assignment
            .selected_indices()
            .into_iter()
            .map(|i| model.var_names[i].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealParams {
    pub sweeps: usize,
    pub t_init: f64,
    pub t_final: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            t_init: 10.0,
            t_final: 0.01,
            restarts: 8,
            seed: 0,
        }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.sweeps < 1 {
            return Err(SolveError::InvalidParams("sweeps must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(SolveError::InvalidParams("restarts must be >= 1".into()));
        }
        if !(self.t_init > self.t_final && self.t_final > 0.0) {
            return Err(SolveError::InvalidParams(
                "temperatures must satisfy t_init > t_final > 0".into(),
            ));
        }
        Ok(())
    }
}

fn mask_energy(model: &QuboModel, mask: u64) -> f64 {
    let mut e = model.offset;
    for (i, &l) in model.linear.iter().enumerate() {
        if mask >> i & 1 == 1 {
            e += l;
        }
    }
    for (&(i, j), &q) in &model.quadratic {
        if mask >> i & 1 == 1 && mask >> j & 1 == 1 {
            e += q;
        }
    }
    e
}

/// Lexicographic order on the bit vector (x0 first, 0 before 1).
fn lex_less(a: u64, b: u64, n: usize) -> bool {
    for i in 0..n {
        let (ba, bb) = (a >> i & 1, b >> i & 1);
        if ba != bb {
            return ba < bb;
        }
    }
    false
}

pub fn exact_solve(model: &QuboModel) -> Result<SolveResult, SolveError> {
    exact_solve_capped(model, EXACT_CAP)
}

/// Global minimum by enumerating all 2^n assignments. Ties break to the
/// lexicographically smallest bit vector.
pub fn exact_solve_capped(model: &QuboModel, cap: usize) -> Result<SolveResult, SolveError> {
    if model.n > cap {
        return Err(SolveError::TooLarge { n: model.n, cap });
    }
    let start = Instant::now();
    let mut best_mask = 0u64;
    let mut best_e = mask_energy(model, 0);
    for mask in 1..(1u64 << model.n) {
        let e = mask_energy(model, mask);
        if e < best_e || (e == best_e && lex_less(mask, best_mask, model.n)) {
            best_e = e;
            best_mask = mask;
        }
    }
    Ok(SolveResult {
        assignment: Assignment::from_mask(best_mask, model.n),
        energy: best_e,
        stats: SolveStats {
            wall_time: start.elapsed().as_secs_f64(),
            sweeps_or_steps: 1u64 << model.n,
            restarts: 1,
            seed: 0,
        },
    })
}

/// SplitMix64 finalizer; derives per-restart seeds so the restart schedule
/// never changes results.
fn mix_seed(seed: u64, restart: u64) -> u64 {
    let mut z = seed ^ restart.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Geometric schedule T_k = t_init * (t_final/t_init)^(k/(sweeps-1)).
fn temperature(params: &AnnealParams, sweep: usize) -> f64 {
    if params.sweeps == 1 {
        return params.t_init;
    }
    let frac = sweep as f64 / (params.sweeps - 1) as f64;
    params.t_init * (params.t_final / params.t_init).powf(frac)
}

/// Metropolis simulated annealing. Each sweep proposes a flip of every
/// variable in index order; downhill moves always accept, uphill moves
/// accept with probability exp(-delta/T). Returns the best assignment seen
/// across all restarts. Deterministic given (model, params).
pub fn simulated_annealing(
    model: &QuboModel,
    params: &AnnealParams,
) -> Result<SolveResult, SolveError> {
    params.validate()?;
    if model.n == 0 {
        return Err(SolveError::EmptyModel);
    }
    let start = Instant::now();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for r in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, r as u64));
        let mut x = Assignment::new((0..model.n).map(|_| rng.gen::<bool>()).collect());
        let mut e = energy(model, &x)?;
        if best.as_ref().is_none_or(|(be, _)| e < *be) {
            best = Some((e, x.bits.clone()));
        }
        for sweep in 0..params.sweeps {
            let t = temperature(params, sweep);
            for i in 0..model.n {
                let delta = flip_delta(model, &x, i)?;
                let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta / t).exp();
                if accept {
                    x.bits[i] = !x.bits[i];
                    e += delta;
                    if e < best.as_ref().unwrap().0 {
                        best = Some((e, x.bits.clone()));
                    }
                }
            }
        }
    }
    let (_, bits) = best.unwrap();
    let assignment = Assignment::new(bits);
    // recompute from scratch so the reported energy carries no float drift
    let e = energy(model, &assignment)?;
    Ok(SolveResult {
        assignment,
        energy: e,
        stats: SolveStats {
            wall_time: start.elapsed().as_secs_f64(),
            sweeps_or_steps: (params.sweeps * params.restarts) as u64,
            restarts: params.restarts as u64,
            seed: params.seed,
        },
    })
}

/// Weighted greedy set cover: repeatedly pick the test maximizing
/// newly-covered features per unit cost (lowest index on ties) until all
/// features are covered, then score the selection against the default
/// auto-lambda QUBO for comparability with the other solvers.
pub fn greedy_cover(matrix: &CoverageMatrix) -> Result<SolveResult, SolveError> {
    let uncoverable = uncoverable_features(matrix);
    if !uncoverable.is_empty() {
        return Err(SolveError::Uncoverable(uncoverable));
    }
    let start = Instant::now();
    let n = matrix.n_tests();
    let m = matrix.n_features();
    let mut covered = vec![false; m];
    let mut selected = vec![false; n];
    let mut steps = 0u64;
    while covered.iter().any(|&c| !c) {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if selected[i] {
                continue;
            }
            let newly = (0..m)
                .filter(|&j| !covered[j] && matrix.incidence[j][i])
                .count();
            if newly == 0 {
                continue;
            }
            let ratio = if matrix.costs[i] == 0.0 {
                f64::INFINITY
            } else {
                newly as f64 / matrix.costs[i]
            };
            if best.is_none_or(|(br, _)| ratio > br) {
                best = Some((ratio, i));
            }
        }
        // uncoverable features were ruled out, so a pick always exists
        let (_, pick) = best.unwrap();
        selected[pick] = true;
        steps += 1;
        for j in 0..m {
            if matrix.incidence[j][pick] {
                covered[j] = true;
            }
        }
    }
    let assignment = Assignment::new(selected);
    let model = if n == 0 {
        QuboModel::new(0, vec![], BTreeMap::new(), 0.0, vec![])
    } else {
        build_qubo(matrix, &QuboConfig::default())?
    };
    let e = energy(&model, &assignment)?;
    Ok(SolveResult {
        assignment,
        energy: e,
        stats: SolveStats {
            wall_time: start.elapsed().as_secs_f64(),
            sweeps_or_steps: steps,
            restarts: 1,
            seed: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::inst_a;
    use crate::model::{build_coverage_matrix, Feature, TestCase, TestSuite};
    use crate::qubo::LambdaMode;

    fn inst_a_model(lambda: f64) -> QuboModel {
        let matrix = build_coverage_matrix(&inst_a()).unwrap();
        build_qubo(
            &matrix,
            &QuboConfig {
                lambda_mode: LambdaMode::Explicit(lambda),
                exclude_uncoverable: true,
            },
        )
        .unwrap()
    }

    #[test]
    fn exact_inst_a() {
        let model = inst_a_model(3.0);
        let res = exact_solve(&model).unwrap();
        assert_eq!(res.energy, 2.0);
        assert_eq!(
            res.assignment.bits,
            vec![false, true, false, true, false],
            "tie-break must pick {{t2, t4}}"
        );
    }

    #[test]
    fn exact_single_variable() {
        let suite = TestSuite::new(vec![TestCase::new("t1", &["f1"])], vec![Feature::new("f1")]);
        let matrix = build_coverage_matrix(&suite).unwrap();
        let model = build_qubo(
            &matrix,
            &QuboConfig {
                lambda_mode: LambdaMode::Explicit(2.0),
                exclude_uncoverable: true,
            },
        )
        .unwrap();
        let res = exact_solve(&model).unwrap();
        assert_eq!(res.assignment.bits, vec![true]);
        assert_eq!(res.energy, 1.0);
    }

    #[test]
    fn exact_empty_model_returns_offset() {
        let model = QuboModel::new(0, vec![], BTreeMap::new(), 7.0, vec![]);
        let res = exact_solve(&model).unwrap();
        assert!(res.assignment.bits.is_empty());
        assert_eq!(res.energy, 7.0);
    }

    #[test]
    fn exact_cap_enforced() {
        let model = QuboModel::new(
            30,
            vec![0.0; 30],
            BTreeMap::new(),
            0.0,
            (0..30).map(|i| format!("x{i}")).collect(),
        );
        assert!(matches!(
            exact_solve(&model).unwrap_err(),
            SolveError::TooLarge { n: 30, cap: 24 }
        ));
    }

    #[test]
    fn sa_reaches_inst_a_optimum() {
        let model = inst_a_model(3.0);
        let params = AnnealParams {
            seed: 42,
            ..Default::default()
        };
        let res = simulated_annealing(&model, &params).unwrap();
        assert_eq!(res.energy, 2.0);
    }

    #[test]
    fn sa_is_deterministic() {
        let model = inst_a_model(3.0);
        let params = AnnealParams::default();
        let a = simulated_annealing(&model, &params).unwrap();
        let b = simulated_annealing(&model, &params).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn sa_rejects_bad_params() {
        let model = inst_a_model(3.0);
        let params = AnnealParams {
            t_final: 20.0,
            ..Default::default()
        };
        assert!(matches!(
            simulated_annealing(&model, &params).unwrap_err(),
            SolveError::InvalidParams(_)
        ));
    }

    #[test]
    fn greedy_inst_a() {
        let matrix = build_coverage_matrix(&inst_a()).unwrap();
        let res = greedy_cover(&matrix).unwrap();
        // t4 covers two features first, then t1 covers f1
        assert_eq!(res.assignment.bits, vec![true, false, false, true, false]);
    }

    #[test]
    fn greedy_prefers_cheap_test() {
        let suite = TestSuite::new(
            vec![
                TestCase::new("t1", &["f1"]).with_cost(1.0),
                TestCase::new("t2", &["f1"]).with_cost(0.5),
            ],
            vec![Feature::new("f1")],
        );
        let matrix = build_coverage_matrix(&suite).unwrap();
        let res = greedy_cover(&matrix).unwrap();
        assert_eq!(res.assignment.bits, vec![false, true]);
    }

    #[test]
    fn greedy_empty_feature_set() {
        let matrix = build_coverage_matrix(&TestSuite::default()).unwrap();
        let res = greedy_cover(&matrix).unwrap();
        assert!(res.assignment.bits.is_empty());
        assert_eq!(res.energy, 0.0);
    }

    /// The quadratic per-feature penalty is "exactly one", not "at least
    /// one": when every way to cover a feature double-covers another, the
    /// ground state may leave it uncovered. t1 covers {g, h}, t2 covers
    /// {f, g}; any full cover hits g twice (energy 2 + lambda) while either
    /// single test leaves one feature uncovered at energy 1 + lambda.
    #[test]
    fn overlap_can_sacrifice_coverage() {
        let suite = TestSuite::new(
            vec![TestCase::new("t1", &["g", "h"]), TestCase::new("t2", &["f", "g"])],
            vec![Feature::new("f"), Feature::new("g"), Feature::new("h")],
        );
        let matrix = build_coverage_matrix(&suite).unwrap();
        let model = build_qubo(&matrix, &QuboConfig::default()).unwrap();
        let res = exact_solve(&model).unwrap();
        // {t1} and {t2} tie at 3; lex tie-break picks t2, leaving h uncovered
        assert_eq!(res.assignment.bits, vec![false, true]);
        assert_eq!(res.energy, 3.0);
    }

    #[test]
    fn greedy_rejects_uncoverable() {
        let mut suite = inst_a();
        suite.features.push(Feature::new("f9"));
        let matrix = build_coverage_matrix(&suite).unwrap();
        assert_eq!(
            greedy_cover(&matrix).unwrap_err(),
            SolveError::Uncoverable(vec!["f9".into()])
        );
    }
}
