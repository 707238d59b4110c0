//! Synthetic instance generation and a timing/quality harness comparing the
//! solvers, with CSV output and improvement-percentage reporting.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{build_coverage_matrix, Feature, TestCase, TestSuite};
use crate::qubo::{build_qubo, QuboConfig};
use crate::solvers::{
    exact_solve, greedy_cover, simulated_annealing, AnnealParams, SolveError, EXACT_CAP,
};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("single-label instances need n_tests >= m_features (got n={n}, m={m})")]
    SingleLabelInfeasible { n: usize, m: usize },
    #[error("redundancy must be >= 1, got {0}")]
    BadRedundancy(f64),
    #[error("redundancy {redundancy} needs at least {needed} tests, got {n}")]
    RedundancyInfeasible {
        redundancy: f64,
        needed: usize,
        n: usize,
    },
    #[error("repetitions must be >= 1")]
    ZeroRepetitions,
    #[error("baseline must be > 0, got {0}")]
    NonPositiveBaseline(f64),
    #[error("fast time must be > 0, got {0}")]
    NonPositiveFast(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Qubo(#[from] crate::qubo::QuboError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    Unit,
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub n_tests: usize,
    pub m_features: usize,
    /// Average number of covering tests per feature.
    pub redundancy: f64,
    pub single_label: bool,
    pub cost_model: CostModel,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn name(&self) -> String {
        format!("n{}_m{}_seed{}", self.n_tests, self.m_features, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Sa,
    Greedy,
}

impl SolverKind {
    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Sa => "sa",
            SolverKind::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub median_ms: f64,
    pub best_energy: f64,
    /// None when the instance is over the exact-solve cap.
    pub optimum_found: Option<bool>,
    pub repetitions: usize,
}

/// Deterministic random suite: every feature gets floor/ceil(redundancy)
/// covering tests (so nothing is uncoverable), every test covers at least
/// one feature. Single-label mode assigns exactly one feature per test.
pub fn gen_instance(spec: &InstanceSpec) -> Result<TestSuite, BenchError> {
    if spec.redundancy < 1.0 {
        return Err(BenchError::BadRedundancy(spec.redundancy));
    }
    if spec.single_label && spec.m_features > spec.n_tests {
        return Err(BenchError::SingleLabelInfeasible {
            n: spec.n_tests,
            m: spec.m_features,
        });
    }
    let max_per_feature = spec.redundancy.ceil() as usize;
    if !spec.single_label && max_per_feature > spec.n_tests && spec.m_features > 0 {
        return Err(BenchError::RedundancyInfeasible {
            redundancy: spec.redundancy,
            needed: max_per_feature,
            n: spec.n_tests,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut covers: Vec<Vec<String>> = vec![Vec::new(); spec.n_tests];
    let feature_id = |j: usize| format!("f{}", j + 1);

    if spec.single_label {
        // shuffle test slots; the first m get distinct features, the rest a
        // random one, so every feature is covered
        let mut slots: Vec<usize> = (0..spec.n_tests).collect();
        slots.shuffle(&mut rng);
        for (j, &i) in slots.iter().take(spec.m_features).enumerate() {
            covers[i].push(feature_id(j));
        }
        for &i in slots.iter().skip(spec.m_features) {
            covers[i].push(feature_id(rng.gen_range(0..spec.m_features.max(1))));
        }
    } else {
        let lo = spec.redundancy.floor() as usize;
        let frac = spec.redundancy - lo as f64;
        for j in 0..spec.m_features {
            let k = (lo + usize::from(rng.gen::<f64>() < frac)).clamp(1, spec.n_tests);
            let mut pool: Vec<usize> = (0..spec.n_tests).collect();
            pool.shuffle(&mut rng);
            for &i in pool.iter().take(k) {
                covers[i].push(feature_id(j));
            }
        }
        // suite invariant: every test covers something
        for c in covers.iter_mut() {
            if c.is_empty() && spec.m_features > 0 {
                c.push(feature_id(rng.gen_range(0..spec.m_features)));
            }
        }
    }

    let tests = covers
        .into_iter()
        .enumerate()
        .map(|(i, covers)| {
            let cost = match spec.cost_model {
                CostModel::Unit => 1.0,
                CostModel::Uniform { lo, hi } => rng.gen_range(lo..hi),
            };
            TestCase {
                id: format!("t{}", i + 1),
                name: None,
                cost,
                covers,
                body: None,
            }
        })
        .collect();
    let features = (0..spec.m_features).map(|j| Feature::new(feature_id(j))).collect();
    let suite = TestSuite::new(tests, features);
    suite.validate()?;
    Ok(suite)
}

/// Times each solver on each instance. Only the solve call is timed; model
/// construction is excluded. When n is under the exact cap, the exact
/// optimum decides `optimum_found` (|diff| <= 1e-9).
pub fn run_benchmark(
    specs: &[InstanceSpec],
    solvers: &[SolverKind],
    repetitions: usize,
    anneal: &AnnealParams,
) -> Result<Vec<BenchRow>, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::ZeroRepetitions);
    }
    let mut rows = Vec::new();
    for spec in specs {
        let suite = gen_instance(spec)?;
        let matrix = build_coverage_matrix(&suite)?;
        let model = build_qubo(&matrix, &QuboConfig::default())?;
        let optimum = if model.n <= EXACT_CAP {
            Some(exact_solve(&model)?.energy)
        } else {
            None
        };
        for solver in solvers {
            let mut times_ms = Vec::with_capacity(repetitions);
            let mut best_energy = f64::INFINITY;
            for _ in 0..repetitions {
                let start = Instant::now();
                let result = match solver {
                    SolverKind::Exact => exact_solve(&model)?,
                    SolverKind::Sa => simulated_annealing(&model, anneal)?,
                    SolverKind::Greedy => greedy_cover(&matrix)?,
                };
                times_ms.push(start.elapsed().as_secs_f64() * 1e3);
                best_energy = best_energy.min(result.energy);
            }
            times_ms.sort_by(f64::total_cmp);
            let mid = times_ms.len() / 2;
            let median_ms = if times_ms.len() % 2 == 1 {
                times_ms[mid]
            } else {
                (times_ms[mid - 1] + times_ms[mid]) / 2.0
            };
            rows.push(BenchRow {
                instance: spec.name(),
                solver: solver.label().to_string(),
                n: matrix.n_tests(),
                m: matrix.n_features(),
                median_ms,
                best_energy,
                optimum_found: optimum.map(|opt| (best_energy - opt).abs() <= 1e-9),
                repetitions,
            });
        }
    }
    rows.sort_by(|a, b| (&a.instance, &a.solver).cmp(&(&b.instance, &b.solver)));
    Ok(rows)
}

pub const BENCH_CSV_HEADER: &str = "instance,solver,n,m,median_ms,best_energy,optimum_found";

/// CSV per the declared schema; rows come pre-sorted from `run_benchmark`.
/// `include_timing` false zeroes the median column for golden-file tests.
pub fn bench_csv(rows: &[BenchRow], include_timing: bool) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let median = if include_timing { r.median_ms } else { 0.0 };
        let optimum = match r.optimum_found {
            Some(true) => "true",
            Some(false) => "false",
            None => "na",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.instance, r.solver, r.n, r.m, median, r.best_energy, optimum
        ));
    }
    out
}

/// 100 * (baseline - treated) / baseline, rounded to one decimal place.
pub fn improvement_percent(baseline: f64, treated: f64) -> Result<f64, BenchError> {
    if baseline <= 0.0 {
        return Err(BenchError::NonPositiveBaseline(baseline));
    }
    let raw = 100.0 * (baseline - treated) / baseline;
    Ok((raw * 10.0).round() / 10.0)
}

pub fn speedup_ratio(slow: f64, fast: f64) -> Result<f64, BenchError> {
    if fast <= 0.0 {
        return Err(BenchError::NonPositiveFast(fast));
    }
    Ok(slow / fast)
}

/// Human-readable comparison table (Metric / Baseline / TDD / Improvement).
pub fn comparison_table(rows: &[(&str, f64, f64)]) -> Result<String, BenchError> {
    let mut out = format!(
        "{:<20} {:>12} {:>12} {:>12}\n",
        "Metric", "Baseline", "TDD", "Improvement"
    );
    for (metric, baseline, treated) in rows {
        let pct = improvement_percent(*baseline, *treated)?;
        out.push_str(&format!(
            "{metric:<20} {baseline:>12.2} {treated:>12.2} {pct:>11.1}%\n"
        ));
    }
    Ok(out)
}
