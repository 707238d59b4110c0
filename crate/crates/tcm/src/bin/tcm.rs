//! CLI for suite minimization: minimize, verify, export-qubo, bench,
//! gen-instance, and pipeline subcommands.
//!
//! Structured output goes to stdout (or --output); diagnostics go to
//! stderr. Exit codes: 0 success, 1 usage/input error, 2 incomplete
//! coverage after optimization.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tcm::bench::{bench_csv, gen_instance, run_benchmark, CostModel, InstanceSpec, SolverKind};
use tcm::ingest::{emit_suite, parse_suite};
use tcm::llm::{LiveClient, MockClient, PipelineConfig, SolverChoice};
use tcm::model::{build_coverage_matrix, uncoverable_features};
use tcm::qubo::{build_qubo, export_qubo, LambdaMode, QuboConfig};
use tcm::solvers::{exact_solve, greedy_cover, simulated_annealing, AnnealParams, SolveResult};
use tcm::verify::check_coverage;

#[derive(Parser)]
#[command(name = "tcm", about = "Test-suite minimization via QUBO optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sa,
    Exact,
    Greedy,
}

#[derive(Args)]
struct SolveFlags {
    /// RNG seed for annealing
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit penalty weight (mutually exclusive with --lambda-multiplier)
    #[arg(long, conflicts_with = "lambda_multiplier")]
    lambda: Option<f64>,
    /// Auto-lambda multiplier: lambda = max(multiplier * max cost, 1)
    #[arg(long, default_value_t = 2.0)]
    lambda_multiplier: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Sa)]
    solver: SolverArg,
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
}

impl SolveFlags {
    fn lambda_mode(&self) -> LambdaMode {
        match self.lambda {
            Some(v) => LambdaMode::Explicit(v),
            None => LambdaMode::Auto {
                multiplier: self.lambda_multiplier,
            },
        }
    }

    fn anneal_params(&self) -> AnnealParams {
        AnnealParams {
            sweeps: self.sweeps,
            restarts: self.restarts,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct OutputFlags {
    /// Write primary output here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Zero out timing fields for byte-exact comparisons
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a labeled suite and emit a selection document
    Minimize {
        suite: PathBuf,
        #[command(flatten)]
        solve: SolveFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Check a selection document against a suite
    Verify {
        suite: PathBuf,
        selection: PathBuf,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Emit the QUBO exchange text for a suite
    ExportQubo {
        suite: PathBuf,
        #[command(flatten)]
        solve: SolveFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Generate a synthetic labeled suite
    GenInstance {
        #[arg(long, default_value_t = 12)]
        n_tests: usize,
        #[arg(long, default_value_t = 6)]
        m_features: usize,
        #[arg(long, default_value_t = 2.0)]
        redundancy: f64,
        #[arg(long)]
        single_label: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Time and score solvers on synthetic instances, emitting CSV
    Bench {
        /// Instance sizes as NxM, repeatable
        #[arg(long = "size", default_value = "12x6")]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 2.0)]
        redundancy: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of exact,sa,greedy
        #[arg(long, default_value = "exact,sa,greedy")]
        solvers: String,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = 2000)]
        sweeps: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Run generate -> minimize -> (optional) refine against a completion service
    Pipeline {
        /// File holding the code under test
        code: PathBuf,
        /// Directory of numbered mock responses (000.txt, 001.txt, ...)
        #[arg(long, conflicts_with = "live")]
        mock: Option<PathBuf>,
        /// Use the live endpoint from TCM_LLM_* environment variables
        #[arg(long)]
        live: bool,
        #[arg(long)]
        refine: bool,
        #[command(flatten)]
        solve: SolveFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
}

// alphabetical fields keep the emitted document key-sorted
#[derive(Serialize)]
struct SelectionDocument {
    coverage: tcm::verify::CoverageReport,
    energy: f64,
    schema_version: u32,
    selected: Vec<String>,
    solver_stats: StatsDoc,
    total_cost: f64,
}

#[derive(Serialize)]
struct StatsDoc {
    restarts: u64,
    seed: u64,
    sweeps_or_steps: u64,
    wall_time: f64,
}

#[derive(Deserialize)]
struct SelectionInput {
    selected: Vec<String>,
}

fn write_output(out: &OutputFlags, text: &str) -> Result<(), String> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_suite(path: &PathBuf) -> Result<tcm::TestSuite, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_suite(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_solver(
    solver: SolverArg,
    matrix: &tcm::CoverageMatrix,
    model: &tcm::QuboModel,
    params: &AnnealParams,
) -> Result<SolveResult, String> {
    match solver {
        SolverArg::Exact => exact_solve(model).map_err(|e| e.to_string()),
        SolverArg::Sa => simulated_annealing(model, params).map_err(|e| e.to_string()),
        SolverArg::Greedy => greedy_cover(matrix).map_err(|e| e.to_string()),
    }
}

fn cmd_minimize(suite: &PathBuf, solve: &SolveFlags, out: &OutputFlags) -> Result<u8, String> {
    let suite = load_suite(suite)?;
    let matrix = build_coverage_matrix(&suite).map_err(|e| e.to_string())?;
    let config = QuboConfig {
        lambda_mode: solve.lambda_mode(),
        exclude_uncoverable: true,
    };
    let model = build_qubo(&matrix, &config).map_err(|e| e.to_string())?;
    if model.skipped_uncoverable > 0 {
        eprintln!(
            "warning: {} feature(s) covered by no test were excluded",
            model.skipped_uncoverable
        );
    }
    let result = run_solver(solve.solver, &matrix, &model, &solve.anneal_params())?;
    let selected: BTreeSet<String> = result.selected_ids(&model).into_iter().collect();
    let coverage = check_coverage(&matrix, &selected).map_err(|e| e.to_string())?;
    let uncoverable = uncoverable_features(&matrix);
    let incomplete = coverage
        .uncovered
        .iter()
        .any(|f| !uncoverable.contains(f));

    let doc = SelectionDocument {
        energy: result.energy,
        schema_version: 1,
        selected: coverage.selected.clone(),
        total_cost: coverage.total_cost,
        coverage,
        solver_stats: StatsDoc {
            restarts: result.stats.restarts,
            seed: result.stats.seed,
            sweeps_or_steps: result.stats.sweeps_or_steps,
            wall_time: if out.no_timing { 0.0 } else { result.stats.wall_time },
        },
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    text.push('\n');
    write_output(out, &text)?;
    Ok(if incomplete { 2 } else { 0 })
}

fn cmd_verify(suite: &PathBuf, selection: &PathBuf, out: &OutputFlags) -> Result<u8, String> {
    let suite = load_suite(suite)?;
    let matrix = build_coverage_matrix(&suite).map_err(|e| e.to_string())?;
    let text =
        std::fs::read_to_string(selection).map_err(|e| format!("{}: {e}", selection.display()))?;
    let input: SelectionInput = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", selection.display()))?;
    let selected: BTreeSet<String> = input.selected.into_iter().collect();
    let report = check_coverage(&matrix, &selected).map_err(|e| e.to_string())?;
    let uncoverable = uncoverable_features(&matrix);
    let incomplete = report.uncovered.iter().any(|f| !uncoverable.contains(f));
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    text.push('\n');
    write_output(out, &text)?;
    Ok(if incomplete { 2 } else { 0 })
}

fn cmd_export_qubo(suite: &PathBuf, solve: &SolveFlags, out: &OutputFlags) -> Result<u8, String> {
    let suite = load_suite(suite)?;
    let matrix = build_coverage_matrix(&suite).map_err(|e| e.to_string())?;
    let config = QuboConfig {
        lambda_mode: solve.lambda_mode(),
        exclude_uncoverable: true,
    };
    let model = build_qubo(&matrix, &config).map_err(|e| e.to_string())?;
    write_output(out, &export_qubo(&model))?;
    Ok(0)
}

fn parse_sizes(sizes: &[String]) -> Result<Vec<(usize, usize)>, String> {
    sizes
        .iter()
        .map(|s| {
            let (n, m) = s
                .split_once('x')
                .ok_or_else(|| format!("invalid --size `{s}`, expected NxM"))?;
            Ok((
                n.parse().map_err(|_| format!("invalid --size `{s}`"))?,
                m.parse().map_err(|_| format!("invalid --size `{s}`"))?,
            ))
        })
        .collect()
}

fn parse_solvers(s: &str) -> Result<Vec<SolverKind>, String> {
    s.split(',')
        .map(|name| match name.trim() {
            "exact" => Ok(SolverKind::Exact),
            "sa" => Ok(SolverKind::Sa),
            "greedy" => Ok(SolverKind::Greedy),
            other => Err(format!("unknown solver `{other}`")),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    sizes: &[String],
    redundancy: f64,
    seed: u64,
    solvers: &str,
    repetitions: usize,
    sweeps: usize,
    restarts: usize,
    out: &OutputFlags,
) -> Result<u8, String> {
    let specs: Vec<InstanceSpec> = parse_sizes(sizes)?
        .into_iter()
        .map(|(n, m)| InstanceSpec {
            n_tests: n,
            m_features: m,
            redundancy,
            single_label: false,
            cost_model: CostModel::Unit,
            seed,
        })
        .collect();
    let solvers = parse_solvers(solvers)?;
    let params = AnnealParams {
        sweeps,
        restarts,
        seed,
        ..Default::default()
    };
    let rows =
        run_benchmark(&specs, &solvers, repetitions, &params).map_err(|e| e.to_string())?;
    write_output(out, &bench_csv(&rows, !out.no_timing))?;
    Ok(0)
}

fn cmd_gen_instance(
    n_tests: usize,
    m_features: usize,
    redundancy: f64,
    single_label: bool,
    seed: u64,
    out: &OutputFlags,
) -> Result<u8, String> {
    let spec = InstanceSpec {
        n_tests,
        m_features,
        redundancy,
        single_label,
        cost_model: CostModel::Unit,
        seed,
    };
    let suite = gen_instance(&spec).map_err(|e| e.to_string())?;
    write_output(out, &emit_suite(&suite))?;
    Ok(0)
}

fn cmd_pipeline(
    code: &PathBuf,
    mock: &Option<PathBuf>,
    live: bool,
    refine: bool,
    solve: &SolveFlags,
    out: &OutputFlags,
) -> Result<u8, String> {
    let code = std::fs::read_to_string(code).map_err(|e| format!("{}: {e}", code.display()))?;
    let mut mock_client;
    let mut live_client;
    let client: &mut dyn tcm::llm::CompletionClient = match mock {
        Some(dir) => {
            mock_client = MockClient::from_dir(dir).map_err(|e| e.to_string())?;
            &mut mock_client
        }
        None if live => {
            live_client = LiveClient::from_env().map_err(|e| e.to_string())?;
            &mut live_client
        }
        None => return Err("pass --mock <fixture-dir> or --live".into()),
    };
    let config = PipelineConfig {
        solver: match solve.solver {
            SolverArg::Exact => SolverChoice::Exact,
            SolverArg::Sa => SolverChoice::Sa,
            SolverArg::Greedy => SolverChoice::Greedy,
        },
        lambda_mode: solve.lambda_mode(),
        anneal: solve.anneal_params(),
        refine,
    };
    let report = tcm::llm::run_pipeline(&code, &config, client).map_err(|e| e.to_string())?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    text.push('\n');
    write_output(out, &text)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Minimize { suite, solve, out } => cmd_minimize(suite, solve, out),
        Command::Verify {
            suite,
            selection,
            out,
        } => cmd_verify(suite, selection, out),
        Command::ExportQubo { suite, solve, out } => cmd_export_qubo(suite, solve, out),
        Command::GenInstance {
            n_tests,
            m_features,
            redundancy,
            single_label,
            seed,
            out,
        } => cmd_gen_instance(*n_tests, *m_features, *redundancy, *single_label, *seed, out),
        Command::Bench {
            sizes,
            redundancy,
            seed,
            solvers,
            repetitions,
            sweeps,
            restarts,
            out,
        } => cmd_bench(
            sizes,
            *redundancy,
            *seed,
            solvers,
            *repetitions,
            *sweeps,
            *restarts,
            out,
        ),
        Command::Pipeline {
            code,
            mock,
            live,
            refine,
            solve,
            out,
        } => cmd_pipeline(code, mock, *live, *refine, solve, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
