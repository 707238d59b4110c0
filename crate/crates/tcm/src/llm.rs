//! Completion-service adapter and the three-stage pipeline: generate a
//! comprehensive labeled suite, minimize it via the QUBO path, and
//! optionally refine the code against the minimized suite.
//!
//! A mock transport backed by numbered fixture files keeps the whole
//! pipeline hermetic; the live transport speaks a provider-agnostic
//! chat-completion wire contract configured through environment variables.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::improvement_percent;
use crate::ingest::{emit_suite, parse_model_output};
use crate::model::{build_coverage_matrix, uncoverable_features, TestSuite};
use crate::qubo::{build_qubo, LambdaMode, QuboConfig};
use crate::solvers::{exact_solve, greedy_cover, simulated_annealing, AnnealParams};
use crate::verify::check_coverage;

pub const GENERATE_PROMPT_V1: &str = include_str!("../prompts/generate_suite_v1.txt");
pub const GENERATE_RETRY_PROMPT_V1: &str = include_str!("../prompts/generate_suite_retry_v1.txt");
pub const REFINE_PROMPT_V1: &str = include_str!("../prompts/refine_code_v1.txt");

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("mock fixtures exhausted after {0} responses")]
    FixturesExhausted(usize),
    #[error("no fixture files found in {0}")]
    NoFixtures(PathBuf),
    #[error("completion response is empty")]
    EmptyResponse,
    #[error("code under test is empty")]
    EmptyCode,
    #[error("could not parse a suite from the model output after {attempts} attempts: {last_error}")]
    Unparsable {
        attempts: usize,
        last_error: String,
        transcripts: Vec<Transcript>,
    },
    #[error("pipeline stage `{stage}` failed: {message}")]
    Stage {
        stage: String,
        message: String,
        transcripts: Vec<Transcript>,
    },
}

pub trait CompletionClient {
    fn complete(&mut self, prompt: &str) -> Result<String, LlmError>;
}

/// Replays fixture files `000.txt`, `001.txt`, ... in sequence, one per
/// request. Pure given the fixture set.
pub struct MockClient {
    responses: Vec<String>,
    next: usize,
}

impl MockClient {
    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| LlmError::Transport(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(LlmError::NoFixtures(dir.to_path_buf()));
        }
        let responses = files
            .iter()
            .map(|p| {
                std::fs::read_to_string(p)
                    .map_err(|e| LlmError::Transport(format!("{}: {e}", p.display())))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { responses, next: 0 })
    }

    pub fn from_responses(responses: Vec<String>) -> Self {
        Self { responses, next: 0 }
    }
}

impl CompletionClient for MockClient {
    fn complete(&mut self, _prompt: &str) -> Result<String, LlmError> {
        let r = self
            .responses
            .get(self.next)
            .ok_or(LlmError::FixturesExhausted(self.responses.len()))?;
        self.next += 1;
        Ok(r.clone())
    }
}

/// Thin client over a chat-completion endpoint. Configuration comes from
/// TCM_LLM_ENDPOINT, TCM_LLM_MODEL, and TCM_LLM_API_KEY.
pub struct LiveClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl LiveClient {
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var("TCM_LLM_ENDPOINT")
            .map_err(|_| LlmError::Transport("TCM_LLM_ENDPOINT not set".into()))?;
        let model = std::env::var("TCM_LLM_MODEL")
            .map_err(|_| LlmError::Transport("TCM_LLM_MODEL not set".into()))?;
        let api_key = std::env::var("TCM_LLM_API_KEY").ok();
        Ok(Self {
            endpoint,
            model,
            api_key,
        })
    }
}

impl CompletionClient for LiveClient {
    fn complete(&mut self, prompt: &str) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = ureq::post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp: serde_json::Value = req
            .send_json(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?
            .into_json()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Transport("response missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub prompt: String,
    pub prompt_tokens: usize,
    pub response: String,
    pub response_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Exact,
    Sa,
    Greedy,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub solver: SolverChoice,
    pub lambda_mode: LambdaMode,
    pub anneal: AnnealParams,
    pub refine: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Sa,
            lambda_mode: LambdaMode::default(),
            anneal: AnnealParams::default(),
            refine: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub baseline_tokens: usize,
    pub comprehensive_size: usize,
    pub guided_tokens: usize,
    pub minimized_ids: Vec<String>,
    pub minimized_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_code: Option<String>,
    pub token_reduction_pct: f64,
    pub transcripts: Vec<Transcript>,
}

/// Crude length-based token estimate: ceil(characters / 4). Live transports
/// may record provider-reported counts separately.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn transcript(prompt: String, response: String) -> Transcript {
    Transcript {
        prompt_tokens: estimate_tokens(&prompt),
        response_tokens: estimate_tokens(&response),
        prompt,
        response,
    }
}

#[derive(Debug)]
pub struct GenerationOutcome {
    pub suite: TestSuite,
    pub transcripts: Vec<Transcript>,
}

/// Stage 1: prompt for a comprehensive labeled suite and parse the reply.
/// One error-correcting retry on parse failure (2 attempts total).
pub fn generate_comprehensive_suite(
    code: &str,
    client: &mut dyn CompletionClient,
) -> Result<GenerationOutcome, LlmError> {
    if code.is_empty() {
        return Err(LlmError::EmptyCode);
    }
    let mut transcripts = Vec::new();
    let prompt = GENERATE_PROMPT_V1.replace("{{CODE}}", code);
    let response = client.complete(&prompt)?;
    let first_err = match parse_model_output(&response) {
        Ok(suite) => {
            transcripts.push(transcript(prompt, response));
            return Ok(GenerationOutcome { suite, transcripts });
        }
        Err(e) => {
            transcripts.push(transcript(prompt, response));
            e
        }
    };

    let retry = GENERATE_RETRY_PROMPT_V1
        .replace("{{ERROR}}", &first_err.to_string())
        .replace("{{CODE}}", code);
    let response = client.complete(&retry)?;
    match parse_model_output(&response) {
        Ok(suite) => {
            transcripts.push(transcript(retry, response));
            Ok(GenerationOutcome { suite, transcripts })
        }
        Err(e) => {
            transcripts.push(transcript(retry, response));
            Err(LlmError::Unparsable {
                attempts: 2,
                last_error: e.to_string(),
                transcripts,
            })
        }
    }
}

/// Stage 3: refactor the code against the minimized suite. Returns the first
/// fenced code block of the response, or the whole response when unfenced.
pub fn refine_code(
    code: &str,
    minimized: &TestSuite,
    client: &mut dyn CompletionClient,
) -> Result<(String, Transcript), LlmError> {
    let prompt = REFINE_PROMPT_V1
        .replace("{{CODE}}", code)
        .replace("{{SUITE}}", &emit_suite(minimized));
    let response = client.complete(&prompt)?;
    if response.is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    let refined = extract_code_block(&response);
    Ok((refined, transcript(prompt, response)))
}

fn extract_code_block(response: &str) -> String {
    if let Some(open) = response.find("```") {
        let after_fence = &response[open + 3..];
        // skip an optional language tag on the fence line
        let body_start = after_fence.find('\n').map_or(0, |p| p + 1);
        let body = &after_fence[body_start..];
        if let Some(close) = body.find("```") {
            return body[..close].to_string();
        }
    }
    response.to_string()
}

/// Restriction of `suite` to the selected test ids, keeping declaration
/// order; features no selected test references are dropped.
pub fn restrict_suite(suite: &TestSuite, selected: &BTreeSet<String>) -> TestSuite {
    let tests: Vec<_> = suite
        .tests
        .iter()
        .filter(|t| selected.contains(&t.id))
        .cloned()
        .collect();
    let features = suite
        .features
        .iter()
        .filter(|f| tests.iter().any(|t| t.covers.contains(&f.id)))
        .cloned()
        .collect();
    TestSuite::new(tests, features)
}

fn stage_err(stage: &str, message: impl ToString, transcripts: &[Transcript]) -> LlmError {
    LlmError::Stage {
        stage: stage.into(),
        message: message.to_string(),
        transcripts: transcripts.to_vec(),
    }
}

/// Runs the full pipeline: generate, minimize, verify, optionally refine.
/// Baseline tokens measure (code + comprehensive document); guided tokens
/// measure (code + minimized document).
pub fn run_pipeline(
    code: &str,
    config: &PipelineConfig,
    client: &mut dyn CompletionClient,
) -> Result<PipelineReport, LlmError> {
    // stage 1: comprehensive suite
    let GenerationOutcome {
        suite,
        mut transcripts,
    } = generate_comprehensive_suite(code, client)?;

    // stage 2: minimize and verify
    let matrix =
        build_coverage_matrix(&suite).map_err(|e| stage_err("minimize", e, &transcripts))?;
    let qubo_config = QuboConfig {
        lambda_mode: config.lambda_mode,
        exclude_uncoverable: true,
    };
    let result = match config.solver {
        SolverChoice::Greedy => greedy_cover(&matrix),
        SolverChoice::Exact | SolverChoice::Sa => {
            let model = build_qubo(&matrix, &qubo_config)
                .map_err(|e| stage_err("minimize", e, &transcripts))?;
            match config.solver {
                SolverChoice::Exact => exact_solve(&model),
                _ => simulated_annealing(&model, &config.anneal),
            }
        }
    }
    .map_err(|e| stage_err("minimize", e, &transcripts))?;

    let selected: BTreeSet<String> = result
        .assignment
        .selected_indices()
        .into_iter()
        .map(|i| matrix.test_order[i].clone())
        .collect();
    let report =
        check_coverage(&matrix, &selected).map_err(|e| stage_err("verify", e, &transcripts))?;
    let uncoverable = uncoverable_features(&matrix);
    let missing: Vec<String> = report
        .uncovered
        .iter()
        .filter(|f| !uncoverable.contains(f))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(stage_err(
            "verify",
            format!("solver left features uncovered: {}", missing.join(", ")),
            &transcripts,
        ));
    }
    let minimized = restrict_suite(&suite, &selected);

    // stage 3: optional refinement
    let refined_code = if config.refine {
        let (refined, t) =
            refine_code(code, &minimized, client).map_err(|e| stage_err("refine", e, &transcripts))?;
        transcripts.push(t);
        Some(refined)
    } else {
        None
    };

    let baseline_doc = emit_suite(&suite);
    let guided_doc = emit_suite(&minimized);
    let baseline_tokens = estimate_tokens(&format!("{code}{baseline_doc}"));
    let guided_tokens = estimate_tokens(&format!("{code}{guided_doc}"));
    let token_reduction_pct = improvement_percent(baseline_tokens as f64, guided_tokens as f64)
        .map_err(|e| stage_err("report", e, &transcripts))?;

    Ok(PipelineReport {
        baseline_tokens,
        guided_tokens,
        token_reduction_pct,
        comprehensive_size: suite.tests.len(),
        minimized_size: minimized.tests.len(),
        minimized_ids: report.selected,
        refined_code,
        transcripts,
    })
}
