//! Selection validation: coverage completeness, per-test removability, cost
//! accounting, and gap reporting against a known-optimal selection.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::CoverageMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("unknown test id `{0}`")]
    UnknownTest(String),
    #[error("selection leaves features uncovered: {}", .0.join(", "))]
    IncompleteCoverage(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub covered: Vec<String>,
    pub removable: Vec<String>,
    pub selected: Vec<String>,
    pub total_cost: f64,
    pub uncovered: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub oracle_cost: f64,
    pub qubo_cost: f64,
    pub relative_gap: f64,
}

fn selection_indices(
    matrix: &CoverageMatrix,
    selection: &BTreeSet<String>,
) -> Result<Vec<usize>, VerifyError> {
    selection
        .iter()
        .map(|id| {
            matrix
                .test_index(id)
                .ok_or_else(|| VerifyError::UnknownTest(id.clone()))
        })
        .collect()
}

fn covered_rows(matrix: &CoverageMatrix, selected: &[usize]) -> Vec<bool> {
    (0..matrix.n_features())
        .map(|j| selected.iter().any(|&i| matrix.incidence[j][i]))
        .collect()
}

/// Coverage report for a selection. `removable` lists selected tests whose
/// individual removal (judged against the full selection) leaves the covered
/// set unchanged.
pub fn check_coverage(
    matrix: &CoverageMatrix,
    selection: &BTreeSet<String>,
) -> Result<CoverageReport, VerifyError> {
    let indices = selection_indices(matrix, selection)?;
    let covered = covered_rows(matrix, &indices);
    let (covered_ids, uncovered_ids): (Vec<_>, Vec<_>) = matrix
        .feature_order
        .iter()
        .enumerate()
        .partition(|&(j, _)| covered[j]);

    // a selected test is removable iff every feature it covers has another
    // selected covering test
    let mut removable = Vec::new();
    for &i in &indices {
        let redundant = (0..matrix.n_features()).all(|j| {
            !matrix.incidence[j][i] || indices.iter().any(|&k| k != i && matrix.incidence[j][k])
        });
        if redundant {
            removable.push(matrix.test_order[i].clone());
        }
    }
    removable.sort_by_key(|id| matrix.test_index(id).unwrap());

    let mut selected: Vec<usize> = indices;
    selected.sort_unstable();
    Ok(CoverageReport {
        covered: covered_ids.into_iter().map(|(_, f)| f.clone()).collect(),
        uncovered: uncovered_ids.into_iter().map(|(_, f)| f.clone()).collect(),
        selected: selected
            .into_iter()
            .map(|i| matrix.test_order[i].clone())
            .collect(),
        total_cost: selection_cost(matrix, selection)?,
        removable,
    })
}

/// Sum of the selected tests' costs.
pub fn selection_cost(
    matrix: &CoverageMatrix,
    selection: &BTreeSet<String>,
) -> Result<f64, VerifyError> {
    let indices = selection_indices(matrix, selection)?;
    Ok(indices.iter().map(|&i| matrix.costs[i]).sum())
}

/// Cost gap of a QUBO-derived selection against an oracle selection. Both
/// must cover every coverable feature.
pub fn gap_report(
    matrix: &CoverageMatrix,
    qubo_selection: &BTreeSet<String>,
    oracle_selection: &BTreeSet<String>,
) -> Result<GapReport, VerifyError> {
    for sel in [qubo_selection, oracle_selection] {
        let report = check_coverage(matrix, sel)?;
        let uncoverable = crate::model::uncoverable_features(matrix);
        let missing: Vec<String> = report
            .uncovered
            .iter()
            .filter(|f| !uncoverable.contains(f))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(VerifyError::IncompleteCoverage(missing));
        }
    }
    let qubo_cost = selection_cost(matrix, qubo_selection)?;
    let oracle_cost = selection_cost(matrix, oracle_selection)?;
    let relative_gap = (qubo_cost - oracle_cost) / oracle_cost.max(1e-12);
    Ok(GapReport {
        qubo_cost,
        oracle_cost,
        relative_gap,
    })
}
