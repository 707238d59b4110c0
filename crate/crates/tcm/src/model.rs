//! Canonical data model: test cases, features, and the coverage incidence
//! matrix everything downstream is built from.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate test id `{0}`")]
    DuplicateTestId(String),
    #[error("duplicate feature id `{0}`")]
    DuplicateFeatureId(String),
    #[error("test `{test}` references unknown feature `{feature}`")]
    UnknownFeature { test: String, feature: String },
    #[error("test `{0}` covers no features")]
    EmptyCovers(String),
    #[error("test `{0}` has negative cost")]
    NegativeCost(String),
}

/// One labeled test. `covers` lists the feature ids this test validates.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: String,
    pub name: Option<String>,
    pub cost: f64,
    pub covers: Vec<String>,
    pub body: Option<String>,
}

impl TestCase {
    pub fn new(id: impl Into<String>, covers: &[&str]) -> Self {
        Self {
            id: id.into(),
            name: None,
            cost: 1.0,
            covers: covers.iter().map(|s| s.to_string()).collect(),
            body: None,
        }
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: String,
    pub description: Option<String>,
}

impl Feature {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: None,
        }
    }
}

/// A labeled test suite. Ordering of `tests` and `features` is declaration
/// order and determines variable indices everywhere downstream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
    pub features: Vec<Feature>,
}

impl TestSuite {
    pub fn new(tests: Vec<TestCase>, features: Vec<Feature>) -> Self {
        Self { tests, features }
    }

    /// Checks id uniqueness, non-empty covers, non-negative costs, and that
    /// every referenced feature is declared.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut test_ids = HashSet::new();
        for t in &self.tests {
            if !test_ids.insert(t.id.as_str()) {
                return Err(ModelError::DuplicateTestId(t.id.clone()));
            }
            if t.covers.is_empty() {
                return Err(ModelError::EmptyCovers(t.id.clone()));
            }
            if t.cost < 0.0 || !t.cost.is_finite() {
                return Err(ModelError::NegativeCost(t.id.clone()));
            }
        }
        let mut feature_ids = HashSet::new();
        for f in &self.features {
            if !feature_ids.insert(f.id.as_str()) {
                return Err(ModelError::DuplicateFeatureId(f.id.clone()));
            }
        }
        for t in &self.tests {
            for c in &t.covers {
                if !feature_ids.contains(c.as_str()) {
                    return Err(ModelError::UnknownFeature {
                        test: t.id.clone(),
                        feature: c.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Feature-by-test boolean incidence. Row/column order follows the suite's
/// declaration order; `incidence[j][i]` is true iff test i covers feature j.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMatrix {
    pub feature_order: Vec<String>,
    pub test_order: Vec<String>,
    pub incidence: Vec<Vec<bool>>,
    pub costs: Vec<f64>,
}

impl CoverageMatrix {
    pub fn n_features(&self) -> usize {
        self.feature_order.len()
    }

    pub fn n_tests(&self) -> usize {
        self.test_order.len()
    }

    /// Covering set for feature row j: indices of tests that cover it.
    pub fn covering_tests(&self, j: usize) -> Vec<usize> {
        self.incidence[j]
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn test_index(&self, id: &str) -> Option<usize> {
        self.test_order.iter().position(|t| t == id)
    }
}

/// Derives the incidence matrix from a validated suite.
pub fn build_coverage_matrix(suite: &TestSuite) -> Result<CoverageMatrix, ModelError> {
    suite.validate()?;
    let feature_order: Vec<String> = suite.features.iter().map(|f| f.id.clone()).collect();
    let test_order: Vec<String> = suite.tests.iter().map(|t| t.id.clone()).collect();
    let mut incidence = vec![vec![false; test_order.len()]; feature_order.len()];
    for (i, t) in suite.tests.iter().enumerate() {
        for c in &t.covers {
            let j = feature_order.iter().position(|f| f == c).unwrap();
            incidence[j][i] = true;
        }
    }
    let costs = suite.tests.iter().map(|t| t.cost).collect();
    Ok(CoverageMatrix {
        feature_order,
        test_order,
        incidence,
        costs,
    })
}

/// Ids of features no test covers, in row order.
pub fn uncoverable_features(matrix: &CoverageMatrix) -> Vec<String> {
    matrix
        .incidence
        .iter()
        .zip(&matrix.feature_order)
        .filter_map(|(row, id)| row.iter().all(|&b| !b).then(|| id.clone()))
        .collect()
}
