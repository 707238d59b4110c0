//! Suite document serialization (JSON, schema_version 1) and a tolerant
//! parser for model-produced text that may wrap the document in prose or
//! code fences.
//!
//! Emitted documents are deterministic: keys sorted, two-space indentation,
//! cost always explicit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Feature, ModelError, TestCase, TestSuite};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("malformed document at {0}")]
    Malformed(String),
    #[error("unsupported schema_version {0}")]
    UnsupportedSchema(u32),
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("no parsable suite document found; input begins: {0:?}")]
    NoDocument(String),
}

// field order is alphabetical so serde_json emits sorted keys
#[derive(Debug, Serialize, Deserialize)]
struct TestDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[serde(default = "default_cost")]
    cost: f64,
    covers: Vec<String>,
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

fn default_cost() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SuiteDocument {
    #[serde(default)]
    features: Vec<FeatureDoc>,
    schema_version: u32,
    tests: Vec<TestDoc>,
}

/// Parses a suite document. Missing costs default to 1.0. The features
/// section is optional: feature ids referenced by tests but not declared are
/// auto-registered in first-reference order, after the declared ones.
pub fn parse_suite(text: &str) -> Result<TestSuite, IngestError> {
    let doc: SuiteDocument = serde_json::from_str(text)
        .map_err(|e| IngestError::Malformed(format!("line {}, column {}", e.line(), e.column())))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(IngestError::UnsupportedSchema(doc.schema_version));
    }
    let mut features: Vec<Feature> = doc
        .features
        .into_iter()
        .map(|f| Feature {
            id: f.id,
            description: f.description,
        })
        .collect();
    for t in &doc.tests {
        for c in &t.covers {
            if !features.iter().any(|f| &f.id == c) {
                features.push(Feature::new(c.clone()));
            }
        }
    }
    let tests = doc
        .tests
        .into_iter()
        .map(|t| TestCase {
            id: t.id,
            name: t.name,
            cost: t.cost,
            covers: t.covers,
            body: t.body,
        })
        .collect();
    let suite = TestSuite::new(tests, features);
    suite.validate()?;
    Ok(suite)
}

/// Locates the first well-formed suite document inside free-form model
/// output (prose, markdown fences) and parses it.
pub fn parse_model_output(text: &str) -> Result<TestSuite, IngestError> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(open) = text[start..].find('{').map(|p| p + start) {
        if let Some(end) = matching_brace(bytes, open) {
            if let Ok(suite) = parse_suite(&text[open..=end]) {
                return Ok(suite);
            }
        }
        start = open + 1;
    }
    let head: String = text.chars().take(200).collect();
    Err(IngestError::NoDocument(head))
}

/// Index of the `}` matching the `{` at `open`, skipping string literals.
fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Deterministic key-sorted emission; `parse_suite(emit_suite(s)) == s`.
pub fn emit_suite(suite: &TestSuite) -> String {
    let doc = SuiteDocument {
        features: suite
            .features
            .iter()
            .map(|f| FeatureDoc {
                description: f.description.clone(),
                id: f.id.clone(),
            })
            .collect(),
        schema_version: SCHEMA_VERSION,
        tests: suite
            .tests
            .iter()
            .map(|t| TestDoc {
                body: t.body.clone(),
                cost: t.cost,
                covers: t.covers.clone(),
                id: t.id.clone(),
                name: t.name.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("suite document serializes");
    out.push('\n');
    out
}
