//! QUBO construction and evaluation.
//!
//! The objective realized here is
//!   E(x) = sum_i cost_i * x_i + lambda * sum_j (1 - sum_{i in S_j} x_i)^2
//! where S_j is the set of tests covering feature j. The squared per-feature
//! term expands (using x^2 = x) into linear terms, pairwise quadratic terms,
//! and a constant offset.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::CoverageMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("no tests")]
    NoTests,
    #[error("lambda multiplier must be > 1, got {0}")]
    BadMultiplier(f64),
    #[error("explicit lambda must be > 0, got {0}")]
    BadLambda(f64),
    #[error("uncoverable features present: {}", .0.join(", "))]
    UncoverableFeatures(Vec<String>),
    #[error("assignment length {got} does not match model size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for model size {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Explicit(f64),
    Auto { multiplier: f64 },
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::Auto { multiplier: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboConfig {
    pub lambda_mode: LambdaMode,
    pub exclude_uncoverable: bool,
}

impl Default for QuboConfig {
    fn default() -> Self {
        Self {
            lambda_mode: LambdaMode::default(),
            exclude_uncoverable: true,
        }
    }
}

/// Sparse QUBO: linear vector, upper-triangular quadratic map, constant
/// offset. Zero coefficients are never stored.
#[derive(Debug, Clone)]
pub struct QuboModel {
    pub n: usize,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub var_names: Vec<String>,
    /// Features skipped at build time because no test covers them.
    pub skipped_uncoverable: usize,
    /// Symmetric adjacency view of `quadratic`, for O(degree) flip deltas.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for QuboModel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.linear == other.linear
            && self.quadratic == other.quadratic
            && self.offset == other.offset
            && self.var_names == other.var_names
    }
}

impl QuboModel {
    pub fn new(
        n: usize,
        linear: Vec<f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
        var_names: Vec<String>,
    ) -> Self {
        debug_assert_eq!(linear.len(), n);
        debug_assert_eq!(var_names.len(), n);
        debug_assert!(quadratic.keys().all(|&(i, j)| i < j && j < n));
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &q) in &quadratic {
            adjacency[i].push((j, q));
            adjacency[j].push((i, q));
        }
        Self {
            n,
            linear,
            quadratic,
            offset,
            var_names,
            skipped_uncoverable: 0,
            adjacency,
        }
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }
}

/// Binary assignment aligned with a model's variable order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    /// Decodes an integer bitmask, bit 0 -> x_0.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Penalty weight that strictly dominates any single-test saving:
/// max(multiplier * max(costs), 1.0).
pub fn auto_lambda(costs: &[f64], multiplier: f64) -> Result<f64, QuboError> {
    if costs.is_empty() {
        return Err(QuboError::NoTests);
    }
    if multiplier <= 1.0 {
        return Err(QuboError::BadMultiplier(multiplier));
    }
    let max_cost = costs.iter().cloned().fold(0.0, f64::max);
    Ok((multiplier * max_cost).max(1.0))
}

/// Expands the cost + penalty objective into a sparse QUBO.
///
/// Per feature j with covering set S_j: offset += lambda, L[i] -= lambda for
/// each i in S_j, Q[(i,k)] += 2*lambda for each pair i < k in S_j. The cost
/// term adds cost_i to L[i]. Features with empty covering sets are skipped
/// (counted in `skipped_uncoverable`) when `exclude_uncoverable` is set,
/// otherwise they are an error.
pub fn build_qubo(matrix: &CoverageMatrix, config: &QuboConfig) -> Result<QuboModel, QuboError> {
    let n = matrix.n_tests();
    let lambda = match config.lambda_mode {
        LambdaMode::Explicit(v) => {
            if v <= 0.0 {
                return Err(QuboError::BadLambda(v));
            }
            v
        }
        LambdaMode::Auto { multiplier } => auto_lambda(&matrix.costs, multiplier)?,
    };

    let uncoverable: Vec<String> = crate::model::uncoverable_features(matrix);
    if !uncoverable.is_empty() && !config.exclude_uncoverable {
        return Err(QuboError::UncoverableFeatures(uncoverable));
    }

    let mut linear = matrix.costs.clone();
    let mut quadratic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut offset = 0.0;
    for j in 0..matrix.n_features() {
        let covering = matrix.covering_tests(j);
        if covering.is_empty() {
            continue;
        }
        offset += lambda;
        for &i in &covering {
            linear[i] -= lambda;
        }
        for (a, &i) in covering.iter().enumerate() {
            for &k in &covering[a + 1..] {
                *quadratic.entry((i, k)).or_insert(0.0) += 2.0 * lambda;
            }
        }
    }
    quadratic.retain(|_, q| *q != 0.0);

    let mut model = QuboModel::new(n, linear, quadratic, offset, matrix.test_order.clone());
    model.skipped_uncoverable = uncoverable.len();
    Ok(model)
}

/// Full energy: offset + sum_i L[i] x_i + sum_{i<j} Q[(i,j)] x_i x_j.
pub fn energy(model: &QuboModel, x: &Assignment) -> Result<f64, QuboError> {
    if x.bits.len() != model.n {
        return Err(QuboError::LengthMismatch {
            expected: model.n,
            got: x.bits.len(),
        });
    }
    let mut e = model.offset;
    for (i, &b) in x.bits.iter().enumerate() {
        if b {
            e += model.linear[i];
        }
    }
    for (&(i, j), &q) in &model.quadratic {
        if x.bits[i] && x.bits[j] {
            e += q;
        }
    }
    Ok(e)
}

/// Energy change from flipping bit i, in O(degree of i).
pub fn flip_delta(model: &QuboModel, x: &Assignment, i: usize) -> Result<f64, QuboError> {
    if i >= model.n {
        return Err(QuboError::IndexOutOfRange { index: i, n: model.n });
    }
    if x.bits.len() != model.n {
        return Err(QuboError::LengthMismatch {
            expected: model.n,
            got: x.bits.len(),
        });
    }
    let mut local = model.linear[i];
    for &(j, q) in model.neighbors(i) {
        if x.bits[j] {
            local += q;
        }
    }
    let sign = if x.bits[i] { -1.0 } else { 1.0 };
    Ok(sign * local)
}

/// Deterministic textual exchange format:
/// `# qubo n=<n> offset=<offset>`, then `i i <L[i]>` per nonzero linear term
/// in ascending i, then `i j <Q[(i,j)]>` per quadratic term in ascending
/// (i, j). Reals print with shortest round-trip representation.
pub fn export_qubo(model: &QuboModel) -> String {
    let mut out = format!("# qubo n={} offset={}\n", model.n, model.offset);
    for (i, &l) in model.linear.iter().enumerate() {
        if l != 0.0 {
            out.push_str(&format!("{i} {i} {l}\n"));
        }
    }
    for (&(i, j), &q) in &model.quadratic {
        out.push_str(&format!("{i} {j} {q}\n"));
    }
    out
}

/// Inverse of [`export_qubo`]. Variable names are synthesized as
/// `x0`..`x{n-1}` since the format does not carry them.
pub fn import_qubo(text: &str) -> Result<QuboModel, QuboError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(QuboError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let parse_err = |line: usize, message: &str| QuboError::Parse {
        line,
        message: message.into(),
    };

    let rest = header
        .strip_prefix("# qubo n=")
        .ok_or_else(|| parse_err(1, "expected header `# qubo n=<n> offset=<offset>`"))?;
    let (n_str, offset_str) = rest
        .split_once(" offset=")
        .ok_or_else(|| parse_err(1, "expected header `# qubo n=<n> offset=<offset>`"))?;
    let n: usize = n_str
        .parse()
        .map_err(|_| parse_err(1, "invalid variable count"))?;
    let offset: f64 = offset_str
        .parse()
        .map_err(|_| parse_err(1, "invalid offset"))?;

    let mut linear = vec![0.0; n];
    let mut seen_linear = vec![false; n];
    let mut quadratic = BTreeMap::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(line_no, "expected `i j value`"));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, "invalid index"))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, "invalid index"))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, "invalid coefficient"))?;
        if i >= n || j >= n {
            return Err(parse_err(line_no, "index out of range"));
        }
        if i > j {
            return Err(parse_err(line_no, "indices not ascending"));
        }
        if i == j {
            if seen_linear[i] {
                return Err(parse_err(line_no, "duplicate coefficient entry"));
            }
            seen_linear[i] = true;
            linear[i] = v;
        } else {
            if quadratic.insert((i, j), v).is_some() {
                return Err(parse_err(line_no, "duplicate coefficient entry"));
            }
        }
    }
    let var_names = (0..n).map(|i| format!("x{i}")).collect();
    Ok(QuboModel::new(n, linear, quadratic, offset, var_names))
}
