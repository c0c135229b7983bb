//! Parity encoding and recovery over the canonical abscissae.
//!
//! Original value `i` lives at `x = i` for `0 <= i < k`; parity block `j`
//! lives at `x = k + j`. A block's index therefore doubles as its
//! x-coordinate, and `k` distinct blocks pin down the degree `<= k - 1`
//! interpolant and with it every original value.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::poly::{evaluate, interpolate, Point, PolyError, Polynomial};
use crate::rational::Rational;

/// Sanity limit on `m` applied by [`encode`]; see [`encode_with_limit`].
pub const DEFAULT_MAX_PARITY: usize = 1024;

/// Exhaustive corruption search is limited to this many blocks.
pub const MAX_LOCATE_BLOCKS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("no values to encode")]
    EmptyValues,
    #[error("threshold k must be at least 1")]
    ZeroThreshold,
    #[error("parity count {m} exceeds limit {limit}")]
    TooManyParity { m: usize, limit: usize },
    #[error("need at least {k} blocks, got {got}")]
    InsufficientBlocks { k: usize, got: usize },
    #[error("blocks from different datasets or thresholds ({0} vs {1})")]
    MixedDataset(String, String),
    #[error("duplicate block index {0}")]
    DuplicateIndex(u64),
    #[error("blocks do not lie on one polynomial of degree < {k}; residual indices {residuals:?}")]
    Inconsistent { k: usize, residuals: Vec<u64> },
    #[error("corruption location needs more than k={k} blocks, got {got}")]
    InsufficientRedundancy { k: usize, got: usize },
    #[error("{candidates} candidate polynomials each agree with {agreement} blocks")]
    Ambiguous { agreement: usize, candidates: usize },
    #[error("exhaustive search limited to {limit} blocks, got {got}")]
    TooManyBlocks { got: usize, limit: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Original,
    Parity,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Original => "original",
            Role::Parity => "parity",
        }
    }

    pub fn for_index(index: u64, k: usize) -> Role {
        if index < k as u64 {
            Role::Original
        } else {
            Role::Parity
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sample `(index, value)` of a dataset's interpolant. The role is
/// derived from `index` and `k`, so it can never disagree with them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodedBlock {
    index: u64,
    value: Rational,
    role: Role,
    k: usize,
    dataset_id: String,
}

impl CodedBlock {
    pub fn new(dataset_id: impl Into<String>, k: usize, index: u64, value: Rational) -> Result<Self, CodecError> {
        if k == 0 {
            return Err(CodecError::ZeroThreshold);
        }
        Ok(CodedBlock { index, value, role: Role::for_index(index, k), k, dataset_id: dataset_id.into() })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn with_value(mut self, value: Rational) -> Self {
        self.value = value;
        self
    }

    pub fn x(&self) -> Rational {
        Rational::from(self.index)
    }

    fn point(&self) -> Point {
        Point { x: self.x(), y: self.value.clone() }
    }
}

/// A collection of distinct-index blocks from one dataset, sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoverySet {
    blocks: Vec<CodedBlock>,
    k: usize,
}

impl RecoverySet {
    pub fn new(mut blocks: Vec<CodedBlock>, k: usize) -> Result<Self, CodecError> {
        if k == 0 {
            return Err(CodecError::ZeroThreshold);
        }
        if let Some(first) = blocks.first() {
            for b in &blocks {
                if b.dataset_id != first.dataset_id || b.k != first.k {
                    return Err(CodecError::MixedDataset(
                        format!("{}/k={}", first.dataset_id, first.k),
                        format!("{}/k={}", b.dataset_id, b.k),
                    ));
                }
            }
            if first.k != k {
                return Err(CodecError::MixedDataset(
                    format!("{}/k={}", first.dataset_id, first.k),
                    format!("set/k={k}"),
                ));
            }
        }
        let mut seen = HashSet::new();
        for b in &blocks {
            if !seen.insert(b.index) {
                return Err(CodecError::DuplicateIndex(b.index));
            }
        }
        blocks.sort_by_key(|b| b.index);
        Ok(RecoverySet { blocks, k })
    }

    pub fn blocks(&self) -> &[CodedBlock] {
        &self.blocks
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn require_threshold(&self) -> Result<(), CodecError> {
        if self.blocks.len() < self.k {
            Err(CodecError::InsufficientBlocks { k: self.k, got: self.blocks.len() })
        } else {
            Ok(())
        }
    }

    /// Interpolant through the `k` lowest-index blocks.
    fn base_polynomial(&self) -> Result<Polynomial, CodecError> {
        let points: Vec<Point> = self.blocks[..self.k].iter().map(CodedBlock::point).collect();
        Ok(interpolate(&points)?)
    }
}

fn originals_of(p: &Polynomial, k: usize) -> Vec<Rational> {
    (0..k).map(|i| evaluate(p, &Rational::from(i))).collect()
}

/// Interpolates `values` at `x = 0..k-1` and samples `m` parity blocks at
/// `x = k..k+m-1`.
pub fn encode(values: &[Rational], m: usize, dataset_id: &str) -> Result<Vec<CodedBlock>, CodecError> {
    encode_with_limit(values, m, dataset_id, DEFAULT_MAX_PARITY)
}

pub fn encode_with_limit(
    values: &[Rational],
    m: usize,
    dataset_id: &str,
    max_parity: usize,
) -> Result<Vec<CodedBlock>, CodecError> {
    if values.is_empty() {
        return Err(CodecError::EmptyValues);
    }
    if m > max_parity {
        return Err(CodecError::TooManyParity { m, limit: max_parity });
    }
    let k = values.len();
    let points: Vec<Point> =
        values.iter().enumerate().map(|(i, v)| Point { x: Rational::from(i), y: v.clone() }).collect();
    let p = interpolate(&points)?;
    (k..k + m).map(|x| CodedBlock::new(dataset_id, k, x as u64, evaluate(&p, &Rational::from(x)))).collect()
}

/// The `k` original blocks for `values`, indices `0..k-1`.
pub fn original_blocks(values: &[Rational], dataset_id: &str) -> Result<Vec<CodedBlock>, CodecError> {
    if values.is_empty() {
        return Err(CodecError::EmptyValues);
    }
    let k = values.len();
    values.iter().enumerate().map(|(i, v)| CodedBlock::new(dataset_id, k, i as u64, v.clone())).collect()
}

/// Reconstructs the `k` originals from the `k` lowest-index blocks. Any
/// surplus block must agree with that interpolant, otherwise
/// [`CodecError::Inconsistent`] is returned and the caller should fall back
/// to [`locate_corruption`].
pub fn recover(set: &RecoverySet) -> Result<Vec<Rational>, CodecError> {
    set.require_threshold()?;
    let p = set.base_polynomial()?;
    let residuals = residuals(&p, &set.blocks[set.k..]);
    if !residuals.is_empty() {
        return Err(CodecError::Inconsistent { k: set.k, residuals });
    }
    Ok(originals_of(&p, set.k))
}

fn residuals(p: &Polynomial, blocks: &[CodedBlock]) -> Vec<u64> {
    blocks.iter().filter(|b| evaluate(p, &b.x()) != b.value).map(|b| b.index).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub residual_indices: Vec<u64>,
}

/// Checks every block against the interpolant of the `k` lowest-index
/// blocks. Those `k` blocks can never be residuals themselves.
pub fn verify(set: &RecoverySet) -> Result<ConsistencyReport, CodecError> {
    set.require_threshold()?;
    let p = set.base_polynomial()?;
    let residual_indices = residuals(&p, &set.blocks[set.k..]);
    Ok(ConsistencyReport { consistent: residual_indices.is_empty(), residual_indices })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub recovered: Vec<Rational>,
    /// Indices of blocks that disagree with the winning polynomial, ascending.
    pub suspects: Vec<u64>,
}

/// Maximum-agreement decoding by exhaustive search over `k`-subsets.
///
/// The winning polynomial is the one agreeing with the most blocks; a tie
/// between distinct polynomials is reported as [`CodecError::Ambiguous`].
/// With `e` corrupted blocks the answer is unique and correct whenever
/// `n >= k + 2e`.
pub fn locate_corruption(set: &RecoverySet) -> Result<Correction, CodecError> {
    let n = set.blocks.len();
    let k = set.k;
    if n <= k {
        return Err(CodecError::InsufficientRedundancy { k, got: n });
    }
    if n > MAX_LOCATE_BLOCKS {
        return Err(CodecError::TooManyBlocks { got: n, limit: MAX_LOCATE_BLOCKS });
    }

    let points: Vec<Point> = set.blocks.iter().map(CodedBlock::point).collect();
    // (polynomial, agreement mask)
    let mut candidates: Vec<(Polynomial, u32)> = Vec::new();

    for subset in KSubsets::new(n, k) {
        let mask = subset.iter().fold(0u32, |m, &i| m | (1 << i));
        // Any subset inside an already-found agreement set yields that same
        // polynomial again.
        if candidates.iter().any(|(_, agree)| agree & mask == mask) {
            continue;
        }
        let chosen: Vec<Point> = subset.iter().map(|&i| points[i].clone()).collect();
        let p = interpolate(&chosen)?;
        let agree = points
            .iter()
            .enumerate()
            .filter(|(_, pt)| evaluate(&p, &pt.x) == pt.y)
            .fold(0u32, |m, (i, _)| m | (1 << i));
        candidates.push((p, agree));
    }

    let best = candidates.iter().map(|(_, a)| a.count_ones()).max().unwrap_or(0) as usize;
    let winners: Vec<&(Polynomial, u32)> = candidates.iter().filter(|(_, a)| a.count_ones() as usize == best).collect();
    if winners.len() > 1 {
        return Err(CodecError::Ambiguous { agreement: best, candidates: winners.len() });
    }
    let (p, agree) = winners[0];
    let suspects = set.blocks.iter().enumerate().filter(|(i, _)| agree & (1 << i) == 0).map(|(_, b)| b.index).collect();
    Ok(Correction { recovered: originals_of(p, k), suspects })
}

/// Lexicographic `k`-combinations of `0..n`.
struct KSubsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl KSubsets {
    fn new(n: usize, k: usize) -> Self {
        KSubsets { n, current: (k <= n).then(|| (0..k).collect()) }
    }
}

impl Iterator for KSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
