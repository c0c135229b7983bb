//! Text encodings for block files (`PLYD1`) and manifests (`PLYM1`).
//!
//! Both formats are UTF-8 with LF line endings and are parsed strictly: any
//! byte that would not be produced by the encoder is a format error.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDateTime, Utc};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::indicator::{IndicatorDef, IndicatorKind};
use crate::parity::{CodedBlock, Role};
use crate::rational::Rational;

pub const BLOCK_MAGIC: &str = "PLYD1";
pub const MANIFEST_MAGIC: &str = "PLYM1";
pub const MANIFEST_FILE: &str = "manifest.plym";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: expected `{expected}`")]
    Expected { line: usize, expected: &'static str },
    #[error("line {line}: bad field `{field}`")]
    BadField { line: usize, field: String },
    #[error("role {role} does not match index {index} with k={k}")]
    RoleMismatch { index: u64, role: String, k: usize },
    #[error("file is not valid UTF-8")]
    NotUtf8,
    #[error("manifest digests must cover indices 0..{expected}, found {found:?}")]
    DigestCoverage { expected: usize, found: Vec<u64> },
    #[error("invalid dataset id `{0}`")]
    InvalidId(String),
    #[error("line {line}: {message}")]
    Indicator { line: usize, message: String },
}

/// `[A-Za-z0-9_-]{1,64}`.
pub fn is_valid_dataset_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let t = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).ok()?.and_utc();
    (format_timestamp(&t) == s).then_some(t)
}

/// `block index=<int> role=<original|parity> value=<num>/<den>`
pub fn block_line(block: &CodedBlock) -> String {
    format!("block index={} role={} value={}", block.index(), block.role(), block.value())
}

/// Parses a block line into `(index, role, value)`.
pub fn parse_block_line(line: &str) -> Result<(u64, Role, Rational), FormatError> {
    parse_block_line_at(line, 1)
}

fn parse_block_line_at(line: &str, line_no: usize) -> Result<(u64, Role, Rational), FormatError> {
    let mut fields = Fields::new(line, line_no, "block")?;
    let index = fields.uint("index")?;
    let role = match fields.value("role")? {
        "original" => Role::Original,
        "parity" => Role::Parity,
        other => return Err(FormatError::BadField { line: line_no, field: other.to_owned() }),
    };
    let raw = fields.value("value")?;
    let value =
        Rational::parse_canonical(raw).map_err(|_| FormatError::BadField { line: line_no, field: raw.to_owned() })?;
    fields.finish()?;
    Ok((index, role, value))
}

/// Bytes of `block_<index>.plyd` for `block` in a dataset with `m` parity blocks.
pub fn encode_block_file(block: &CodedBlock, m: usize) -> String {
    format!("{BLOCK_MAGIC}\ndataset={} k={} m={}\n{}\n", block.dataset_id(), block.k(), m, block_line(block))
}

/// Parses a block file into the block and the dataset's `m`.
pub fn parse_block_file(bytes: &[u8]) -> Result<(CodedBlock, usize), FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|_| FormatError::NotUtf8)?;
    let lines = split_lines(text)?;
    if lines.len() != 3 || lines[0] != BLOCK_MAGIC {
        return Err(FormatError::Expected { line: 1, expected: BLOCK_MAGIC });
    }
    let (dataset_id, k, m) = parse_dataset_line(lines[1], 2)?;
    let (index, role, value) = parse_block_line_at(lines[2], 3)?;
    if role != Role::for_index(index, k) {
        return Err(FormatError::RoleMismatch { index, role: role.to_string(), k });
    }
    let block = CodedBlock::new(dataset_id, k, index, value)
        .map_err(|_| FormatError::BadField { line: 2, field: "k=0".into() })?;
    Ok((block, m))
}

fn split_lines(text: &str) -> Result<Vec<&str>, FormatError> {
    let body = text.strip_suffix('\n').ok_or(FormatError::Expected { line: 0, expected: "trailing LF" })?;
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.iter().any(|l| l.contains('\r')) {
        return Err(FormatError::Expected { line: 0, expected: "LF line endings" });
    }
    Ok(lines)
}

fn parse_dataset_line(line: &str, line_no: usize) -> Result<(String, usize, usize), FormatError> {
    let mut fields = Fields::bare(line, line_no);
    let id = fields.value("dataset")?.to_owned();
    if !is_valid_dataset_id(&id) {
        return Err(FormatError::InvalidId(id));
    }
    let k = fields.uint("k")? as usize;
    let m = fields.uint("m")? as usize;
    fields.finish()?;
    if k == 0 {
        return Err(FormatError::BadField { line: line_no, field: "k=0".into() });
    }
    Ok((id, k, m))
}

/// Space-separated `key=value` fields in a fixed order.
struct Fields<'a> {
    parts: std::str::Split<'a, char>,
    line: usize,
}

impl<'a> Fields<'a> {
    fn bare(line: &'a str, line_no: usize) -> Self {
        Fields { parts: line.split(' '), line: line_no }
    }

    fn new(line: &'a str, line_no: usize, keyword: &'static str) -> Result<Self, FormatError> {
        let mut f = Fields::bare(line, line_no);
        if f.parts.next() != Some(keyword) {
            return Err(FormatError::Expected { line: line_no, expected: keyword });
        }
        Ok(f)
    }

    fn value(&mut self, key: &'static str) -> Result<&'a str, FormatError> {
        let part = self.parts.next().ok_or(FormatError::Expected { line: self.line, expected: key })?;
        match part.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(FormatError::BadField { line: self.line, field: part.to_owned() }),
        }
    }

    fn uint(&mut self, key: &'static str) -> Result<u64, FormatError> {
        let raw = self.value(key)?;
        let canonical =
            !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) && (raw == "0" || !raw.starts_with('0'));
        raw.parse::<u64>()
            .ok()
            .filter(|_| canonical)
            .ok_or_else(|| FormatError::BadField { line: self.line, field: raw.to_owned() })
    }

    fn finish(mut self) -> Result<(), FormatError> {
        match self.parts.next() {
            None => Ok(()),
            Some(extra) => Err(FormatError::BadField { line: self.line, field: extra.to_owned() }),
        }
    }
}

/// Per-dataset integrity record, replicated to both stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub k: usize,
    pub m: usize,
    /// Index to lowercase hex SHA-256 of the block file bytes; covers `0..k+m`.
    pub block_digests: BTreeMap<u64, String>,
    pub created_at: DateTime<Utc>,
    pub indicators: Vec<IndicatorDef>,
}

impl DatasetManifest {
    pub fn total_blocks(&self) -> usize {
        self.k + self.m
    }

    pub fn digest(&self, index: u64) -> Option<&str> {
        self.block_digests.get(&index).map(String::as_str)
    }

    pub fn encode(&self) -> String {
        let mut out = format!("{MANIFEST_MAGIC}\ndataset={} k={} m={}\n", self.dataset_id, self.k, self.m);
        for (index, digest) in &self.block_digests {
            out.push_str(&format!("digest index={index} sha256={digest}\n"));
        }
        for def in &self.indicators {
            out.push_str(&indicator_line(def));
            out.push('\n');
        }
        out.push_str(&format!("created={}\n", format_timestamp(&self.created_at)));
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, FormatError> {
        let text = std::str::from_utf8(bytes).map_err(|_| FormatError::NotUtf8)?;
        let lines = split_lines(text)?;
        if lines.len() < 3 || lines[0] != MANIFEST_MAGIC {
            return Err(FormatError::Expected { line: 1, expected: MANIFEST_MAGIC });
        }
        let (dataset_id, k, m) = parse_dataset_line(lines[1], 2)?;

        let footer_no = lines.len();
        let created_at = lines[footer_no - 1]
            .strip_prefix("created=")
            .and_then(parse_timestamp)
            .ok_or(FormatError::Expected { line: footer_no, expected: "created=<ISO-8601>" })?;

        let mut block_digests = BTreeMap::new();
        let mut indicators = Vec::new();
        for (offset, line) in lines[2..footer_no - 1].iter().enumerate() {
            let line_no = offset + 3;
            if line.starts_with("digest ") {
                if !indicators.is_empty() {
                    return Err(FormatError::Expected { line: line_no, expected: "indicator" });
                }
                let mut fields = Fields::new(line, line_no, "digest")?;
                let index = fields.uint("index")?;
                let digest = fields.value("sha256")?;
                fields.finish()?;
                let well_formed = digest.len() == 64 && digest.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
                let expected_index = block_digests.len() as u64;
                if !well_formed || index != expected_index {
                    return Err(FormatError::BadField { line: line_no, field: line.to_string() });
                }
                block_digests.insert(index, digest.to_owned());
            } else {
                indicators.push(parse_indicator_line_at(line, line_no)?);
            }
        }
        if block_digests.len() != k + m {
            return Err(FormatError::DigestCoverage {
                expected: k + m,
                found: block_digests.keys().copied().collect(),
            });
        }
        Ok(DatasetManifest { dataset_id, k, m, block_digests, created_at, indicators })
    }
}

/// `indicator id=<id> kind=<sum|ratio_of_sums> num=<a,b> den=<c> range=<lo>,<hi>|none`
pub fn indicator_line(def: &IndicatorDef) -> String {
    let range = match def.valid_range() {
        Some((lo, hi)) => format!("{lo},{hi}"),
        None => "none".to_owned(),
    };
    format!(
        "indicator id={} kind={} num={} den={} range={}",
        def.id(),
        def.kind(),
        def.numerator_inputs().join(","),
        def.denominator_inputs().join(","),
        range
    )
}

/// Inverse of [`indicator_line`].
pub fn parse_indicator_line(line: &str) -> Result<IndicatorDef, FormatError> {
    parse_indicator_line_at(line, 1)
}

/// Ids and input references share the dataset id alphabet.
pub fn check_indicator_tokens(def: &IndicatorDef) -> Result<(), String> {
    std::iter::once(def.id())
        .chain(def.numerator_inputs().iter().map(String::as_str))
        .chain(def.denominator_inputs().iter().map(String::as_str))
        .find(|t| !is_valid_dataset_id(t))
        .map_or(Ok(()), |bad| Err(format!("invalid indicator token `{bad}`")))
}

fn parse_indicator_line_at(line: &str, line_no: usize) -> Result<IndicatorDef, FormatError> {
    let err = |message: String| FormatError::Indicator { line: line_no, message };
    let mut fields = Fields::new(line, line_no, "indicator")?;
    let id = fields.value("id")?;
    let kind: IndicatorKind = fields.value("kind")?.parse().map_err(|e| err(format!("{e}")))?;
    let list = |raw: &str| -> Vec<String> {
        if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',').map(str::to_owned).collect()
        }
    };
    let num = list(fields.value("num")?);
    let den = list(fields.value("den")?);
    let range = match fields.value("range")? {
        "none" => None,
        raw => {
            let (lo, hi) = raw.split_once(',').ok_or_else(|| err(format!("bad range `{raw}`")))?;
            let parse = |s: &str| Rational::parse_canonical(s).map_err(|e| err(e.to_string()));
            Some((parse(lo)?, parse(hi)?))
        }
    };
    fields.finish()?;
    let def = IndicatorDef::new(id, kind, num, den, range).map_err(|e| err(e.to_string()))?;
    check_indicator_tokens(&def).map_err(err)?;
    if indicator_line(&def) != line {
        return Err(err("indicator line is not in canonical form".into()));
    }
    Ok(def)
}
