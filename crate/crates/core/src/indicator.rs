//! Indicators: named aggregations over data points.
//!
//! An indicator sums the values of its configured data points, or divides
//! one such sum by another (the carbon footprint is total emissions over
//! total invested value). Data points are referred to by opaque string keys.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndicatorError {
    #[error("indicator `{indicator}` references missing input `{input}`")]
    MissingInput { indicator: String, input: String },
    #[error("indicator `{0}` has a zero denominator")]
    ZeroDenominator(String),
    #[error("sum indicator `{0}` must not have denominator inputs")]
    DenominatorOnSum(String),
    #[error("indicator `{id}` range is inverted: {lo} > {hi}")]
    InvertedRange { id: String, lo: String, hi: String },
    #[error("unknown indicator kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndicatorKind {
    Sum,
    RatioOfSums,
}

impl IndicatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorKind::Sum => "sum",
            IndicatorKind::RatioOfSums => "ratio_of_sums",
        }
    }
}

impl fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndicatorKind {
    type Err = IndicatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(IndicatorKind::Sum),
            "ratio_of_sums" => Ok(IndicatorKind::RatioOfSums),
            other => Err(IndicatorError::UnknownKind(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorDef {
    id: String,
    kind: IndicatorKind,
    numerator_inputs: Vec<String>,
    denominator_inputs: Vec<String>,
    valid_range: Option<(Rational, Rational)>,
}

impl IndicatorDef {
    pub fn sum(id: impl Into<String>, inputs: Vec<String>) -> Self {
        IndicatorDef {
            id: id.into(),
            kind: IndicatorKind::Sum,
            numerator_inputs: inputs,
            denominator_inputs: Vec::new(),
            valid_range: None,
        }
    }

    pub fn ratio_of_sums(id: impl Into<String>, numerator: Vec<String>, denominator: Vec<String>) -> Self {
        IndicatorDef {
            id: id.into(),
            kind: IndicatorKind::RatioOfSums,
            numerator_inputs: numerator,
            denominator_inputs: denominator,
            valid_range: None,
        }
    }

    /// General constructor enforcing the kind and range invariants.
    pub fn new(
        id: impl Into<String>,
        kind: IndicatorKind,
        numerator_inputs: Vec<String>,
        denominator_inputs: Vec<String>,
        valid_range: Option<(Rational, Rational)>,
    ) -> Result<Self, IndicatorError> {
        let id = id.into();
        if kind == IndicatorKind::Sum && !denominator_inputs.is_empty() {
            return Err(IndicatorError::DenominatorOnSum(id));
        }
        let def = IndicatorDef { id, kind, numerator_inputs, denominator_inputs, valid_range: None };
        match valid_range {
            Some((lo, hi)) => def.with_range(lo, hi),
            None => Ok(def),
        }
    }

    pub fn with_range(mut self, lo: Rational, hi: Rational) -> Result<Self, IndicatorError> {
        if lo > hi {
            return Err(IndicatorError::InvertedRange { id: self.id, lo: lo.to_string(), hi: hi.to_string() });
        }
        self.valid_range = Some((lo, hi));
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> IndicatorKind {
        self.kind
    }

    pub fn numerator_inputs(&self) -> &[String] {
        &self.numerator_inputs
    }

    pub fn denominator_inputs(&self) -> &[String] {
        &self.denominator_inputs
    }

    pub fn valid_range(&self) -> Option<&(Rational, Rational)> {
        self.valid_range.as_ref()
    }
}

fn sum_inputs(
    def: &IndicatorDef,
    inputs: &[String],
    values: &HashMap<String, Rational>,
) -> Result<Rational, IndicatorError> {
    inputs
        .iter()
        .map(|key| {
            values
                .get(key)
                .ok_or_else(|| IndicatorError::MissingInput { indicator: def.id.clone(), input: key.clone() })
        })
        .collect::<Result<Vec<&Rational>, _>>()
        .map(|vs| vs.into_iter().sum())
}

pub fn compute_indicator(def: &IndicatorDef, values: &HashMap<String, Rational>) -> Result<Rational, IndicatorError> {
    let numerator = sum_inputs(def, &def.numerator_inputs, values)?;
    match def.kind {
        IndicatorKind::Sum => Ok(numerator),
        IndicatorKind::RatioOfSums => {
            let denominator = sum_inputs(def, &def.denominator_inputs, values)?;
            numerator.checked_div(&denominator).ok_or_else(|| IndicatorError::ZeroDenominator(def.id.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RangeVerdict {
    Ok,
    Violation { value: Rational, lo: Rational, hi: Rational },
}

impl RangeVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, RangeVerdict::Ok)
    }
}

/// Closed-interval check; an indicator without a range accepts everything.
pub fn validate_range(value: &Rational, def: &IndicatorDef) -> RangeVerdict {
    match &def.valid_range {
        Some((lo, hi)) if value < lo || value > hi => {
            RangeVerdict::Violation { value: value.clone(), lo: lo.clone(), hi: hi.clone() }
        }
        _ => RangeVerdict::Ok,
    }
}
