//! Walkthroughs run against throwaway stores. Output never includes paths
//! or wall-clock time, so repeated runs are byte-identical.

use chrono::DateTime;
use clap::ValueEnum;
use lagpar::storage::{self, block_line, health_check, Fault, Store, StoreOptions};
use lagpar::{encode, interpolate, IndicatorDef, Point, Rational};
use tempfile::TempDir;

use crate::{join, CliError, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Primary unreachable; recover from parity.
    Failover,
    /// No faults; values come straight from the primary.
    Healthy,
    /// Primary unreachable and one parity block lost: fewer than k blocks.
    BelowThreshold,
}

struct Scratch {
    _dir: TempDir,
    primary: Store,
    secondary: Store,
}

fn scratch() -> Result<Scratch, CliError> {
    let dir = TempDir::new().map_err(CliError::io)?;
    let primary = Store::create(dir.path().join("primary"))?;
    let secondary = Store::create(dir.path().join("secondary"))?;
    Ok(Scratch { _dir: dir, primary, secondary })
}

fn pinned_options(indicators: Vec<IndicatorDef>) -> StoreOptions {
    StoreOptions { created_at: Some(DateTime::UNIX_EPOCH), indicators, ..Default::default() }
}

const CARBON_VALUES: [i64; 4] = [300, 400, 300, 3000];

pub fn carbon(out: &mut Output<'_>) -> Result<(), CliError> {
    let values: Vec<Rational> = CARBON_VALUES.iter().map(|&v| Rational::from(v)).collect();
    let k = values.len();
    let m = k;
    let footprint =
        IndicatorDef::ratio_of_sums("carbon_footprint", vec!["0".into(), "1".into(), "2".into()], vec!["3".into()]);

    out.note("carbon footprint = total scope emissions / total value of investments")?;
    out.note("inputs: company A 300 t, company B 400 t, company C 300 t, total value 3000 EUR")?;
    out.note(&format!("step 1: data points at x=0..{}: {}", k - 1, join(&values)))?;
    let points: Vec<Point> =
        values.iter().enumerate().map(|(i, v)| Point { x: Rational::from(i), y: v.clone() }).collect();
    let poly = interpolate(&points).map_err(lagpar::CodecError::from)?;
    out.note(&format!("step 2: interpolant coefficients, ascending degree: {}", join(poly.coefficients())))?;
    out.note(&format!("step 3: {m} parity blocks sampled at x={}..{}", k, k + m - 1))?;
    for block in encode(&values, m, "carbon")? {
        out.block(&block_line(&block))?;
    }

    let s = scratch()?;
    storage::store_dataset_with(&values, m, "carbon", &s.primary, &s.secondary, &pinned_options(vec![footprint]))?;
    out.note("step 4: originals stored in primary, parity and manifest in secondary")?;

    for index in 0..k as u64 {
        storage::inject_fault(&s.primary, &Fault::DeleteBlock { dataset_id: "carbon".into(), index })?;
    }
    out.note(&format!("step 5: every original block deleted from primary (indices 0..{})", k - 1))?;

    let recovered = storage::recover_dataset("carbon", &s.primary, &s.secondary)?;
    out.note("step 6: rebuilt from parity by Lagrange interpolation and checked against manifest digests")?;
    out.status(&format!("recovered={}", join(&recovered.values)))?;
    out.status(&format!("provenance={}", recovered.provenance.as_str()))?;

    for (def, value) in recovered.indicators()? {
        if def.id() == "carbon_footprint" {
            out.note("step 7: footprint = (300 + 400 + 300) / 3000")?;
            out.status(&format!("footprint={value}"))?;
        }
    }
    Ok(())
}

/// Coefficients `(a, b, c, d)` of `F(t) = a*exp(b*t) + c*sin(d*t)`; these
/// numbers are demo fixtures.
const FORECAST_FIXTURE: [i64; 4] = [1, 2, 3, 4];

pub fn forecast(scenario: Scenario, out: &mut Output<'_>) -> Result<(), CliError> {
    let values: Vec<Rational> = FORECAST_FIXTURE.iter().map(|&v| Rational::from(v)).collect();
    let k = values.len();
    let m = k;

    out.note("forecast model F(t) = a*exp(b*t) + c*sin(d*t)")?;
    out.note(&format!("fixture coefficients (illustrative values): a,b,c,d={}", join(&values)))?;
    let s = scratch()?;
    storage::store_dataset_with(&values, m, "forecast", &s.primary, &s.secondary, &pinned_options(Vec::new()))?;
    out.note(&format!("stored: coefficients in primary, {m} parity blocks in secondary"))?;

    match scenario {
        Scenario::Healthy => {}
        Scenario::Failover => {
            storage::inject_fault(&s.primary, &Fault::Unreachable)?;
        }
        Scenario::BelowThreshold => {
            storage::inject_fault(&s.primary, &Fault::Unreachable)?;
            let index = (k + m - 1) as u64;
            storage::inject_fault(&s.secondary, &Fault::DeleteBlock { dataset_id: "forecast".into(), index })?;
            out.note(&format!("parity block {index} deleted from secondary"))?;
        }
    }

    out.note("step 1: check primary accessibility")?;
    let primary = health_check(&s.primary);
    out.status(&format!("primary_reachable={}", primary.reachable))?;
    if !primary.reachable {
        out.note("step 2: gather parity blocks from secondary")?;
        out.note("step 3: reconstruct coefficients by Lagrange interpolation")?;
    }
    let recovered = storage::recover_dataset("forecast", &s.primary, &s.secondary)?;
    if !primary.reachable {
        out.note("step 4: reconstructed coefficients match manifest digests")?;
    }
    out.status(&format!("recovered={}", join(&recovered.values)))?;
    out.status(&format!("provenance={}", recovered.provenance.as_str()))?;
    Ok(())
}
