//! `lagpar` command-line front end.
//!
//! Exit codes: 0 success, 1 environment failure (I/O, unreachable or locked
//! store), 2 usage or validation error, 3 unrecoverable, 4 ambiguous
//! corruption.

mod demo;
mod exit;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lagpar::storage::{
    self, block_line, parse_indicator_line, parse_timestamp, registry_totals, verify_dataset, Fault, Store,
    StoreOptions,
};
use lagpar::{encode, original_blocks, RangeVerdict, Rational};

pub use exit::{exit_code, CliError};

#[derive(Debug, Parser)]
#[command(name = "lagpar", version, about = "Exact Lagrange parity encoding, storage and recovery")]
pub struct Cli {
    /// Primary store root (originals). Defaults to $LAGPAR_ROOT/primary.
    #[arg(long, global = true)]
    primary: Option<PathBuf>,
    /// Secondary store root (parity). Defaults to $LAGPAR_ROOT/secondary.
    #[arg(long, global = true)]
    secondary: Option<PathBuf>,
    /// Print only block lines on stdout; status lines go to stderr.
    #[arg(long, global = true)]
    machine: bool,
    /// Parent directory for both stores when --primary/--secondary are omitted.
    #[arg(long, env = "LAGPAR_ROOT", global = true)]
    root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the parity blocks for a list of values.
    Encode(DatasetArgs),
    /// Write originals to the primary store and parity to the secondary.
    Store(StoreArgs),
    /// Recover a dataset, reconstructing from parity when needed.
    Recover(IdArgs),
    /// Check every stored block against the manifest and the interpolant.
    Verify(IdArgs),
    /// Report reachability, datasets and corrupt files.
    Health {
        #[arg(long, value_enum, default_value_t = Which::Both)]
        store: Which,
    },
    /// Apply a fault to one store.
    Inject(InjectArgs),
    /// Self-contained walkthroughs in temporary stores.
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Comma-separated values: integers or <num>/<den>.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Number of parity blocks.
    #[arg(long = "m")]
    m: usize,
    #[arg(long)]
    id: String,
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Manifest timestamp (YYYY-MM-DDTHH:MM:SSZ); defaults to now.
    #[arg(long)]
    created: Option<String>,
    /// Indicator definition, e.g. `id=cf kind=ratio_of_sums num=0,1,2 den=3 range=0/1,1/1`.
    #[arg(long)]
    indicator: Vec<String>,
}

#[derive(Debug, Args)]
struct IdArgs {
    #[arg(long)]
    id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Primary,
    Secondary,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultKind {
    Unreachable,
    Delete,
    Flip,
}

#[derive(Debug, Args)]
struct InjectArgs {
    #[arg(long, value_enum)]
    store: Which,
    #[arg(long, value_enum)]
    fault: FaultKind,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    index: Option<u64>,
    #[arg(long)]
    offset: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum DemoCommand {
    /// Carbon footprint: encode, lose every original, recover, compute.
    Carbon,
    /// Forecasting coefficients stored and recovered across a primary failure.
    Forecast {
        #[arg(long, value_enum, default_value_t = demo::Scenario::Failover)]
        scenario: demo::Scenario,
    },
}

/// Routes lines to stdout/stderr according to the output mode.
pub(crate) struct Output<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    machine: bool,
}

impl Output<'_> {
    /// Block lines always go to stdout.
    fn block(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.out, "{line}").map_err(CliError::io)
    }

    /// `key=value` status: stdout for humans, stderr in machine mode.
    fn status(&mut self, line: &str) -> Result<(), CliError> {
        let sink = if self.machine { &mut *self.err } else { &mut *self.out };
        writeln!(sink, "{line}").map_err(CliError::io)
    }

    /// Narrative text, human mode only.
    fn note(&mut self, line: &str) -> Result<(), CliError> {
        if self.machine {
            Ok(())
        } else {
            writeln!(self.out, "{line}").map_err(CliError::io)
        }
    }
}

pub(crate) fn join<T: ToString>(items: &[T]) -> String {
    if items.is_empty() {
        "none".to_owned()
    } else {
        items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Comma-separated rationals; an empty string is an empty list.
pub fn parse_values(raw: &str) -> Result<Vec<Rational>, CliError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|v| v.trim().parse::<Rational>().map_err(|e| CliError::Usage(format!("value `{v}`: {e}"))))
        .collect()
}

/// Resolved store locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliConfig {
    pub primary_root: PathBuf,
    pub secondary_root: PathBuf,
    pub machine: bool,
}

impl Cli {
    fn config(&self) -> Result<CliConfig, CliError> {
        let pick = |explicit: &Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| self.root.as_ref().map(|r| r.join(name)))
                .ok_or_else(|| CliError::Usage(format!("--{name} not given and LAGPAR_ROOT unset")))
        };
        let primary_root = pick(&self.primary, "primary")?;
        let secondary_root = pick(&self.secondary, "secondary")?;
        if primary_root == secondary_root {
            return Err(CliError::Usage("primary and secondary must differ".into()));
        }
        Ok(CliConfig { primary_root, secondary_root, machine: self.machine })
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{rendered}") } else { write!(stdout, "{rendered}") };
            return e.exit_code() as u8;
        }
    };
    let mut out = Output { out: stdout, err: stderr, machine: cli.machine };
    match execute(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(out.err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, out: &mut Output<'_>) -> Result<(), CliError> {
    match &cli.command {
        Command::Encode(args) => cmd_encode(args, out),
        Command::Store(args) => cmd_store(&cli.config()?, args, out),
        Command::Recover(args) => cmd_recover(&cli.config()?, &args.id, out),
        Command::Verify(args) => cmd_verify(&cli.config()?, &args.id, out),
        Command::Health { store } => cmd_health(&cli.config()?, *store, out),
        Command::Inject(args) => cmd_inject(&cli.config()?, args, out),
        Command::Demo(DemoCommand::Carbon) => demo::carbon(out),
        Command::Demo(DemoCommand::Forecast { scenario }) => demo::forecast(*scenario, out),
    }
}

fn stores(config: &CliConfig) -> (Store, Store) {
    (Store::new(&config.primary_root), Store::new(&config.secondary_root))
}

fn cmd_encode(args: &DatasetArgs, out: &mut Output<'_>) -> Result<(), CliError> {
    let values = parse_values(&args.values)?;
    let parity = encode(&values, args.m, &args.id)?;
    out.note(&format!("dataset={} k={} m={}", args.id, values.len(), args.m))?;
    for block in &parity {
        out.block(&block_line(block))?;
    }
    Ok(())
}

fn cmd_store(config: &CliConfig, args: &StoreArgs, out: &mut Output<'_>) -> Result<(), CliError> {
    let values = parse_values(&args.dataset.values)?;
    let created_at: Option<DateTime<Utc>> = match &args.created {
        Some(raw) => Some(parse_timestamp(raw).ok_or_else(|| CliError::Usage(format!("bad --created `{raw}`")))?),
        None => None,
    };
    let indicators = args
        .indicator
        .iter()
        .map(|spec| {
            parse_indicator_line(&format!("indicator {spec}"))
                .map_err(|e| CliError::Usage(format!("--indicator `{spec}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let primary = Store::create(&config.primary_root)?;
    let secondary = Store::create(&config.secondary_root)?;
    let options = StoreOptions { created_at, indicators, ..Default::default() };
    let manifest =
        storage::store_dataset_with(&values, args.dataset.m, &args.dataset.id, &primary, &secondary, &options)?;
    for block in
        original_blocks(&values, &args.dataset.id)?.iter().chain(&encode(&values, args.dataset.m, &args.dataset.id)?)
    {
        out.block(&block_line(block))?;
    }
    out.status(&format!("stored dataset={} k={} m={}", manifest.dataset_id, manifest.k, manifest.m))?;
    Ok(())
}

fn cmd_recover(config: &CliConfig, id: &str, out: &mut Output<'_>) -> Result<(), CliError> {
    let (primary, secondary) = stores(config);
    let recovered = storage::recover_dataset(id, &primary, &secondary)?;
    let blocks = original_blocks(&recovered.values, id)?;
    if out.machine {
        for block in &blocks {
            out.block(&block_line(block))?;
        }
    }
    out.status(&format!("values={}", join(&recovered.values)))?;
    out.status(&format!("provenance={}", recovered.provenance.as_str()))?;
    out.status(&format!("suspects={}", join(&recovered.suspects)))?;
    for (def, value) in recovered.indicators()? {
        let verdict = match lagpar::validate_range(&value, &def) {
            RangeVerdict::Ok => "ok".to_owned(),
            RangeVerdict::Violation { lo, hi, .. } => format!("out_of_range[{lo},{hi}]"),
        };
        out.status(&format!("indicator {}={} {}", def.id(), value, verdict))?;
    }
    Ok(())
}

fn cmd_verify(config: &CliConfig, id: &str, out: &mut Output<'_>) -> Result<(), CliError> {
    let (primary, secondary) = stores(config);
    let report = verify_dataset(id, &primary, &secondary)?;
    out.status(&format!("consistent={}", report.consistent))?;
    out.status(&format!("residuals={}", join(&report.residual_indices)))?;
    out.status(&format!("digest_failures={}", join(&report.digest_failures)))?;
    out.status(&format!("missing={}", join(&report.missing)))?;
    if report.consistent {
        Ok(())
    } else {
        Err(CliError::Inconsistent)
    }
}

fn cmd_health(config: &CliConfig, which: Which, out: &mut Output<'_>) -> Result<(), CliError> {
    let (primary, secondary) = stores(config);
    let targets: Vec<(&str, &Store)> = match which {
        Which::Primary => vec![("primary", &primary)],
        Which::Secondary => vec![("secondary", &secondary)],
        Which::Both => vec![("primary", &primary), ("secondary", &secondary)],
    };
    for (name, store) in targets {
        let status = storage::health_check(store);
        let corrupt: Vec<String> = status.corrupt_files.iter().map(|p| p.display().to_string()).collect();
        let totals = registry_totals(store);
        out.status(&format!(
            "store={name} reachable={} datasets={} corrupt={} data_points={} indicators={}",
            status.reachable,
            join(&status.datasets_present),
            join(&corrupt),
            totals.data_points,
            totals.indicators
        ))?;
    }
    Ok(())
}

fn cmd_inject(config: &CliConfig, args: &InjectArgs, out: &mut Output<'_>) -> Result<(), CliError> {
    let (primary, secondary) = stores(config);
    let store = match args.store {
        Which::Primary => &primary,
        Which::Secondary => &secondary,
        Which::Both => return Err(CliError::Usage("inject targets one store".into())),
    };
    let need = |what: &str| CliError::Usage(format!("--{what} is required for this fault"));
    let fault = match args.fault {
        FaultKind::Unreachable => Fault::Unreachable,
        FaultKind::Delete => Fault::DeleteBlock {
            dataset_id: args.id.clone().ok_or_else(|| need("id"))?,
            index: args.index.ok_or_else(|| need("index"))?,
        },
        FaultKind::Flip => Fault::FlipByte {
            dataset_id: args.id.clone().ok_or_else(|| need("id"))?,
            index: args.index.ok_or_else(|| need("index"))?,
            offset: args.offset.ok_or_else(|| need("offset"))?,
        },
    };
    storage::inject_fault(store, &fault)?;
    out.status(&format!("injected fault={:?}", args.fault).to_lowercase())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("lagpar").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn values_grammar() {
        assert_eq!(parse_values("").unwrap(), vec![]);
        assert_eq!(
            parse_values("7, -1/2,4/2").unwrap(),
            vec![Rational::from(7), Rational::new(-1, 2), Rational::from(2)]
        );
        assert!(parse_values("1,,2").is_err());
        assert!(parse_values("1/0").is_err());
    }

    #[test]
    fn encode_constant() {
        let (code, out, _) = run_capture(&["--machine", "encode", "--values", "7", "--m", "2", "--id", "d1"]);
        assert_eq!(code, 0);
        assert_eq!(out, "block index=1 role=parity value=7/1\nblock index=2 role=parity value=7/1\n");
    }

    #[test]
    fn encode_empty_is_usage_error() {
        let (code, out, err) = run_capture(&["encode", "--values", "", "--m", "1", "--id", "d3"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("no values"), "{err}");
    }

    #[test]
    fn missing_roots_are_usage_errors() {
        let (code, _, err) = run_capture(&["--primary", "/tmp/x", "recover", "--id", "a"]);
        if std::env::var_os("LAGPAR_ROOT").is_none() {
            assert_eq!(code, 2, "{err}");
        }
        let (code, _, _) = run_capture(&["--primary", "/tmp/x", "--secondary", "/tmp/x", "recover", "--id", "a"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn clap_errors_exit_2() {
        assert_eq!(run_capture(&["encode", "--m", "1"]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }
}
