//! Directory-backed primary and secondary stores.
//!
//! Layout of a store rooted at `<root>`:
//!
//! ```text
//! <root>/<dataset_id>/block_<index>.plyd
//! <root>/<dataset_id>/manifest.plym
//! <root>/.unreachable        fault flag, see [`inject_fault`]
//! <root>/.lock               advisory single-writer lock
//! ```
//!
//! Originals (`index < k`) go to the primary store, parity blocks to the
//! secondary store, and the manifest to both. Every file is written to a
//! temporary name and renamed into place, and manifests are written only
//! after every block, so a manifest never references a block that is not
//! fully on disk.

mod format;

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SubsecRound, Utc};
use thiserror::Error;

pub use format::{
    block_line, encode_block_file, format_timestamp, indicator_line, is_valid_dataset_id, parse_block_file,
    parse_block_line, parse_indicator_line, parse_timestamp, sha256_hex, DatasetManifest, FormatError, BLOCK_MAGIC,
    MANIFEST_FILE, MANIFEST_MAGIC,
};

use crate::indicator::{compute_indicator, IndicatorDef, IndicatorError};
use crate::parity::{
    self, encode_with_limit, locate_corruption, original_blocks, CodecError, CodedBlock, RecoverySet,
    DEFAULT_MAX_PARITY,
};
use crate::rational::Rational;

const UNREACHABLE_FLAG: &str = ".unreachable";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("invalid dataset id `{0}`")]
    InvalidDatasetId(String),
    #[error("dataset `{0}` already exists")]
    DuplicateDataset(String),
    #[error("primary and secondary must be different stores ({0})")]
    SameStore(PathBuf),
    #[error("store {0} is unreachable")]
    Unreachable(PathBuf),
    #[error("store {0} does not exist")]
    StoreMissing(PathBuf),
    #[error("store {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("cannot write {path}: {source}")]
    Unwritable { path: PathBuf, source: io::Error },
    #[error("no readable manifest for dataset `{0}`")]
    ManifestMissing(String),
    #[error("dataset `{id}` needs {k} valid blocks, found {valid}")]
    Unrecoverable { id: String, k: usize, valid: usize },
    #[error("recovered values fail manifest validation at indices {suspects:?}")]
    ValidationFailed { suspects: Vec<u64> },
    #[error("dataset `{0}` not found")]
    UnknownDataset(String),
    #[error("block {index} of dataset `{id}` not found")]
    UnknownBlock { id: String, index: u64 },
    #[error("offset {offset} beyond block file of {len} bytes")]
    OffsetOutOfRange { offset: usize, len: usize },
    #[error("invalid indicator: {0}")]
    InvalidIndicator(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error("simulated crash after {0} write steps")]
    Crashed(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| StorageError::Io { path: path.to_owned(), source }
}

/// Handle on one store directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    /// Creates the root directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let store = Store::new(root);
        fs::create_dir_all(&store.root).map_err(io_err(&store.root))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self, dataset_id: &str) -> PathBuf {
        self.root.join(dataset_id)
    }

    pub fn block_path(&self, dataset_id: &str, index: u64) -> PathBuf {
        self.dataset_dir(dataset_id).join(format!("block_{index}.plyd"))
    }

    pub fn manifest_path(&self, dataset_id: &str) -> PathBuf {
        self.dataset_dir(dataset_id).join(MANIFEST_FILE)
    }

    /// Root present and no fault flag set.
    pub fn is_reachable(&self) -> bool {
        self.root.is_dir() && !self.root.join(UNREACHABLE_FLAG).exists()
    }

    fn read_manifest(&self, dataset_id: &str) -> Option<DatasetManifest> {
        let bytes = fs::read(self.manifest_path(dataset_id)).ok()?;
        DatasetManifest::parse(&bytes).ok().filter(|m| m.dataset_id == dataset_id)
    }

    /// Dataset directories that carry a manifest file, sorted.
    pub fn list_datasets(&self) -> Vec<String> {
        let Ok(entries) = fs::read_dir(&self.root) else {
            return Vec::new();
        };
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| is_valid_dataset_id(id) && self.manifest_path(id).is_file())
            .collect();
        ids.sort();
        ids
    }

    fn lock(&self) -> Result<StoreLock, StorageError> {
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(StoreLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StorageError::Locked(self.root.clone())),
            Err(source) => Err(StorageError::Unwritable { path, source }),
        }
    }
}

struct StoreLock {
    path: PathBuf,
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Knobs for [`store_dataset_with`].
#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// Defaults to now, truncated to whole seconds.
    pub created_at: Option<DateTime<Utc>>,
    /// Indicator definitions recorded in the manifest. Inputs must name
    /// original block indices (`"0"`, `"1"`, ...).
    pub indicators: Vec<IndicatorDef>,
    pub max_parity: usize,
    /// Test hook: abort after this many filesystem steps (each temp write
    /// and each rename counts as one), leaving whatever was written.
    pub abort_after_steps: Option<usize>,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            created_at: None,
            indicators: Vec::new(),
            max_parity: DEFAULT_MAX_PARITY,
            abort_after_steps: None,
        }
    }
}

struct StepWriter {
    done: usize,
    abort_after: Option<usize>,
}

impl StepWriter {
    fn step(&mut self) -> Result<(), StorageError> {
        if self.abort_after == Some(self.done) {
            return Err(StorageError::Crashed(self.done));
        }
        self.done += 1;
        Ok(())
    }

    fn write_atomic(&mut self, path: &Path, contents: &[u8]) -> Result<(), StorageError> {
        let unwritable = |source| StorageError::Unwritable { path: path.to_owned(), source };
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        self.step()?;
        let mut f = File::create(&tmp).map_err(unwritable)?;
        f.write_all(contents).map_err(unwritable)?;
        f.sync_all().map_err(unwritable)?;
        drop(f);
        self.step()?;
        fs::rename(&tmp, path).map_err(unwritable)
    }
}

fn require_id(dataset_id: &str) -> Result<(), StorageError> {
    if is_valid_dataset_id(dataset_id) {
        Ok(())
    } else {
        Err(StorageError::InvalidDatasetId(dataset_id.to_owned()))
    }
}

fn same_location(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

/// Encodes `values`, writes originals to `primary`, parity to `secondary`
/// and the manifest to both.
pub fn store_dataset(
    values: &[Rational],
    m: usize,
    dataset_id: &str,
    primary: &Store,
    secondary: &Store,
) -> Result<DatasetManifest, StorageError> {
    store_dataset_with(values, m, dataset_id, primary, secondary, &StoreOptions::default())
}

pub fn store_dataset_with(
    values: &[Rational],
    m: usize,
    dataset_id: &str,
    primary: &Store,
    secondary: &Store,
    options: &StoreOptions,
) -> Result<DatasetManifest, StorageError> {
    require_id(dataset_id)?;
    for store in [primary, secondary] {
        if !store.is_reachable() {
            return Err(StorageError::Unreachable(store.root.clone()));
        }
    }
    if same_location(&primary.root, &secondary.root) {
        return Err(StorageError::SameStore(primary.root.clone()));
    }

    let originals = original_blocks(values, dataset_id)?;
    let parity = encode_with_limit(values, m, dataset_id, options.max_parity)?;
    let k = originals.len();
    for def in &options.indicators {
        format::check_indicator_tokens(def).map_err(StorageError::InvalidIndicator)?;
        let refs = def.numerator_inputs().iter().chain(def.denominator_inputs());
        for r in refs {
            if !r.parse::<usize>().is_ok_and(|i| i < k) {
                return Err(StorageError::InvalidIndicator(format!(
                    "`{}` input `{r}` is not an original index below {k}",
                    def.id()
                )));
            }
        }
    }

    let _primary_lock = primary.lock()?;
    let _secondary_lock = secondary.lock()?;
    for store in [primary, secondary] {
        if store.dataset_dir(dataset_id).exists() {
            return Err(StorageError::DuplicateDataset(dataset_id.to_owned()));
        }
    }

    let files: Vec<(&CodedBlock, String)> =
        originals.iter().chain(&parity).map(|b| (b, encode_block_file(b, m))).collect();
    let manifest = DatasetManifest {
        dataset_id: dataset_id.to_owned(),
        k,
        m,
        block_digests: files.iter().map(|(b, text)| (b.index(), sha256_hex(text.as_bytes()))).collect(),
        created_at: options.created_at.unwrap_or_else(Utc::now).trunc_subsecs(0),
        indicators: options.indicators.clone(),
    };
    let manifest_text = manifest.encode();

    let mut writer = StepWriter { done: 0, abort_after: options.abort_after_steps };
    for store in [primary, secondary] {
        let dir = store.dataset_dir(dataset_id);
        writer.step()?;
        fs::create_dir(&dir).map_err(|source| StorageError::Unwritable { path: dir, source })?;
    }
    for (block, text) in &files {
        let store = if (block.index() as usize) < k { primary } else { secondary };
        writer.write_atomic(&store.block_path(dataset_id, block.index()), text.as_bytes())?;
    }
    for store in [primary, secondary] {
        writer.write_atomic(&store.manifest_path(dataset_id), manifest_text.as_bytes())?;
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreStatus {
    pub reachable: bool,
    pub datasets_present: Vec<String>,
    /// Block files whose digest disagrees with the store's manifest, plus
    /// manifests that fail to parse. Always empty when unreachable.
    pub corrupt_files: Vec<PathBuf>,
}

/// Never fails; an unreadable store is reported as unreachable.
pub fn health_check(store: &Store) -> StoreStatus {
    let unreachable = StoreStatus { reachable: false, datasets_present: Vec::new(), corrupt_files: Vec::new() };
    if !store.is_reachable() || fs::read_dir(&store.root).is_err() {
        return unreachable;
    }
    let datasets_present = store.list_datasets();
    let mut corrupt_files = Vec::new();
    for id in &datasets_present {
        let manifest_path = store.manifest_path(id);
        let Some(manifest) = store.read_manifest(id) else {
            corrupt_files.push(manifest_path);
            continue;
        };
        let Ok(entries) = fs::read_dir(store.dataset_dir(id)) else {
            continue;
        };
        let mut blocks: Vec<(u64, PathBuf)> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let index = name.strip_prefix("block_")?.strip_suffix(".plyd")?.parse().ok()?;
                Some((index, e.path()))
            })
            .collect();
        blocks.sort();
        for (index, path) in blocks {
            let ok =
                fs::read(&path).ok().is_some_and(|bytes| manifest.digest(index) == Some(sha256_hex(&bytes).as_str()));
            if !ok {
                corrupt_files.push(path);
            }
        }
    }
    StoreStatus { reachable: true, datasets_present, corrupt_files }
}

/// Aggregate counts over a store's datasets: datasets, data points (sum of
/// `k`) and configured indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegistryTotals {
    pub datasets: usize,
    pub data_points: usize,
    pub indicators: usize,
}

pub fn registry_totals(store: &Store) -> RegistryTotals {
    if !store.is_reachable() {
        return RegistryTotals::default();
    }
    store.list_datasets().iter().filter_map(|id| store.read_manifest(id)).fold(RegistryTotals::default(), |acc, m| {
        RegistryTotals {
            datasets: acc.datasets + 1,
            data_points: acc.data_points + m.k,
            indicators: acc.indicators + m.indicators.len(),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Primary,
    Reconstructed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Primary => "primary",
            Provenance::Reconstructed => "reconstructed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovered {
    pub values: Vec<Rational>,
    pub provenance: Provenance,
    pub suspects: Vec<u64>,
    pub manifest: DatasetManifest,
}

impl Recovered {
    /// Evaluates every indicator recorded in the manifest over the
    /// recovered values.
    pub fn indicators(&self) -> Result<Vec<(IndicatorDef, Rational)>, StorageError> {
        let inputs: HashMap<String, Rational> =
            self.values.iter().enumerate().map(|(i, v)| (i.to_string(), v.clone())).collect();
        self.manifest.indicators.iter().map(|def| Ok((def.clone(), compute_indicator(def, &inputs)?))).collect()
    }
}

/// Primary manifest when the primary is reachable and its copy parses,
/// otherwise the secondary copy.
pub fn load_manifest(dataset_id: &str, primary: &Store, secondary: &Store) -> Result<DatasetManifest, StorageError> {
    require_id(dataset_id)?;
    [primary, secondary]
        .into_iter()
        .filter(|s| s.is_reachable())
        .find_map(|s| s.read_manifest(dataset_id))
        .ok_or_else(|| StorageError::ManifestMissing(dataset_id.to_owned()))
}

/// Reads block `index` from `store` and checks it against the manifest.
/// `None` when the file is absent; `Some(Err(()))` when present but invalid.
fn read_valid_block(store: &Store, manifest: &DatasetManifest, index: u64) -> Option<Result<CodedBlock, ()>> {
    let bytes = match fs::read(store.block_path(&manifest.dataset_id, index)) {
        Ok(bytes) => bytes,
        Err(_) => return None,
    };
    if manifest.digest(index) != Some(sha256_hex(&bytes).as_str()) {
        return Some(Err(()));
    }
    Some(match parse_block_file(&bytes) {
        Ok((block, m))
            if block.dataset_id() == manifest.dataset_id
                && block.k() == manifest.k
                && m == manifest.m
                && block.index() == index =>
        {
            Ok(block)
        }
        _ => Err(()),
    })
}

struct Gathered {
    blocks: Vec<CodedBlock>,
    digest_failures: Vec<u64>,
    missing: Vec<u64>,
}

/// One digest-valid copy of every block found in the reachable stores.
fn gather(manifest: &DatasetManifest, stores: &[&Store]) -> Gathered {
    let reachable: Vec<&&Store> = stores.iter().filter(|s| s.is_reachable()).collect();
    let mut out = Gathered { blocks: Vec::new(), digest_failures: Vec::new(), missing: Vec::new() };
    for index in 0..manifest.total_blocks() as u64 {
        let copies: Vec<Result<CodedBlock, ()>> =
            reachable.iter().filter_map(|s| read_valid_block(s, manifest, index)).collect();
        match copies.iter().find_map(|c| c.as_ref().ok()) {
            Some(block) => out.blocks.push(block.clone()),
            None if copies.is_empty() => out.missing.push(index),
            None => out.digest_failures.push(index),
        }
    }
    out
}

/// The four-step recovery workflow:
///
/// 1. If the primary is reachable and every original block matches its
///    manifest digest, return those values.
/// 2. Otherwise gather every digest-valid block from both stores; invalid
///    blocks are treated as erasures.
/// 3. With at least `k` valid blocks, interpolate. Surplus blocks that
///    disagree trigger maximum-agreement corruption location.
/// 4. Re-encode the reconstructed originals and compare their digests with
///    the manifest.
pub fn recover_dataset(dataset_id: &str, primary: &Store, secondary: &Store) -> Result<Recovered, StorageError> {
    let manifest = load_manifest(dataset_id, primary, secondary)?;
    let k = manifest.k;

    if primary.is_reachable() {
        let originals: Option<Vec<Rational>> = (0..k as u64)
            .map(|i| read_valid_block(primary, &manifest, i).and_then(Result::ok).map(|b| b.value().clone()))
            .collect();
        if let Some(values) = originals {
            return Ok(Recovered { values, provenance: Provenance::Primary, suspects: Vec::new(), manifest });
        }
    }

    let gathered = gather(&manifest, &[primary, secondary]);
    if gathered.blocks.len() < k {
        return Err(StorageError::Unrecoverable { id: dataset_id.to_owned(), k, valid: gathered.blocks.len() });
    }
    let mut suspects: BTreeSet<u64> = gathered.digest_failures.iter().copied().collect();
    let set = RecoverySet::new(gathered.blocks, k)?;
    let values = match parity::recover(&set) {
        Ok(values) => values,
        Err(CodecError::Inconsistent { .. }) => {
            let correction = locate_corruption(&set)?;
            suspects.extend(correction.suspects);
            correction.recovered
        }
        Err(e) => return Err(e.into()),
    };

    let mismatched: Vec<u64> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let block = CodedBlock::new(dataset_id, k, i as u64, v.clone()).ok()?;
            let digest = sha256_hex(encode_block_file(&block, manifest.m).as_bytes());
            (manifest.digest(i as u64) != Some(digest.as_str())).then_some(i as u64)
        })
        .collect();
    if !mismatched.is_empty() {
        suspects.extend(mismatched);
        return Err(StorageError::ValidationFailed { suspects: suspects.into_iter().collect() });
    }

    Ok(Recovered { values, provenance: Provenance::Reconstructed, suspects: suspects.into_iter().collect(), manifest })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetReport {
    pub consistent: bool,
    pub residual_indices: Vec<u64>,
    pub digest_failures: Vec<u64>,
    pub missing: Vec<u64>,
}

/// Read-only consistency check across both stores: digest failures plus
/// interpolation residuals of the digest-valid blocks.
pub fn verify_dataset(dataset_id: &str, primary: &Store, secondary: &Store) -> Result<DatasetReport, StorageError> {
    let manifest = load_manifest(dataset_id, primary, secondary)?;
    let gathered = gather(&manifest, &[primary, secondary]);
    if gathered.blocks.len() < manifest.k {
        return Err(StorageError::Unrecoverable {
            id: dataset_id.to_owned(),
            k: manifest.k,
            valid: gathered.blocks.len(),
        });
    }
    let report = parity::verify(&RecoverySet::new(gathered.blocks, manifest.k)?)?;
    Ok(DatasetReport {
        consistent: report.consistent && gathered.digest_failures.is_empty(),
        residual_indices: report.residual_indices,
        digest_failures: gathered.digest_failures,
        missing: gathered.missing,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Sets the persistent `.unreachable` flag.
    Unreachable,
    DeleteBlock {
        dataset_id: String,
        index: u64,
    },
    /// Inverts every bit of the byte at `offset`.
    FlipByte {
        dataset_id: String,
        index: u64,
        offset: usize,
    },
}

pub fn inject_fault(store: &Store, fault: &Fault) -> Result<(), StorageError> {
    if !store.root.is_dir() {
        return Err(StorageError::StoreMissing(store.root.clone()));
    }
    let _lock = store.lock()?;
    let block = |dataset_id: &str, index: u64| -> Result<PathBuf, StorageError> {
        require_id(dataset_id)?;
        if !store.dataset_dir(dataset_id).is_dir() {
            return Err(StorageError::UnknownDataset(dataset_id.to_owned()));
        }
        let path = store.block_path(dataset_id, index);
        if path.is_file() {
            Ok(path)
        } else {
            Err(StorageError::UnknownBlock { id: dataset_id.to_owned(), index })
        }
    };
    match fault {
        Fault::Unreachable => {
            let path = store.root.join(UNREACHABLE_FLAG);
            fs::write(&path, b"").map_err(io_err(&path))
        }
        Fault::DeleteBlock { dataset_id, index } => {
            let path = block(dataset_id, *index)?;
            fs::remove_file(&path).map_err(io_err(&path))
        }
        Fault::FlipByte { dataset_id, index, offset } => {
            let path = block(dataset_id, *index)?;
            let mut bytes = fs::read(&path).map_err(io_err(&path))?;
            let len = bytes.len();
            let byte = bytes.get_mut(*offset).ok_or(StorageError::OffsetOutOfRange { offset: *offset, len })?;
            *byte = !*byte;
            fs::write(&path, bytes).map_err(io_err(&path))
        }
    }
}
