//! Exact-arithmetic parity coding built on Lagrange interpolation.
//!
//! A dataset of `k` values is placed on the canonical abscissae `x = 0..k-1`,
//! the unique interpolant of degree at most `k - 1` is computed over exact
//! rationals, and `m` parity blocks are sampled at `x = k..k+m-1`. Any `k`
//! distinct blocks reconstruct the originals bit-exactly.
//!
//! The crate is layered bottom-up:
//!
//! - [`rational`] and [`poly`]: the arithmetic kernel (exact fractions,
//!   Lagrange basis, interpolation, evaluation).
//! - [`parity`]: encoding, recovery, consistency checks and exhaustive
//!   maximum-agreement corruption location.
//! - [`indicator`]: sum and ratio-of-sums aggregations with range checks.
//! - [`storage`]: directory-backed primary/secondary stores, manifests,
//!   the recovery workflow and fault injection.

pub mod indicator;
pub mod parity;
pub mod poly;
pub mod rational;
pub mod storage;

pub use indicator::{compute_indicator, validate_range, IndicatorDef, IndicatorError, IndicatorKind, RangeVerdict};
pub use parity::{
    encode, encode_with_limit, locate_corruption, original_blocks, recover, verify, CodecError, CodedBlock,
    ConsistencyReport, Correction, RecoverySet, Role,
};
pub use poly::{evaluate, evaluate_many, interpolate, lagrange_basis, Point, PolyError, Polynomial};
pub use rational::{ParseRationalError, Rational};
pub use storage::{
    health_check, inject_fault, recover_dataset, store_dataset, DatasetManifest, Fault, Provenance, Recovered,
    StorageError, Store, StoreOptions, StoreStatus,
};
