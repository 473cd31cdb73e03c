//! Truncated-Fock-space simulation of photonic quantum computing.
//!
//! The crate represents multimode bosonic states sparsely over the
//! occupation-number basis with a per-mode cutoff, and builds everything
//! else on top of that carrier: linear-optical networks, photon-counting
//! and homodyne measurement models, the heralded KLM gates, cluster-state
//! computation with fusion gates, and continuous-variable constructions
//! (squeezed, cat and grid states, conditional-homodyne Kraus updates,
//! heralded boson-sampling state preparation).
//!
//! States are immutable values; every operation is a pure function of its
//! inputs, so states can be shared freely between threads. Sampling
//! operations take an explicit RNG handle.

pub mod cluster;
pub mod cv;
pub mod detection;
pub mod fock;
pub mod interferometer;
pub mod klm;
pub mod math;
pub mod oracles;

pub use fock::{FockState, Ladder, LogicalEncoding, OverflowPolicy, PulseShape};
pub use interferometer::ModeUnitary;

use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("occupation {occupation} on mode {mode} exceeds cutoff {cutoff}")]
    CutoffViolation {
        mode: usize,
        occupation: u32,
        cutoff: u8,
    },
    #[error("mode count mismatch: {left} vs {right}")]
    ModeMismatch { left: usize, right: usize },
    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: u8, right: u8 },
    #[error("mode index {mode} out of range for {num_modes} modes")]
    ModeOutOfRange { mode: usize, num_modes: usize },
    #[error("target modes must be distinct")]
    DuplicateTargets,
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("unitary dimension {unitary} does not match {targets} target modes")]
    DimensionMismatch { unitary: usize, targets: usize },
    #[error("basis index {index} out of range for local dimension {dimension}")]
    BasisOutOfRange { index: usize, dimension: usize },
    #[error("state lies outside the dual-rail code space")]
    CodeSpaceViolation,
    #[error("cutoff leakage {leaked:.3e} exceeds budget {budget:.3e}")]
    Leakage { leaked: f64, budget: f64 },
    #[error("quadrature grid too coarse: density integrates to {integral:.12}")]
    GridTooCoarse { integral: f64 },
    #[error("herald probability {probability:.3e} below floor {floor:.3e}")]
    ImprobableHerald { probability: f64, floor: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid gate configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
