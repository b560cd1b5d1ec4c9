use thiserror::Error;

use crate::chain::Parity;

/// Which factor of a secular function blew up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleKind {
    /// `cos(theta) = 0`, shared by every secular function.
    Base,
    /// `cos(k theta / 2) = 0`, the tangent term of the symmetric branch.
    Tangent,
    /// `sin(k theta / 2) = 0`, the cotangent term of the alternating branch.
    Cotangent,
}

impl std::fmt::Display for PoleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoleKind::Base => write!(f, "cos(theta)"),
            PoleKind::Tangent => write!(f, "cos(k*theta/2)"),
            PoleKind::Cotangent => write!(f, "sin(k*theta/2)"),
        }
    }
}

/// Interval that had to contain an integer `8m + 1` for the design to exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MWindow {
    pub k: usize,
    pub c: f64,
    /// Open lower bound on `8m + 1`.
    pub lower: f64,
    /// Open upper bound on `8m + 1`.
    pub upper: f64,
    /// Smallest `k` for which the window is wide enough to always contain an
    /// admissible integer at this `c`.
    pub min_k_guaranteed: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inverse iteration did not converge at lambda = {lambda} (residual {residual:e})")]
    NoConvergence { lambda: f64, residual: f64 },

    #[error("eigenvalue gap {gap:e} below guard near lambda = {lambda}")]
    GapTooSmall { lambda: f64, gap: f64 },

    #[error("pole of {kind} at theta = {theta}")]
    PoleAt { theta: f64, kind: PoleKind },

    #[error("{parity:?} secular function has a pole inside [{lo}, {hi}]")]
    PoleInBracket { parity: Parity, lo: f64, hi: f64 },

    #[error("no sign change of {parity:?} secular function minus Q = {q} on [{lo}, {hi}]")]
    NoSignChange { parity: Parity, q: f64, lo: f64, hi: f64 },

    #[error("lambda = {lambda:e} too close to zero for the closed-form mode")]
    DegenerateLambda { lambda: f64 },

    #[error(
        "no integer 8m+1 in ({:.6}, {:.6}) for k = {}, c = {:.6}; feasible for all k >= {}",
        .0.lower, .0.upper, .0.k, .0.c, .0.min_k_guaranteed
    )]
    NoFeasibleM(MWindow),

    #[error("root search failed: {0}")]
    RootFailure(String),

    #[error("dense oracle refused n = {n} (limit {limit})")]
    SizeGuard { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
