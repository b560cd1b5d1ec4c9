//! End-to-end quantum state transfer on an XX spin chain with loop weights
//! on the second and second-to-last nodes.
//!
//! - [`chain`]: the single-excitation Hamiltonian and its Gershgorin picture.
//! - [`spectral`]: Sturm bisection + inverse iteration eigensolver.
//! - [`modes`]: closed-form bulk modes and their secular equations.
//! - [`design`]: choosing `Q` and certifying a fidelity lower bound.
//! - [`dynamics`]: transfer amplitude, fidelity curves, peaks, windows.

pub mod chain;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod modes;
pub mod spectral;

pub use chain::{build_hamiltonian, gershgorin_discs, reflect, ChainSpec, Disc, Parity, TridiagonalHamiltonian};
pub use design::{
    design_for_q, design_theorem, fidelity_bound, select_m, verify_corollary, DesignMode, TransferDesign,
};
pub use dynamics::{
    expm_oracle, fidelity_curve, peak_search, transfer_amplitude, window_at_threshold, EndpointSpectrum, FidelityCurve,
    TransferWindow,
};
pub use error::{Error, Result};
pub use modes::{mode_vector, ModeSolution, ModeVector};
pub use spectral::{full_decomposition, sturm_count, SpectralDecomposition};
