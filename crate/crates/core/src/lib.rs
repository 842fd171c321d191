//! Perturbational nested product formulas for the periodic Ising chain
//!
//! ```text
//! H = sum_k J_k Z_k Z_{k+1} + g_k Z_k + h_k X_k
//! ```
//!
//! compared against Trotter formulas using an exact eigendecomposition.

pub mod analysis;
pub mod calculus;
pub mod cli;
pub mod densela;
pub mod model;
pub mod par;
pub mod schemes;

pub use analysis::{
    advantage_window, fidelity, fidelity_curve, improvement_metrics, parameter_sweep,
    AnalysisError, AnalysisOptions, Evaluator, Reference, SweepAxis,
};
pub use densela::ComplexMatrix;
pub use model::{build_terms, ChainSpec};
pub use par::Execution;
pub use schemes::{build_formula, local_unitary_count, SchemeId};
