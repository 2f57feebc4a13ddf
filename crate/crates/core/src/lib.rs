//! k-partite entanglement measures for explicit multipartite pure states.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the numerical
//! substrate (pure states, partial traces, Hermitian spectra), the partition
//! lattice used by the minimisation-based measures, the reduced functions,
//! finest tensor-product factorisation, the eight k-partite measures, and an
//! axiom auditor that corroborates or refutes the unification and
//! completeness postulates on finite state families.
//!
//! Party order follows the layout: party 0 is the most significant digit of
//! the row-major mixed-radix amplitude index.

#![no_std]

extern crate alloc;

pub mod audit;
pub mod error;
pub mod factorize;
pub mod linalg;
pub mod measures;
pub mod partition;
pub mod qstate;
pub mod redfun;

pub use error::{Error, Result};
pub use factorize::{classify, finest_factorization, FactorDecomposition, FactorKind};
pub use measures::{MeasureKind, MeasureResult, MeasureSpec};
pub use partition::{Coarsening, Partition, PartitionFamily};
pub use qstate::{DensityMatrix, FactorSpec, Limits, PureState, StateSpec, SystemLayout};
pub use redfun::ReducedFunction;

/// Purity threshold shared by "pure marginal" decisions: a density matrix is
/// treated as pure when `Tr ρ² ≥ 1 - PURITY_TOL`.
pub const PURITY_TOL: f64 = 1e-9;

/// Eigenvalues in `[-EIGEN_CLIP, 0)` are clipped to zero; anything lower is a
/// numerical contract failure.
pub const EIGEN_CLIP: f64 = 1e-10;
