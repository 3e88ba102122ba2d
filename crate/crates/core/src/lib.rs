//! Sparsified nested dissection (spaND) for sparse SPD systems.
//!
//! The crate builds a hierarchical approximate factorization `A ≈ L Lᵀ` by
//! alternating exact elimination of separated interiors with low-rank
//! sparsification of the interfaces between them. Three sparsification
//! schemes are provided ([`SchemeKind`]): the classic first-order scheme and
//! two second-order variants whose preconditioner error is quadratic in the
//! accuracy parameter at essentially the same memory cost.
//!
//! ```
//! use spand::{factorize, laplacian_2d, pcg, build_hierarchy, default_levels, SchemeKind};
//!
//! let a = laplacian_2d(24);
//! let h = build_hierarchy(&a, default_levels(a.n()));
//! let f = factorize(&a, &h, 0.01, SchemeKind::SecondOrderFull, 4).unwrap();
//! let b = vec![1.0; a.n()];
//! let (_, report) = pcg(&a, &b, &f, 1e-10, 500).unwrap();
//! assert!(report.converged);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dense;
pub mod error;
pub mod factorize;
pub mod krylov;
pub mod partition;
pub mod schemes;
pub mod sparse;
pub mod sweep;

pub use dense::DenseMatrix;
pub use error::{DenseError, Error, FactorError, KrylovError, SparseError};
pub use factorize::{factorize, Factorization, LevelDiagnostics};
pub use krylov::{cg_bound_rate, pcg, LinearOperator, Preconditioner, SolveReport};
pub use partition::{build_hierarchy, default_levels, PartitionHierarchy};
pub use schemes::{BlockOperator, SchemeKind};
pub use sparse::{
    high_contrast_field, jacobi_prescale, laplacian_2d, laplacian_from_field, poisson_eigvec,
    read_matrix_market, write_matrix_market, CoefficientField, SparseSymMatrix,
};
