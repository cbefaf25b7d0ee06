//! Dense matrices, singular values, index sets and seeded random ensembles.

mod ensemble;
mod index_set;
pub mod linalg;
mod matrix;
mod seed;

pub use ensemble::{random_orthogonal, sample_ensemble, EnsembleSpec};
pub(crate) use ensemble::{gaussian, goe, sample_with};
pub use index_set::IndexSet;
pub use linalg::{numerical_rank, svd_values, symmetric_eigenvalues};
pub use matrix::{fmt_real, Matrix};
pub(crate) use seed::{splitmix64, stable_hash};
pub use seed::Seed;
