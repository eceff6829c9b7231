//! Matérn random fields on the surface mesh through the SPDE/Galerkin
//! precision construction.

mod bessel;
mod cholesky;
mod correlation;
mod galerkin;
mod io;
mod matern;
mod ordering;
mod precision;
mod sampling;
mod sparse;

pub use bessel::bessel_k;
pub use cholesky::{dense_cholesky, dense_spd_inverse, CholeskyFactor};
pub use correlation::{
    boundary_nodes, empirical_correlation, empirical_correlation_with, CorrelationEstimate, CorrelationOptions,
};
pub use galerkin::{assemble_galerkin, element_matrices, GalerkinMatrices};
pub use io::{read_field_binary, write_field_binary, write_field_csv};
pub use matern::{matern_correlation, MaternParams, SURFACE_DIM};
pub use ordering::{inverse_permutation, minimum_degree_ordering};
pub use precision::{build_precision, precision_matrix, PrecisionOperator};
pub use sampling::{realization_noise, sample_field, sample_from_noise, sample_realizations, FieldEnsemble};
pub use sparse::CsrMatrix;
