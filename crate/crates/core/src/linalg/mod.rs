//! Ensemble operators: all realizations share one sparsity structure and
//! are streamed together with the realization index innermost.

mod block_csr;
mod matrix_free;
mod operator;
mod stiffness;
mod vector;

pub use block_csr::{assemble_global, ensemble_spmv, ensemble_spmv_into, BlockCsrMatrix, SpmvStrategy};
pub use matrix_free::{sync_shared, MatrixFreeOperator, PartitionedOperator};
pub use operator::{OperatorKind, StiffnessOperator};
pub use stiffness::ElementStiffnesses;
pub use vector::EnsembleVector;
