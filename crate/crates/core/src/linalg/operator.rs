use serde::{Deserialize, Serialize};

use super::block_csr::{assemble_global, ensemble_spmv_into, BlockCsrMatrix, SpmvStrategy};
use super::matrix_free::{MatrixFreeOperator, PartitionedOperator};
use super::stiffness::ElementStiffnesses;
use super::vector::EnsembleVector;
use crate::error::Result;
use crate::mesh::{mesh_coloring, partition_mesh, SurfaceMesh};

/// How the global stiffness is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OperatorKind {
    #[default]
    MatrixFree,
    Assembled { strategy: SpmvStrategy },
    Partitioned { n_parts: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub enum StiffnessOperator {
    MatrixFree(MatrixFreeOperator),
    Assembled { matrix: BlockCsrMatrix, strategy: SpmvStrategy },
    Partitioned(PartitionedOperator),
}

impl StiffnessOperator {
    pub fn build(mesh: &SurfaceMesh, k: ElementStiffnesses, kind: OperatorKind) -> Result<Self> {
        Ok(match kind {
            OperatorKind::MatrixFree => Self::MatrixFree(MatrixFreeOperator::new(mesh, &mesh_coloring(mesh), k)?),
            OperatorKind::Assembled { strategy } => Self::Assembled {
                matrix: assemble_global(mesh, &k)?,
                strategy,
            },
            OperatorKind::Partitioned { n_parts, seed } => {
                Self::Partitioned(PartitionedOperator::new(mesh, partition_mesh(mesh, n_parts, seed)?, k)?)
            }
        })
    }

    pub fn apply_into(&self, x: &EnsembleVector, y: &mut EnsembleVector) -> Result<()> {
        match self {
            Self::MatrixFree(op) => op.apply_into(x, y),
            Self::Assembled { matrix, strategy } => ensemble_spmv_into(matrix, x, y, *strategy),
            Self::Partitioned(op) => op.apply_into(x, y),
        }
    }

    pub fn apply(&self, x: &EnsembleVector) -> Result<EnsembleVector> {
        let mut y = EnsembleVector::zeros(x.n_nodes(), x.n_s());
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}
