use super::cholesky::CholeskyFactor;
use super::galerkin::GalerkinMatrices;
use super::matern::MaternParams;
use super::sparse::CsrMatrix;
use crate::error::Result;

/// Sparse precision matrix with its factorization and the variance scale
/// applied to samples.
#[derive(Debug, Clone)]
pub struct PrecisionOperator {
    pub q: CsrMatrix,
    pub factor: CholeskyFactor,
    pub params: MaternParams,
    /// Multiplier taking unit-noise SPDE samples to the target variance.
    pub scale: f64,
}

/// Unfactored SPDE precision with the lumped mass matrix.
pub fn precision_matrix(gm: &GalerkinMatrices, p: &MaternParams) -> Result<CsrMatrix> {
    let alpha = p.alpha()?;
    let k2 = p.kappa() * p.kappa();
    let q1 = CsrMatrix::diagonal(&gm.c_lumped).add_scaled(k2, &gm.g, 1.0)?;
    let inv_c: Vec<f64> = gm.c_lumped.iter().map(|c| 1.0 / c).collect();
    let mut q = if alpha % 2 == 1 { q1.clone() } else { q1.matmul(&q1.scale_rows(&inv_c))?.symmetrized()? };
    for _ in 0..(alpha - 1) / 2 {
        // Q <- Q1 C⁻¹ Q C⁻¹ Q1
        let right = q.matmul(&q1.scale_rows(&inv_c))?;
        q = q1.matmul(&right.scale_rows(&inv_c))?.symmetrized()?;
    }
    Ok(q)
}

pub fn build_precision(gm: &GalerkinMatrices, p: &MaternParams) -> Result<PrecisionOperator> {
    p.validate()?;
    let q = precision_matrix(gm, p)?;
    let factor = CholeskyFactor::factor(&q)?;
    let scale = (p.sigma2 / p.raw_spde_variance()).sqrt();
    log::debug!(
        "precision: N = {}, nnz(Q) = {}, nnz(L) = {}, alpha = {}",
        q.n_rows(),
        q.nnz(),
        factor.nnz(),
        p.alpha()?
    );
    Ok(PrecisionOperator { q, factor, params: *p, scale })
}
