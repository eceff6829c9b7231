use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::matern::MaternParams;
use super::precision::PrecisionOperator;
use crate::error::{Error, Result};

/// Nodal realizations of one random field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    pub n_nodes: usize,
    pub mean: f64,
    pub params: MaternParams,
    pub seed: u64,
    /// Global index of each stored realization.
    pub realizations: Vec<usize>,
    /// Realization-major: node `i` of stored realization `r` is at `r * n_nodes + i`.
    pub nodal_values: Vec<f64>,
}

impl FieldEnsemble {
    pub fn n_s(&self) -> usize {
        self.realizations.len()
    }

    pub fn realization(&self, r: usize) -> &[f64] {
        &self.nodal_values[r * self.n_nodes..(r + 1) * self.n_nodes]
    }

    /// Single-realization ensemble holding stored realization `r`.
    pub fn select(&self, r: usize) -> FieldEnsemble {
        FieldEnsemble {
            realizations: vec![self.realizations[r]],
            nodal_values: self.realization(r).to_vec(),
            ..self.clone()
        }
    }
}

/// Standard-normal noise for one realization. The stream depends only on
/// `(seed, realization)`, so draws do not depend on scheduling.
pub fn realization_noise(seed: u64, realization: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization as u64);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn sample_field(prec: &PrecisionOperator, mean: f64, n_s: usize, seed: u64) -> Result<FieldEnsemble> {
    if n_s == 0 {
        return Err(Error::Argument("ensemble size must be at least 1".into()));
    }
    sample_realizations(prec, mean, 0..n_s, seed)
}

/// Draws the realizations with global indices in `range`; realization `r`
/// is identical to row `r` of a full `sample_field` call with the same seed.
pub fn sample_realizations(
    prec: &PrecisionOperator,
    mean: f64,
    range: Range<usize>,
    seed: u64,
) -> Result<FieldEnsemble> {
    if range.is_empty() {
        return Err(Error::Argument("empty realization range".into()));
    }
    let n = prec.factor.n();
    let realizations: Vec<usize> = range.collect();
    let mut values = vec![0.0; n * realizations.len()];
    values.par_chunks_mut(n).zip(realizations.par_iter()).for_each(|(row, &r)| {
        let z = realization_noise(seed, r, n);
        fill_row(prec, mean, &z, row);
    });
    Ok(FieldEnsemble {
        n_nodes: n,
        mean,
        params: prec.params,
        seed,
        realizations,
        nodal_values: values,
    })
}

/// Test hook: builds realizations from caller-supplied noise vectors.
pub fn sample_from_noise(prec: &PrecisionOperator, mean: f64, noise: &[Vec<f64>]) -> Result<FieldEnsemble> {
    let n = prec.factor.n();
    if noise.is_empty() || noise.iter().any(|z| z.len() != n) {
        return Err(Error::Argument(format!("noise must be a non-empty list of length-{n} vectors")));
    }
    let mut values = vec![0.0; n * noise.len()];
    for (row, z) in values.chunks_mut(n).zip(noise) {
        fill_row(prec, mean, z, row);
    }
    Ok(FieldEnsemble {
        n_nodes: n,
        mean,
        params: prec.params,
        seed: 0,
        realizations: (0..noise.len()).collect(),
        nodal_values: values,
    })
}

fn fill_row(prec: &PrecisionOperator, mean: f64, z: &[f64], row: &mut [f64]) {
    let x = prec.factor.sample_from_noise(z);
    for (out, xi) in row.iter_mut().zip(x) {
        *out = mean + prec.scale * xi;
    }
}
