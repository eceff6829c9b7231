//! Up-looking sparse Cholesky `P A Pᵀ = L Lᵀ`.

use super::ordering::{inverse_permutation, minimum_degree_ordering};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Lower-triangular factor in compressed-column form; the diagonal entry is
/// stored first in each column.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors a symmetric positive-definite matrix with a minimum-degree
    /// ordering. Only the pattern's symmetric part is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = minimum_degree_ordering(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n || perm.len() != n {
            return Err(Error::Argument("Cholesky needs a square matrix and a full permutation".into()));
        }
        let inv = inverse_permutation(&perm);
        // Upper triangle of C = P A Pᵀ by columns: column k holds C[i][k], i <= k.
        let cols: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|k| {
                let mut c: Vec<(usize, f64)> = a
                    .row(perm[k])
                    .map(|(j, v)| (inv[j], v))
                    .filter(|&(i, _)| i <= k)
                    .collect();
                c.sort_unstable_by_key(|&(i, _)| i);
                c
            })
            .collect();

        let parent = etree(&cols, n);
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut path = Vec::new();

        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&cols[k], k, &parent, &mut mark, &mut stack, &mut path);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = NONE);

        for k in 0..n {
            let top = ereach(&cols[k], k, &parent, &mut mark, &mut stack, &mut path);
            for &(i, v) in &cols[k] {
                x[i] = v;
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization { pivot: perm[k], value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.values[self.col_ptr[k]]).collect()
    }

    /// `L[i][j]` in the permuted ordering.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (self.col_ptr[j]..self.col_ptr[j + 1])
            .find(|&p| self.row_idx[p] == i)
            .map_or(0.0, |p| self.values[p])
    }

    /// In place `y <- L⁻ᵀ y` (permuted ordering).
    pub fn solve_lt(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in self.col_ptr[j] + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[self.col_ptr[j]];
        }
    }

    /// In place `y <- L⁻¹ y` (permuted ordering).
    pub fn solve_l(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let yj = y[j] / self.values[self.col_ptr[j]];
            y[j] = yj;
            for p in self.col_ptr[j] + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    /// Solves `A x = b` in the original ordering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.solve_l(&mut y);
        self.solve_lt(&mut y);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// `x = Pᵀ L⁻ᵀ z`, a draw with covariance `A⁻¹` when `z` is standard normal.
    pub fn sample_from_noise(&self, z: &[f64]) -> Vec<f64> {
        let mut y = z.to_vec();
        self.solve_lt(&mut y);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

fn etree(cols: &[Vec<(usize, f64)>], n: usize) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for (k, col) in cols.iter().enumerate() {
        for &(start, _) in col {
            let mut i = start;
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order.
fn ereach(
    col: &[(usize, f64)],
    k: usize,
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut [usize],
    path: &mut Vec<usize>,
) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &(start, _) in col {
        let mut i = start;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        while let Some(i) = path.pop() {
            top -= 1;
            stack[top] = i;
        }
    }
    top
}

/// Dense Cholesky `A = L Lᵀ`, returned row-major lower triangular.
pub fn dense_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return Err(Error::Factorization { pivot: j, value: d });
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

/// Dense inverse of a symmetric positive-definite matrix.
pub fn dense_spd_inverse(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let l = dense_cholesky(a)?;
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k][i] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in 0..n {
            inv[i][c] = y[i];
        }
    }
    Ok(inv)
}
