use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stiffness::ElementStiffnesses;
use super::vector::EnsembleVector;
use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::textfmt::float;

/// Node-block CSR matrix whose nonzeros are dense `3 × 3 × n_s` blocks.
/// Block `k` entry `(a, b)` of realization `r` is at `(k * 9 + 3 a + b) * n_s + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCsrMatrix {
    n_nodes: usize,
    n_s: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<f64>,
}

/// SpMV scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpmvStrategy {
    /// One task per block row.
    #[default]
    RowScalar,
    /// Tasks of at most `rows_per_task` rows and about `nnz_stream_len`
    /// blocks; longer rows are split into segments summed in order.
    RowBlocked { rows_per_task: usize, nnz_stream_len: usize },
}

impl BlockCsrMatrix {
    /// Zero matrix on the one-ring pattern of the mesh (plus diagonal).
    pub fn with_mesh_pattern(mesh: &SurfaceMesh, n_s: usize) -> Self {
        let n = mesh.n_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let mut row: Vec<usize> = mesh.neighbors(i).to_vec();
            row.push(i);
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n_nodes: n,
            n_s,
            row_ptr,
            col_idx,
            blocks: vec![0.0; nnz * 9 * n_s],
        }
    }

    /// Validates sorted, unique columns and the payload length.
    pub fn from_parts(
        n_nodes: usize,
        n_s: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        blocks: Vec<f64>,
    ) -> Result<Self> {
        let ok = row_ptr.len() == n_nodes + 1
            && row_ptr[0] == 0
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[n_nodes] == col_idx.len()
            && blocks.len() == col_idx.len() * 9 * n_s
            && (0..n_nodes).all(|i| {
                let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                row.windows(2).all(|w| w[0] < w[1]) && row.iter().all(|&j| j < n_nodes)
            });
        if !ok {
            return Err(Error::Argument("inconsistent block CSR arrays".into()));
        }
        Ok(Self {
            n_nodes,
            n_s,
            row_ptr,
            col_idx,
            blocks,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn nnz_blocks(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    /// Storage in bytes of the block payload.
    pub fn payload_bytes(&self) -> usize {
        self.blocks.len() * std::mem::size_of::<f64>()
    }

    pub fn block_index(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    /// Entry `(3 i + a, 3 j + b)` of realization `r`.
    pub fn entry(&self, i: usize, a: usize, j: usize, b: usize, r: usize) -> f64 {
        self.block_index(i, j)
            .map_or(0.0, |k| self.blocks[(k * 9 + 3 * a + b) * self.n_s + r])
    }

    /// Dense `3N × 3N` matrix of realization `r`.
    pub fn to_dense(&self, r: usize) -> Vec<Vec<f64>> {
        let n3 = 3 * self.n_nodes;
        let mut d = vec![vec![0.0; n3]; n3];
        for i in 0..self.n_nodes {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                for a in 0..3 {
                    for b in 0..3 {
                        d[3 * i + a][3 * j + b] = self.blocks[(k * 9 + 3 * a + b) * self.n_s + r];
                    }
                }
            }
        }
        d
    }

    /// Triplet text: one line per block, `i j` then the `9 n_s` coefficients.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = String::new();
        let _ = writeln!(s, "# n_nodes {} n_s {} nnz_blocks {}", self.n_nodes, self.n_s, self.nnz_blocks());
        for i in 0..self.n_nodes {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = write!(s, "{} {}", i, self.col_idx[k]);
                for v in &self.blocks[k * 9 * self.n_s..(k + 1) * 9 * self.n_s] {
                    let _ = write!(s, " {}", float(*v));
                }
                s.push('\n');
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Scatter-adds element matrices into the mesh pattern. Elements are visited
/// in index order, so the result does not depend on the worker count.
pub fn assemble_global(mesh: &SurfaceMesh, k: &ElementStiffnesses) -> Result<BlockCsrMatrix> {
    if k.n_elements() != mesh.n_elements() {
        return Err(Error::Argument("stiffness set does not match the mesh".into()));
    }
    let n_s = k.n_s();
    let mut a = BlockCsrMatrix::with_mesh_pattern(mesh, n_s);
    // Map each element's 9 block slots once.
    let slots: Vec<[usize; 9]> = mesh
        .triangles()
        .iter()
        .map(|t| {
            let mut s = [0usize; 9];
            for p in 0..3 {
                for q in 0..3 {
                    s[3 * p + q] = a.block_index(t[p], t[q]).ok_or_else(|| {
                        Error::Internal(format!("pattern lacks block ({}, {})", t[p], t[q]))
                    })?;
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    // Rows are independent, so each row gathers its contributions in element order.
    let node_elems = mesh.node_elements();
    let tris = mesh.triangles();
    let row_ptr = a.row_ptr.clone();
    let mut row_slices: Vec<&mut [f64]> = Vec::with_capacity(mesh.n_nodes());
    let mut rest: &mut [f64] = &mut a.blocks;
    for i in 0..mesh.n_nodes() {
        let len = (row_ptr[i + 1] - row_ptr[i]) * 9 * n_s;
        let (head, tail) = rest.split_at_mut(len);
        row_slices.push(head);
        rest = tail;
    }
    row_slices.into_par_iter().enumerate().for_each(|(i, row)| {
        let base = row_ptr[i];
        for &e in &node_elems[i] {
            let p = tris[e].iter().position(|&v| v == i).expect("incident element");
            let scales = k.scales(e);
            for q in 0..3 {
                let kb = slots[e][3 * p + q] - base;
                for a_ in 0..3 {
                    for b in 0..3 {
                        let dst = &mut row[(kb * 9 + 3 * a_ + b) * n_s..(kb * 9 + 3 * a_ + b + 1) * n_s];
                        for (r, d) in dst.iter_mut().enumerate() {
                            *d += scales[r] * k.unit(e, r)[3 * p + a_][3 * q + b];
                        }
                    }
                }
            }
        }
    });
    Ok(a)
}

fn check_dims(a: &BlockCsrMatrix, x: &EnsembleVector, y: &EnsembleVector) -> Result<()> {
    if x.n_nodes() != a.n_nodes || x.n_s() != a.n_s || !x.same_shape(y) {
        return Err(Error::Argument(format!(
            "dimension mismatch: matrix {}x{} (n_s {}), x {} (n_s {}), y {} (n_s {})",
            a.n_nodes,
            a.n_nodes,
            a.n_s,
            x.n_nodes(),
            x.n_s(),
            y.n_nodes(),
            y.n_s()
        )));
    }
    Ok(())
}

/// `y += A[k-range] x` for one block row, accumulating into `acc` (`3 n_s`).
#[inline]
fn row_segment(a: &BlockCsrMatrix, x: &[f64], ks: std::ops::Range<usize>, acc: &mut [f64]) {
    let n_s = a.n_s;
    for k in ks {
        let j = a.col_idx[k];
        let xb = &x[3 * j * n_s..3 * (j + 1) * n_s];
        let blk = &a.blocks[k * 9 * n_s..(k + 1) * 9 * n_s];
        for c in 0..3 {
            let out = &mut acc[c * n_s..(c + 1) * n_s];
            for b in 0..3 {
                let coef = &blk[(3 * c + b) * n_s..(3 * c + b + 1) * n_s];
                let xv = &xb[b * n_s..(b + 1) * n_s];
                for r in 0..n_s {
                    out[r] += coef[r] * xv[r];
                }
            }
        }
    }
}

pub fn ensemble_spmv(a: &BlockCsrMatrix, x: &EnsembleVector, strategy: SpmvStrategy) -> Result<EnsembleVector> {
    let mut y = EnsembleVector::zeros(a.n_nodes, a.n_s);
    ensemble_spmv_into(a, x, &mut y, strategy)?;
    Ok(y)
}

/// Overwrites `y` with `A x`.
pub fn ensemble_spmv_into(
    a: &BlockCsrMatrix,
    x: &EnsembleVector,
    y: &mut EnsembleVector,
    strategy: SpmvStrategy,
) -> Result<()> {
    check_dims(a, x, y)?;
    let n_s = a.n_s;
    let xv = x.values();
    match strategy {
        SpmvStrategy::RowScalar => {
            y.values_mut().par_chunks_mut(3 * n_s).enumerate().for_each(|(i, out)| {
                out.iter_mut().for_each(|v| *v = 0.0);
                row_segment(a, xv, a.row_ptr[i]..a.row_ptr[i + 1], out);
            });
        }
        SpmvStrategy::RowBlocked {
            rows_per_task,
            nnz_stream_len,
        } => {
            if rows_per_task == 0 || nnz_stream_len == 0 {
                return Err(Error::Argument("row-blocked strategy needs positive task sizes".into()));
            }
            let tasks = blocked_tasks(&a.row_ptr, rows_per_task, nnz_stream_len);
            let mut outs: Vec<&mut [f64]> = Vec::with_capacity(tasks.len());
            let mut rest: &mut [f64] = y.values_mut();
            for t in &tasks {
                let (head, tail) = rest.split_at_mut((t.end - t.start) * 3 * n_s);
                outs.push(head);
                rest = tail;
            }
            tasks.par_iter().zip(outs).for_each_init(
                || vec![0.0; 3 * n_s],
                |partial, (rows, out)| {
                    for (li, i) in rows.clone().enumerate() {
                        let acc = &mut out[li * 3 * n_s..(li + 1) * 3 * n_s];
                        acc.iter_mut().for_each(|v| *v = 0.0);
                        let (lo, hi) = (a.row_ptr[i], a.row_ptr[i + 1]);
                        if hi - lo <= nnz_stream_len {
                            row_segment(a, xv, lo..hi, acc);
                        } else {
                            let mut s = lo;
                            while s < hi {
                                let e = (s + nnz_stream_len).min(hi);
                                partial.iter_mut().for_each(|v| *v = 0.0);
                                row_segment(a, xv, s..e, partial);
                                for (d, p) in acc.iter_mut().zip(partial.iter()) {
                                    *d += p;
                                }
                                s = e;
                            }
                        }
                    }
                },
            );
        }
    }
    Ok(())
}

/// Row ranges holding at most `rows_per_task` rows and, unless a single row
/// is longer, at most `nnz_stream_len` blocks. Depends only on the pattern.
fn blocked_tasks(row_ptr: &[usize], rows_per_task: usize, nnz_stream_len: usize) -> Vec<std::ops::Range<usize>> {
    let n = row_ptr.len() - 1;
    let mut tasks = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && end - start < rows_per_task && row_ptr[end + 1] - row_ptr[start] <= nnz_stream_len {
            end += 1;
        }
        tasks.push(start..end);
        start = end;
    }
    tasks
}
