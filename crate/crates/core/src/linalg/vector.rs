use crate::error::{Error, Result};

/// Nodal 3-vectors for every realization, stored node-major with the
/// realization index innermost: `(node, component, r)` is at
/// `(3 * node + component) * n_s + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleVector {
    n_nodes: usize,
    n_s: usize,
    values: Vec<f64>,
}

impl EnsembleVector {
    pub fn zeros(n_nodes: usize, n_s: usize) -> Self {
        Self {
            n_nodes,
            n_s,
            values: vec![0.0; 3 * n_nodes * n_s],
        }
    }

    pub fn from_values(n_nodes: usize, n_s: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 3 * n_nodes * n_s {
            return Err(Error::Argument(format!(
                "ensemble vector needs {} values, got {}",
                3 * n_nodes * n_s,
                values.len()
            )));
        }
        Ok(Self { n_nodes, n_s, values })
    }

    pub fn from_fn(n_nodes: usize, n_s: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut v = Self::zeros(n_nodes, n_s);
        for i in 0..n_nodes {
            for c in 0..3 {
                for r in 0..n_s {
                    v.values[(3 * i + c) * n_s + r] = f(i, c, r);
                }
            }
        }
        v
    }

    /// Stacks per-realization vectors of length `3 N`.
    pub fn from_realizations(rows: &[Vec<f64>]) -> Result<Self> {
        let n_s = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if n_s == 0 || !len.is_multiple_of(3) || rows.iter().any(|r| r.len() != len) {
            return Err(Error::Argument("realizations must be non-empty with equal length 3N".into()));
        }
        let n_nodes = len / 3;
        Ok(Self::from_fn(n_nodes, n_s, |i, c, r| rows[r][3 * i + c]))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, node: usize, comp: usize, r: usize) -> usize {
        (3 * node + comp) * self.n_s + r
    }

    #[inline]
    pub fn get(&self, node: usize, comp: usize, r: usize) -> f64 {
        self.values[self.index(node, comp, r)]
    }

    #[inline]
    pub fn set(&mut self, node: usize, comp: usize, r: usize, v: f64) {
        let k = self.index(node, comp, r);
        self.values[k] = v;
    }

    /// The `3 n_s` values of one node.
    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[3 * node * self.n_s..3 * (node + 1) * self.n_s]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[3 * node * self.n_s..3 * (node + 1) * self.n_s]
    }

    /// Realization `r` as a flat `3 N` vector.
    pub fn realization(&self, r: usize) -> Vec<f64> {
        (0..3 * self.n_nodes).map(|k| self.values[k * self.n_s + r]).collect()
    }

    /// Single-realization copy of realization `r`.
    pub fn select(&self, r: usize) -> Self {
        Self {
            n_nodes: self.n_nodes,
            n_s: 1,
            values: self.realization(r),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_nodes == other.n_nodes && self.n_s == other.n_s
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Per-realization dot product with `other`.
    pub fn dot_per_realization(&self, other: &Self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_s];
        for (chunk_a, chunk_b) in self.values.chunks(self.n_s).zip(other.values.chunks(self.n_s)) {
            for r in 0..self.n_s {
                out[r] += chunk_a[r] * chunk_b[r];
            }
        }
        out
    }

    /// Displacement magnitude of one node in realization `r`.
    pub fn node_norm(&self, node: usize, r: usize) -> f64 {
        (0..3).map(|c| self.get(node, c, r).powi(2)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_realization_innermost() {
        let v = EnsembleVector::from_fn(2, 3, |i, c, r| (100 * i + 10 * c + r) as f64);
        assert_eq!(&v.values()[..6], &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(v.get(1, 2, 1), 121.0);
        assert_eq!(v.realization(2), vec![2.0, 12.0, 22.0, 102.0, 112.0, 122.0]);
        let back = EnsembleVector::from_realizations(&[v.realization(0), v.realization(1), v.realization(2)]).unwrap();
        assert_eq!(back, v);
        assert_eq!(v.select(1).values(), v.realization(1).as_slice());
    }

    #[test]
    fn shape_errors() {
        assert!(EnsembleVector::from_values(2, 2, vec![0.0; 5]).is_err());
        assert!(EnsembleVector::from_realizations(&[vec![0.0; 3], vec![0.0; 6]]).is_err());
    }
}
