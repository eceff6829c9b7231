use rayon::prelude::*;

use super::stiffness::ElementStiffnesses;
use super::vector::EnsembleVector;
use crate::error::{Error, Result};
use crate::mesh::{Coloring, MeshPartition, SurfaceMesh};

/// `z = K0 · xe` per realization, then `y_node += scale * z`.
///
/// `xe` holds the element's gathered DOFs, `[dof][r]`. The per-realization
/// arithmetic does not depend on `n_s`.
#[inline]
fn element_product(k: &ElementStiffnesses, e: usize, xe: &[f64], z: &mut [f64], n_s: usize) {
    if k.per_realization_unit() {
        for r in 0..n_s {
            let ke = k.unit(e, r);
            for i in 0..9 {
                let mut acc = 0.0;
                for j in 0..9 {
                    acc += ke[i][j] * xe[j * n_s + r];
                }
                z[i * n_s + r] = acc;
            }
        }
    } else {
        let ke = k.unit(e, 0);
        for i in 0..9 {
            let zi = &mut z[i * n_s..(i + 1) * n_s];
            zi.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..9 {
                let kij = ke[i][j];
                let xj = &xe[j * n_s..(j + 1) * n_s];
                for r in 0..n_s {
                    zi[r] += kij * xj[r];
                }
            }
        }
    }
}

#[inline]
fn gather(tri: &[usize; 3], x: &[f64], xe: &mut [f64], n_s: usize) {
    for p in 0..3 {
        let src = &x[3 * tri[p] * n_s..3 * (tri[p] + 1) * n_s];
        xe[3 * p * n_s..3 * (p + 1) * n_s].copy_from_slice(src);
    }
}

#[inline]
fn scatter(tri: &[usize; 3], z: &[f64], scales: &[f64], y: &mut [f64], n_s: usize) {
    for p in 0..3 {
        let dst = &mut y[3 * tri[p] * n_s..3 * (tri[p] + 1) * n_s];
        let src = &z[3 * p * n_s..3 * (p + 1) * n_s];
        for c in 0..3 {
            for r in 0..n_s {
                dst[c * n_s + r] += scales[r] * src[c * n_s + r];
            }
        }
    }
}

struct SharedOut(*mut f64, usize);
unsafe impl Send for SharedOut {}
unsafe impl Sync for SharedOut {}

impl SharedOut {
    /// # Safety
    /// Callers must not create overlapping live slices.
    #[allow(clippy::mut_from_ref)]
    unsafe fn slice(&self) -> &mut [f64] {
        std::slice::from_raw_parts_mut(self.0, self.1)
    }
}

/// Assembly-free stiffness operator: an element loop scheduled by color.
#[derive(Debug, Clone)]
pub struct MatrixFreeOperator {
    n_nodes: usize,
    triangles: Vec<[usize; 3]>,
    groups: Vec<Vec<usize>>,
    k: ElementStiffnesses,
}

impl MatrixFreeOperator {
    pub fn new(mesh: &SurfaceMesh, coloring: &Coloring, k: ElementStiffnesses) -> Result<Self> {
        if k.n_elements() != mesh.n_elements() || coloring.color_of.len() != mesh.n_elements() {
            return Err(Error::Argument("stiffness set or coloring does not match the mesh".into()));
        }
        Ok(Self {
            n_nodes: mesh.n_nodes(),
            triangles: mesh.triangles().to_vec(),
            groups: coloring.groups(),
            k,
        })
    }

    pub fn n_s(&self) -> usize {
        self.k.n_s()
    }

    pub fn stiffness(&self) -> &ElementStiffnesses {
        &self.k
    }

    pub fn apply(&self, x: &EnsembleVector) -> Result<EnsembleVector> {
        let mut y = EnsembleVector::zeros(self.n_nodes, self.n_s());
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    /// Overwrites `y` with `K x`. Every node receives its element
    /// contributions in color order, independent of the worker count.
    pub fn apply_into(&self, x: &EnsembleVector, y: &mut EnsembleVector) -> Result<()> {
        let n_s = self.n_s();
        if x.n_nodes() != self.n_nodes || x.n_s() != n_s || !x.same_shape(y) {
            return Err(Error::Argument("dimension mismatch in matrix-free apply".into()));
        }
        y.fill(0.0);
        let xv = x.values();
        let yv = y.values_mut();
        let out = SharedOut(yv.as_mut_ptr(), yv.len());
        for group in &self.groups {
            group.par_iter().for_each_init(
                || (vec![0.0; 9 * n_s], vec![0.0; 9 * n_s]),
                |(xe, z), &e| {
                    let tri = &self.triangles[e];
                    gather(tri, xv, xe, n_s);
                    element_product(&self.k, e, xe, z, n_s);
                    // SAFETY: elements of one color share no node, so the
                    // node ranges written here are disjoint across workers.
                    let y = unsafe { out.slice() };
                    scatter(tri, z, self.k.scales(e), y, n_s);
                },
            );
        }
        Ok(())
    }
}

/// Matrix-free operator split into mesh partitions, each applied on its own
/// local vector and reconciled through [`sync_shared`].
#[derive(Debug, Clone)]
pub struct PartitionedOperator {
    n_nodes: usize,
    partition: MeshPartition,
    /// Per part: triangles in part-local node numbering, and their global element ids.
    local_triangles: Vec<Vec<[usize; 3]>>,
    k: ElementStiffnesses,
}

impl PartitionedOperator {
    pub fn new(mesh: &SurfaceMesh, partition: MeshPartition, k: ElementStiffnesses) -> Result<Self> {
        if k.n_elements() != mesh.n_elements() || partition.part_of_element.len() != mesh.n_elements() {
            return Err(Error::Argument("stiffness set or partition does not match the mesh".into()));
        }
        let local_triangles = (0..partition.n_parts)
            .map(|p| {
                let nodes = partition.nodes(p);
                partition
                    .elements(p)
                    .iter()
                    .map(|&e| mesh.triangles()[e].map(|v| nodes.binary_search(&v).expect("part node")))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_nodes: mesh.n_nodes(),
            partition,
            local_triangles,
            k,
        })
    }

    pub fn partition(&self) -> &MeshPartition {
        &self.partition
    }

    pub fn n_s(&self) -> usize {
        self.k.n_s()
    }

    /// Per-part local products before synchronization.
    pub fn local_products(&self, x: &EnsembleVector) -> Vec<EnsembleVector> {
        let n_s = self.n_s();
        let xv = x.values();
        (0..self.partition.n_parts)
            .into_par_iter()
            .map(|p| {
                let nodes = self.partition.nodes(p);
                let mut local_x = vec![0.0; 3 * nodes.len() * n_s];
                for (l, &g) in nodes.iter().enumerate() {
                    local_x[3 * l * n_s..3 * (l + 1) * n_s].copy_from_slice(&xv[3 * g * n_s..3 * (g + 1) * n_s]);
                }
                let mut y = EnsembleVector::zeros(nodes.len(), n_s);
                let mut xe = vec![0.0; 9 * n_s];
                let mut z = vec![0.0; 9 * n_s];
                for (tri, &e) in self.local_triangles[p].iter().zip(self.partition.elements(p)) {
                    gather(tri, &local_x, &mut xe, n_s);
                    element_product(&self.k, e, &xe, &mut z, n_s);
                    scatter(tri, &z, self.k.scales(e), y.values_mut(), n_s);
                }
                y
            })
            .collect()
    }

    pub fn apply(&self, x: &EnsembleVector) -> Result<EnsembleVector> {
        let mut y = EnsembleVector::zeros(self.n_nodes, self.n_s());
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &EnsembleVector, y: &mut EnsembleVector) -> Result<()> {
        if x.n_nodes() != self.n_nodes || x.n_s() != self.n_s() || !x.same_shape(y) {
            return Err(Error::Argument("dimension mismatch in partitioned apply".into()));
        }
        let mut locals = self.local_products(x);
        sync_shared(&self.partition, &mut locals)?;
        let n_s = self.n_s();
        y.fill(0.0);
        let yv = y.values_mut();
        for (p, local) in locals.iter().enumerate() {
            for (l, &g) in self.partition.nodes(p).iter().enumerate() {
                yv[3 * g * n_s..3 * (g + 1) * n_s].copy_from_slice(local.node(l));
            }
        }
        Ok(())
    }
}

/// Sums shared-node entries over the parts that own them, in ascending part
/// order, and writes the total back to every owner. `locals[p]` is indexed by
/// position in `partition.nodes(p)`.
pub fn sync_shared(partition: &MeshPartition, locals: &mut [EnsembleVector]) -> Result<()> {
    if locals.len() != partition.n_parts {
        return Err(Error::Argument("one local vector per part is required".into()));
    }
    if partition.n_parts == 1 {
        return Ok(());
    }
    let n_s = locals[0].n_s();
    let mut totals: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
    for p in 0..partition.n_parts {
        if locals[p].n_nodes() != partition.nodes(p).len() {
            return Err(Error::Argument(format!("local vector of part {p} has the wrong size")));
        }
        let nodes = partition.nodes(p);
        for &g in &partition.shared_nodes[p] {
            let l = nodes.binary_search(&g).expect("shared node owned by part");
            let t = totals.entry(g).or_insert_with(|| vec![0.0; 3 * n_s]);
            for (d, s) in t.iter_mut().zip(locals[p].node(l)) {
                *d += s;
            }
        }
    }
    for p in 0..partition.n_parts {
        let nodes = partition.nodes(p);
        for &g in &partition.shared_nodes[p] {
            let l = nodes.binary_search(&g).expect("shared node owned by part");
            locals[p].node_mut(l).copy_from_slice(&totals[&g]);
        }
    }
    Ok(())
}
