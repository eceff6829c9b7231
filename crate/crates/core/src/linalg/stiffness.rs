use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::shell::{stiffness_scale, unit_stiffness, GaussPointField, Mat9, ShellMaterial};

/// Element stiffness for every (element, realization) pair, stored as
/// `K[e][r] = scale[e][r] * unit[e or (e, r)]`.
///
/// The unit matrix depends only on geometry and Poisson ratio; it is shared
/// across realizations until the geometry is updated per realization.
#[derive(Debug, Clone)]
pub struct ElementStiffnesses {
    n_elements: usize,
    n_s: usize,
    per_realization_unit: bool,
    unit: Vec<Mat9>,
    /// `[element][realization]`
    scale: Vec<f64>,
}

impl ElementStiffnesses {
    /// Shared geometry, per-realization material scale.
    pub fn new(
        mesh: &SurfaceMesh,
        mat: &ShellMaterial,
        modulus: &GaussPointField,
        thickness: &GaussPointField,
    ) -> Result<Self> {
        let unit = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| unit_stiffness(&mesh.element_geometry(e), mat))
            .collect();
        let scale = material_scales(mesh.n_elements(), modulus, thickness)?;
        Ok(Self {
            n_elements: mesh.n_elements(),
            n_s: modulus.n_s,
            per_realization_unit: false,
            unit,
            scale,
        })
    }

    /// One geometry per realization (e.g. after displacing each realization's
    /// mesh by its own displacement).
    pub fn with_geometries(
        meshes: &[SurfaceMesh],
        mat: &ShellMaterial,
        modulus: &GaussPointField,
        thickness: &GaussPointField,
    ) -> Result<Self> {
        let n_s = meshes.len();
        let m = meshes.first().map_or(0, SurfaceMesh::n_elements);
        if n_s != modulus.n_s || meshes.iter().any(|g| g.n_elements() != m) {
            return Err(Error::Argument("one mesh per realization with matching elements is required".into()));
        }
        let unit = (0..m * n_s)
            .into_par_iter()
            .map(|k| unit_stiffness(&meshes[k % n_s].element_geometry(k / n_s), mat))
            .collect();
        Ok(Self {
            n_elements: m,
            n_s,
            per_realization_unit: true,
            unit,
            scale: material_scales(m, modulus, thickness)?,
        })
    }

    /// Explicit matrices, `k[e * n_s + r]`; the scale is one.
    pub fn from_matrices(n_elements: usize, n_s: usize, k: Vec<Mat9>) -> Result<Self> {
        if k.len() != n_elements * n_s {
            return Err(Error::Argument("need one matrix per (element, realization)".into()));
        }
        Ok(Self {
            n_elements,
            n_s,
            per_realization_unit: true,
            unit: k,
            scale: vec![1.0; n_elements * n_s],
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn per_realization_unit(&self) -> bool {
        self.per_realization_unit
    }

    #[inline]
    pub fn unit(&self, e: usize, r: usize) -> &Mat9 {
        if self.per_realization_unit {
            &self.unit[e * self.n_s + r]
        } else {
            &self.unit[e]
        }
    }

    #[inline]
    pub fn scales(&self, e: usize) -> &[f64] {
        &self.scale[e * self.n_s..(e + 1) * self.n_s]
    }

    /// Full 9×9 matrix for one pair.
    pub fn matrix(&self, e: usize, r: usize) -> Mat9 {
        let s = self.scale[e * self.n_s + r];
        let mut k = *self.unit(e, r);
        k.iter_mut().flatten().for_each(|v| *v *= s);
        k
    }

    /// Keeps realization `r` only.
    pub fn select(&self, r: usize) -> Self {
        let unit = if self.per_realization_unit {
            (0..self.n_elements).map(|e| self.unit[e * self.n_s + r]).collect()
        } else {
            self.unit.clone()
        };
        Self {
            n_elements: self.n_elements,
            n_s: 1,
            per_realization_unit: self.per_realization_unit,
            unit,
            scale: (0..self.n_elements).map(|e| self.scale[e * self.n_s + r]).collect(),
        }
    }
}

fn material_scales(m: usize, modulus: &GaussPointField, thickness: &GaussPointField) -> Result<Vec<f64>> {
    if modulus.n_elements != m || thickness.n_elements != m || modulus.n_s != thickness.n_s {
        return Err(Error::Argument("modulus and thickness fields do not match the mesh".into()));
    }
    let n_s = modulus.n_s;
    let mut scale = vec![0.0; m * n_s];
    for e in 0..m {
        for r in 0..n_s {
            let (eg, zg) = (modulus.at(r, e), thickness.at(r, e));
            if eg.iter().chain(&zg).any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Argument(format!(
                    "non-positive material sample in element {e}, realization {r}: E = {eg:?}, zeta = {zg:?}"
                )));
            }
            scale[e * n_s + r] = stiffness_scale(&eg, &zg);
        }
    }
    Ok(scale)
}
