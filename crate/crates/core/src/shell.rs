//! Three-DOF linear triangular shell: membrane plus transverse shear, no
//! rotational unknowns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Mat3;
use crate::gmrf::FieldEnsemble;
use crate::mesh::{ElementGeometry, SurfaceMesh};

pub type Mat9 = [[f64; 9]; 9];
pub type Mat5x9 = [[f64; 9]; 5];
pub type Mat5 = [[f64; 5]; 5];

/// Interior 3-point rule: barycentric coordinates of the Gauss points.
pub const GAUSS_POINTS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];
pub const GAUSS_WEIGHTS: [f64; 3] = [1.0 / 3.0; 3];
pub const N_GP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShellMaterial {
    pub poisson: f64,
    pub shear_factor: f64,
    /// g/cm³
    pub density: f64,
}

impl Default for ShellMaterial {
    fn default() -> Self {
        Self {
            poisson: 0.3,
            shear_factor: 5.0 / 6.0,
            density: 1.06,
        }
    }
}

impl ShellMaterial {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(Error::Argument(format!("Poisson ratio {} outside [0, 0.5)", self.poisson)));
        }
        if !(self.shear_factor > 0.0 && self.shear_factor.is_finite()) {
            return Err(Error::Argument(format!("shear factor {} must be positive", self.shear_factor)));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::Argument(format!("density {} must be positive", self.density)));
        }
        Ok(())
    }
}

/// Strain-displacement matrix for local nodal displacements ordered
/// `(ux1, uy1, uz1, ux2, ...)`. Rows: exx, eyy, gxy, duz/dx, duz/dy.
pub fn strain_displacement_matrix(local: &[[f64; 2]; 3], area: f64) -> Mat5x9 {
    let [[x1, y1], [x2, y2], [x3, y3]] = *local;
    let dx = [y2 - y3, y3 - y1, y1 - y2];
    let dy = [x3 - x2, x1 - x3, x2 - x1];
    let f = 1.0 / (2.0 * area);
    let mut b = [[0.0; 9]; 5];
    for a in 0..3 {
        let (bx, by) = (dx[a] * f, dy[a] * f);
        b[0][3 * a] = bx;
        b[1][3 * a + 1] = by;
        b[2][3 * a] = by;
        b[2][3 * a + 1] = bx;
        b[3][3 * a + 2] = bx;
        b[4][3 * a + 2] = by;
    }
    b
}

pub fn constitutive_matrix(e: f64, mat: &ShellMaterial) -> Mat5 {
    let nu = mat.poisson;
    let f = e / (1.0 - nu * nu);
    let mut c = [[0.0; 5]; 5];
    c[0][0] = f;
    c[1][1] = f;
    c[0][1] = f * nu;
    c[1][0] = f * nu;
    c[2][2] = f * 0.5 * (1.0 - nu);
    c[3][3] = f * 0.5 * mat.shear_factor * (1.0 - nu);
    c[4][4] = c[3][3];
    c
}

/// `Bᵀ C B`.
pub fn btcb(b: &Mat5x9, c: &Mat5) -> Mat9 {
    let mut cb = [[0.0; 9]; 5];
    for i in 0..5 {
        for j in 0..9 {
            cb[i][j] = (0..5).map(|k| c[i][k] * b[k][j]).sum();
        }
    }
    let mut k = [[0.0; 9]; 9];
    for i in 0..9 {
        for j in 0..9 {
            k[i][j] = (0..5).map(|m| b[m][i] * cb[m][j]).sum();
        }
    }
    k
}

/// `Tᵀ k T` with `T` the block-diagonal rotation whose blocks have the local
/// axes as rows.
pub fn rotate_to_global(k: &Mat9, frame: &Mat3) -> Mat9 {
    let mut kt = [[0.0; 9]; 9];
    for i in 0..9 {
        for b in 0..3 {
            for j in 0..3 {
                kt[i][3 * b + j] = (0..3).map(|q| k[i][3 * b + q] * frame[q][j]).sum();
            }
        }
    }
    let mut out = [[0.0; 9]; 9];
    for a in 0..3 {
        for i in 0..3 {
            for j in 0..9 {
                out[3 * a + i][j] = (0..3).map(|p| frame[p][i] * kt[3 * a + p][j]).sum();
            }
        }
    }
    out
}

/// Global stiffness for unit modulus and unit thickness, `A Tᵀ Bᵀ C(1) B T`.
/// The element stiffness for Gauss-point values `E_i`, `ζ_i` is this matrix
/// times [`stiffness_scale`].
pub fn unit_stiffness(geo: &ElementGeometry, mat: &ShellMaterial) -> Mat9 {
    let b = strain_displacement_matrix(&geo.local_coords, geo.area);
    let mut k = btcb(&b, &constitutive_matrix(1.0, mat));
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v *= geo.area;
        }
    }
    rotate_to_global(&k, &geo.frame)
}

/// `Σ w_i E_i ζ_i`.
pub fn stiffness_scale(e_gp: &[f64; 3], zeta_gp: &[f64; 3]) -> f64 {
    (0..N_GP).map(|i| GAUSS_WEIGHTS[i] * e_gp[i] * zeta_gp[i]).sum()
}

/// Global element stiffness `Σ_i Tᵀ Bᵀ C(E_i) B T A ζ_i w_i`.
pub fn element_stiffness(geo: &ElementGeometry, mat: &ShellMaterial, e_gp: &[f64; 3], zeta_gp: &[f64; 3]) -> Result<Mat9> {
    if e_gp.iter().chain(zeta_gp).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Argument(format!(
            "non-positive material values at Gauss points: E = {e_gp:?}, zeta = {zeta_gp:?}"
        )));
    }
    let b = strain_displacement_matrix(&geo.local_coords, geo.area);
    let mut k = [[0.0; 9]; 9];
    for i in 0..N_GP {
        let ki = btcb(&b, &constitutive_matrix(e_gp[i], mat));
        let f = geo.area * zeta_gp[i] * GAUSS_WEIGHTS[i];
        for r in 0..9 {
            for c in 0..9 {
                k[r][c] += ki[r][c] * f;
            }
        }
    }
    Ok(rotate_to_global(&k, &geo.frame))
}

/// Gauss-point values of a nodal field, `[realization][element][gauss point]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPointField {
    pub n_elements: usize,
    pub n_s: usize,
    pub values: Vec<f64>,
}

impl GaussPointField {
    pub fn at(&self, r: usize, e: usize) -> [f64; 3] {
        let o = (r * self.n_elements + e) * N_GP;
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    /// Same value everywhere.
    pub fn uniform(n_elements: usize, n_s: usize, v: f64) -> Self {
        Self {
            n_elements,
            n_s,
            values: vec![v; n_elements * n_s * N_GP],
        }
    }

    /// Element mean of the Gauss-point values.
    pub fn element_mean(&self, r: usize, e: usize) -> f64 {
        self.at(r, e).iter().sum::<f64>() / N_GP as f64
    }

    /// Keeps only realization `r`.
    pub fn select(&self, r: usize) -> Self {
        let len = self.n_elements * N_GP;
        Self {
            n_elements: self.n_elements,
            n_s: 1,
            values: self.values[r * len..(r + 1) * len].to_vec(),
        }
    }
}

pub fn gauss_point_fields(mesh: &SurfaceMesh, nodal: &FieldEnsemble) -> Result<GaussPointField> {
    if nodal.n_nodes != mesh.n_nodes() {
        return Err(Error::Argument(format!(
            "field has {} nodes, mesh has {}",
            nodal.n_nodes,
            mesh.n_nodes()
        )));
    }
    let m = mesh.n_elements();
    let mut values = Vec::with_capacity(nodal.n_s() * m * N_GP);
    for r in 0..nodal.n_s() {
        let x = nodal.realization(r);
        for t in mesh.triangles() {
            let x0 = x[t[0]];
            for g in GAUSS_POINTS {
                // Difference form keeps constant fields exact.
                values.push(x0 + g[1] * (x[t[1]] - x0) + g[2] * (x[t[2]] - x0));
            }
        }
    }
    Ok(GaussPointField {
        n_elements: m,
        n_s: nodal.n_s(),
        values,
    })
}

/// Lumped nodal mass `[node][realization]`: each element contributes
/// `ρ A ζ̄ / 3` to its nodes, `ζ̄` the mean Gauss-point thickness.
pub fn lumped_mass(mesh: &SurfaceMesh, zeta: &GaussPointField, mat: &ShellMaterial) -> Vec<f64> {
    let n_s = zeta.n_s;
    let mut m = vec![0.0; mesh.n_nodes() * n_s];
    for (e, t) in mesh.triangles().iter().enumerate() {
        let a3 = mat.density * mesh.element_area(e) / 3.0;
        for r in 0..n_s {
            let share = a3 * zeta.element_mean(r, e);
            for &v in t {
                m[v * n_s + r] += share;
            }
        }
    }
    m
}

/// Same mass for all realizations from a nominal thickness.
pub fn nominal_lumped_mass(mesh: &SurfaceMesh, zeta: f64, mat: &ShellMaterial, n_s: usize) -> Vec<f64> {
    lumped_mass(mesh, &GaussPointField::uniform(mesh.n_elements(), n_s, zeta), mat)
}

/// Local stress `(σxx, σyy, τxy, τxz, τyz)` at each Gauss point.
pub fn recover_stress(geo: &ElementGeometry, u_global: &[f64; 9], e_gp: &[f64; 3], mat: &ShellMaterial) -> [[f64; 5]; 3] {
    let b = strain_displacement_matrix(&geo.local_coords, geo.area);
    let mut ul = [0.0; 9];
    for a in 0..3 {
        for p in 0..3 {
            ul[3 * a + p] = (0..3).map(|j| geo.frame[p][j] * u_global[3 * a + j]).sum();
        }
    }
    let eps: Vec<f64> = (0..5).map(|i| (0..9).map(|j| b[i][j] * ul[j]).sum()).collect();
    let mut out = [[0.0; 5]; 3];
    for (g, s) in out.iter_mut().enumerate() {
        let c = constitutive_matrix(e_gp[g], mat);
        for i in 0..5 {
            s[i] = (0..5).map(|k| c[i][k] * eps[k]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrf::MaternParams;
    use crate::mesh::{generate_cylinder_mesh, triangle_geometry};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn mat_mul9(k: &Mat9, u: &[f64; 9]) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..9 {
            out[i] = (0..9).map(|j| k[i][j] * u[j]).sum();
        }
        out
    }

    fn max_abs(k: &Mat9) -> f64 {
        k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn rotation(ax: f64, ay: f64, az: f64) -> Mat3 {
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        let mul = |a: Mat3, b: Mat3| {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            c
        };
        mul(rz, mul(ry, rx))
    }

    fn apply(r: &Mat3, p: [f64; 3]) -> [f64; 3] {
        crate::geom::mat_vec(r, p)
    }

    #[test]
    fn rigid_translation_has_no_strain() {
        let local = [[0.3, -0.2], [1.7, 0.4], [0.1, 2.2]];
        let area = 0.5 * ((1.4f64) * 2.4 - 0.6 * (-0.2));
        let b = strain_displacement_matrix(&local, area);
        let u = [0.7, -1.1, 2.5, 0.7, -1.1, 2.5, 0.7, -1.1, 2.5];
        for row in b {
            let s: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn unit_triangle_uniform_stretch() {
        let b = strain_displacement_matrix(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0.5);
        let u = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let eps: Vec<f64> = (0..5).map(|i| (0..9).map(|j| b[i][j] * u[j]).sum()).collect();
        assert_eq!(eps, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_fields_give_constant_strain() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let p: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
            let local = [p[0], p[1], p[2]];
            let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            if area2.abs() < 0.1 {
                continue;
            }
            // Counter-clockwise order for positive area.
            let local = if area2 > 0.0 { local } else { [local[0], local[2], local[1]] };
            let area = 0.5 * area2.abs();
            let b = strain_displacement_matrix(&local, area);
            let g: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            // ux = g0 x + g1 y, uy = g2 x + g3 y, uz = g4 x + g5 y
            let mut u = [0.0; 9];
            for a in 0..3 {
                let [x, y] = local[a];
                u[3 * a] = g[0] * x + g[1] * y;
                u[3 * a + 1] = g[2] * x + g[3] * y;
                u[3 * a + 2] = g[4] * x + g[5] * y;
            }
            let want = [g[0], g[3], g[1] + g[2], g[4], g[5]];
            for i in 0..5 {
                let got: f64 = (0..9).map(|j| b[i][j] * u[j]).sum();
                assert!((got - want[i]).abs() < 1e-12, "row {i}: {got} vs {}", want[i]);
            }
        }
    }

    #[test]
    fn constitutive_plug_in() {
        let m = ShellMaterial { poisson: 0.0, shear_factor: 1.0, density: 1.0 };
        let c = constitutive_matrix(1.0, &m);
        for i in 0..5 {
            for j in 0..5 {
                let want = match (i, j) {
                    (0, 0) | (1, 1) => 1.0,
                    (2, 2) | (3, 3) | (4, 4) => 0.5,
                    _ => 0.0,
                };
                assert_eq!(c[i][j], want);
            }
        }
        let c = constitutive_matrix(1.0, &ShellMaterial { poisson: 0.3, ..m });
        assert!((c[0][0] - 1.0 / 0.91).abs() < 1e-15);
        assert!((c[0][1] - 0.3 / 0.91).abs() < 1e-15);
        for nu in [0.0, 0.25, 0.49] {
            let c = constitutive_matrix(1.0, &ShellMaterial { poisson: nu, shear_factor: 5.0 / 6.0, density: 1.0 });
            // Block-diagonal: the 2x2 block has eigenvalues f(1 +- nu).
            assert!(c[0][0] - c[0][1] > 0.0 && c[2][2] > 0.0 && c[3][3] > 0.0);
        }
    }

    #[test]
    fn material_validation() {
        assert!(ShellMaterial::default().validate().is_ok());
        assert!(ShellMaterial { poisson: 0.5, ..Default::default() }.validate().is_err());
        assert!(ShellMaterial { density: 0.0, ..Default::default() }.validate().is_err());
        assert!(ShellMaterial { shear_factor: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn uniform_collapse_and_scaling() {
        let geo = triangle_geometry([0.1, 0.2, 0.3], [1.3, 0.1, 0.7], [0.4, 1.5, -0.2]);
        let mat = ShellMaterial::default();
        let k = element_stiffness(&geo, &mat, &[2.0; 3], &[0.4; 3]).unwrap();
        let k0 = unit_stiffness(&geo, &mat);
        let k2 = element_stiffness(&geo, &mat, &[2.0; 3], &[0.8; 3]).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert!((k[i][j] - 0.8 * k0[i][j]).abs() < 1e-13 * max_abs(&k));
                assert!((k2[i][j] - 2.0 * k[i][j]).abs() < 1e-13 * max_abs(&k));
            }
        }
        assert!(element_stiffness(&geo, &mat, &[2.0, 0.0, 1.0], &[0.4; 3]).is_err());
    }

    #[test]
    fn linear_modulus_matches_exact_integral() {
        // With E linear over the element and constant thickness the integrand
        // is linear, so the exact integral is A ζ Bᵀ C(E_centroid) B.
        let geo = triangle_geometry([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.5, 1.5, 0.0]);
        let mat = ShellMaterial::default();
        let nodal_e = [1.0, 3.0, 8.0];
        let e_gp: [f64; 3] = std::array::from_fn(|g| (0..3).map(|a| GAUSS_POINTS[g][a] * nodal_e[a]).sum());
        let k = element_stiffness(&geo, &mat, &e_gp, &[0.4; 3]).unwrap();
        let centroid_e = nodal_e.iter().sum::<f64>() / 3.0;
        let k0 = unit_stiffness(&geo, &mat);
        for i in 0..9 {
            for j in 0..9 {
                assert!((k[i][j] - 0.4 * centroid_e * k0[i][j]).abs() < 1e-12 * max_abs(&k));
            }
        }
    }

    #[test]
    fn gauss_interpolation() {
        let mesh = SurfaceMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
        )
        .unwrap();
        let ens = FieldEnsemble {
            n_nodes: 3,
            mean: 0.0,
            params: MaternParams::new(1.0, 1.0, 1.0).unwrap(),
            seed: 0,
            realizations: vec![0, 1],
            nodal_values: vec![1.0, 0.0, 0.0, 4.0, 4.0, 4.0],
        };
        let gp = gauss_point_fields(&mesh, &ens).unwrap();
        for (got, want) in gp.at(0, 0).iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(gp.at(1, 0), [4.0; 3]);
        assert!((gp.element_mean(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(gp.select(1).values, vec![4.0; 3]);
    }

    #[test]
    fn single_triangle_mass() {
        let mesh = SurfaceMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
        )
        .unwrap();
        let mat = ShellMaterial { density: 1.0, ..Default::default() };
        let m = nominal_lumped_mass(&mesh, 0.1, &mat, 1);
        for v in m {
            assert!((v - 0.5 * 0.1 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cylinder_total_mass() {
        let mesh = generate_cylinder_mesh(4.0, 30.0, 32, 40).unwrap();
        let mat = ShellMaterial::default();
        let m = nominal_lumped_mass(&mesh, 0.4, &mat, 2);
        let total: f64 = m.iter().step_by(2).sum();
        let want = std::f64::consts::PI * 4.0 * 30.0 * 0.4 * 1.06;
        assert!((total / want - 1.0).abs() < 0.02);
        let exact: f64 = (0..mesh.n_elements()).map(|e| mesh.element_area(e)).sum::<f64>() * 0.4 * 1.06;
        assert!((total - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn stress_cases() {
        let geo = triangle_geometry([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let m0 = ShellMaterial { poisson: 0.0, ..Default::default() };
        let e = 5.0e6;
        let rigid = [0.3, 0.2, -0.1, 0.3, 0.2, -0.1, 0.3, 0.2, -0.1];
        for s in recover_stress(&geo, &rigid, &[e; 3], &m0) {
            assert!(s.iter().all(|v| v.abs() < 1e-6));
        }
        let d = 1e-3;
        let uni = [0.0, 0.0, 0.0, d, 0.0, 0.0, 0.0, 0.0, 0.0];
        for s in recover_stress(&geo, &uni, &[e; 3], &m0) {
            assert!((s[0] - e * d).abs() < 1e-9 * e * d);
            assert!(s[1].abs() < 1e-9 * e * d);
        }
        let m3 = ShellMaterial { poisson: 0.3, ..Default::default() };
        let bi = [0.0, 0.0, 0.0, d, 0.0, 0.0, 0.0, d, 0.0];
        for s in recover_stress(&geo, &bi, &[e; 3], &m3) {
            let want = e * d / 0.7;
            assert!((s[0] - want).abs() < 1e-9 * want && (s[1] - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn patch_test_constant_stress() {
        // Irregular flat patch in a tilted plane under uniform membrane strain.
        let r = rotation(0.4, -0.7, 1.1);
        let pts2 = [[0.0, 0.0], [1.0, 0.1], [2.1, 0.0], [0.1, 0.9], [1.2, 1.3], [2.0, 1.1], [0.0, 2.0], [1.1, 2.2], [2.2, 2.1]];
        let tris = [[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4], [3, 4, 7], [3, 7, 6], [4, 5, 8], [4, 8, 7]];
        let (exx, eyy, gxy) = (1e-3, -4e-4, 6e-4);
        let mat = ShellMaterial::default();
        let e = 7.0e6;
        let mut first: Option<[f64; 5]> = None;
        for t in tris {
            let p: Vec<[f64; 3]> = t.iter().map(|&i| apply(&r, [pts2[i][0], pts2[i][1], 0.0])).collect();
            let geo = triangle_geometry(p[0], p[1], p[2]);
            let mut u = [0.0; 9];
            for a in 0..3 {
                let [x, y] = pts2[t[a]];
                let ul = [exx * x + 0.5 * gxy * y, 0.5 * gxy * x + eyy * y, 0.0];
                let ug = apply(&r, ul);
                u[3 * a..3 * a + 3].copy_from_slice(&ug);
            }
            for s in recover_stress(&geo, &u, &[e; 3], &mat) {
                // Stress invariants in the plane do not depend on the element frame.
                let tr = s[0] + s[1];
                let det = s[0] * s[1] - s[2] * s[2];
                assert!(s[3].abs() < 1e-8 * tr.abs() && s[4].abs() < 1e-8 * tr.abs());
                match first {
                    None => first = Some([tr, det, 0.0, 0.0, 0.0]),
                    Some(f) => {
                        assert!((tr - f[0]).abs() < 1e-8 * f[0].abs());
                        assert!((det - f[1]).abs() < 1e-8 * f[1].abs());
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn rigid_nullity_and_symmetry(
            p in prop::array::uniform9(-3.0f64..3.0),
            e in prop::array::uniform3(1e5f64..1e7),
            z in prop::array::uniform3(0.05f64..1.0),
            t in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let a = [p[0], p[1], p[2]];
            let b = [p[3], p[4], p[5]];
            let c = [p[6], p[7], p[8]];
            prop_assume!(crate::mesh::triangle_area(a, b, c) > 0.05);
            let geo = triangle_geometry(a, b, c);
            let k = element_stiffness(&geo, &ShellMaterial::default(), &e, &z).unwrap();
            let km = max_abs(&k);
            for i in 0..9 {
                for j in 0..9 {
                    prop_assert!((k[i][j] - k[j][i]).abs() <= 1e-10 * km);
                }
            }
            let u = [t[0], t[1], t[2], t[0], t[1], t[2], t[0], t[1], t[2]];
            let tn = (3.0 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2])).sqrt();
            let ku = mat_mul9(&k, &u);
            let kun = ku.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(kun <= 1e-10 * km * tn.max(1e-300) * 9.0);
        }

        #[test]
        fn frame_objectivity(
            p in prop::array::uniform9(-3.0f64..3.0),
            ang in prop::array::uniform3(-3.1f64..3.1),
        ) {
            let a = [p[0], p[1], p[2]];
            let b = [p[3], p[4], p[5]];
            let c = [p[6], p[7], p[8]];
            prop_assume!(crate::mesh::triangle_area(a, b, c) > 0.05);
            let mat = ShellMaterial::default();
            let k = unit_stiffness(&triangle_geometry(a, b, c), &mat);
            let r = rotation(ang[0], ang[1], ang[2]);
            let kr = unit_stiffness(&triangle_geometry(apply(&r, a), apply(&r, b), apply(&r, c)), &mat);
            // Rotating back: K = Rᵀ_blk K_r R_blk.
            let back = rotate_to_global(&kr, &r);
            let km = max_abs(&k);
            for i in 0..9 {
                for j in 0..9 {
                    prop_assert!((back[i][j] - k[i][j]).abs() <= 1e-9 * km);
                }
            }
        }

        #[test]
        fn positive_semidefinite(
            p in prop::array::uniform9(-3.0f64..3.0),
            u in prop::array::uniform9(-1.0f64..1.0),
        ) {
            let a = [p[0], p[1], p[2]];
            let b = [p[3], p[4], p[5]];
            let c = [p[6], p[7], p[8]];
            prop_assume!(crate::mesh::triangle_area(a, b, c) > 0.05);
            let k = unit_stiffness(&triangle_geometry(a, b, c), &ShellMaterial::default());
            let ku = mat_mul9(&k, &u);
            let q: f64 = ku.iter().zip(&u).map(|(x, y)| x * y).sum();
            prop_assert!(q >= -1e-10 * max_abs(&k));
        }
    }
}
