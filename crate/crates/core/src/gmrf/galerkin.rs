use super::sparse::CsrMatrix;
use crate::mesh::SurfaceMesh;

/// P1 mass and stiffness matrices on the surface mesh.
#[derive(Debug, Clone)]
pub struct GalerkinMatrices {
    pub c: CsrMatrix,
    pub g: CsrMatrix,
    pub c_lumped: Vec<f64>,
}

/// Element mass and stiffness in the element's local 2D frame.
pub fn element_matrices(local: &[[f64; 2]; 3], area: f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        b[i] = local[j][1] - local[k][1];
        c[i] = local[k][0] - local[j][0];
    }
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    (m, g)
}

pub fn assemble_galerkin(mesh: &SurfaceMesh) -> GalerkinMatrices {
    let n = mesh.n_nodes();
    let mut tc = Vec::with_capacity(9 * mesh.n_elements());
    let mut tg = Vec::with_capacity(9 * mesh.n_elements());
    let mut c_lumped = vec![0.0; n];
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let geo = mesh.element_geometry(e);
        let (me, ge) = element_matrices(&geo.local_coords, geo.area);
        for a in 0..3 {
            for b in 0..3 {
                tc.push((tri[a], tri[b], me[a][b]));
                tg.push((tri[a], tri[b], ge[a][b]));
            }
            c_lumped[tri[a]] += geo.area / 3.0;
        }
    }
    GalerkinMatrices {
        c: CsrMatrix::from_triplets(n, n, &tc).expect("mesh indices validated"),
        g: CsrMatrix::from_triplets(n, n, &tg).expect("mesh indices validated"),
        c_lumped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cylinder_mesh;
    use std::collections::BTreeMap;

    fn unit_square() -> SurfaceMesh {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        SurfaceMesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]], BTreeMap::new()).unwrap()
    }

    #[test]
    fn single_triangle_lumped() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mesh = SurfaceMesh::new(nodes, vec![[0, 1, 2]], BTreeMap::new()).unwrap();
        let gm = assemble_galerkin(&mesh);
        for v in &gm.c_lumped {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
        let rs = gm.c.row_sums();
        for (a, b) in rs.iter().zip(&gm.c_lumped) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_square_laplacian() {
        let gm = assemble_galerkin(&unit_square());
        let want = [
            [1.0, -0.5, 0.0, -0.5],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [-0.5, 0.0, -0.5, 1.0],
        ];
        let got = gm.g.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((got[i][j] - want[i][j]).abs() < 1e-14, "G[{i}][{j}] = {}", got[i][j]);
            }
        }
    }

    #[test]
    fn cylinder_properties() {
        let mesh = generate_cylinder_mesh(4.0, 10.0, 12, 8).unwrap();
        let gm = assemble_galerkin(&mesh);
        assert_eq!(gm.g.max_asymmetry(), 0.0);
        assert!(gm.c.max_asymmetry() < 1e-18);
        for s in gm.g.row_sums() {
            assert!(s.abs() < 1e-12);
        }
        let total: f64 = gm.c_lumped.iter().sum();
        assert!((total - mesh.total_area()).abs() < 1e-10 * total);
        for i in 0..mesh.n_nodes() {
            let mut pattern: Vec<usize> = gm.g.row(i).map(|(j, _)| j).collect();
            let mut ring: Vec<usize> = mesh.neighbors(i).to_vec();
            ring.push(i);
            ring.sort_unstable();
            pattern.sort_unstable();
            assert_eq!(pattern, ring);
        }
    }
}
