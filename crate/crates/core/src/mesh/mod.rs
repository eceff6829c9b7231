//! Triangulated lumen surfaces: validation, geometry queries, partitioning and
//! coloring.

mod centerline;
mod coloring;
mod generate;
mod io;
mod partition;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};

pub use centerline::{nearest_centerline_frame, Centerline, CylindricalTriad};
pub use coloring::{mesh_coloring, Coloring};
pub use generate::{cylinder_generator_line, generate_cylinder_mesh};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use partition::{partition_mesh, MeshPartition};

/// A validated triangulated surface.
///
/// Every triangle references three distinct nodes, has strictly positive area,
/// and every edge is shared by at most two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    nodes: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
}

/// Geometry of one element in its own local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub normal: Vec3,
    /// Rows are the local axes `e1`, `e2`, `e3`; `e3` is the unit normal.
    pub frame: Mat3,
    /// In-plane local coordinates of the three nodes.
    pub local_coords: [[f64; 2]; 3],
    /// Common local out-of-plane coordinate of the three nodes.
    pub local_z: f64,
}

impl SurfaceMesh {
    pub fn new(
        nodes: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        boundary_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let n = nodes.len();
        for (i, p) in nodes.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!("node {i} has non-finite coordinates")));
            }
        }
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Validation(format!(
                    "element {e} references a node index out of range (N = {n})"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Validation(format!("element {e} repeats a node index")));
            }
            let area = triangle_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if !(area > 0.0) {
                return Err(Error::Validation(format!("element {e} is degenerate (zero area)")));
            }
        }

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some(((a, b), c)) = edge_count
            .iter()
            .filter(|(_, &c)| c > 2)
            .min_by_key(|(&edge, _)| edge)
        {
            return Err(Error::Validation(format!(
                "non-manifold edge ({a}, {b}) is shared by {c} triangles"
            )));
        }

        let mut boundary_sets = boundary_sets;
        for (name, set) in boundary_sets.iter_mut() {
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&v| v >= n) {
                return Err(Error::Validation(format!(
                    "boundary set {name:?} references node {bad} out of range"
                )));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edge_count.keys() {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        Ok(Self {
            nodes,
            triangles,
            boundary_sets,
            adjacency,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.boundary_sets
    }

    pub fn boundary_set(&self, name: &str) -> Result<&[usize]> {
        self.boundary_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("unknown boundary set {name:?}")))
    }

    /// Sorted one-ring neighbors of `node` (excluding the node itself).
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn element_nodes(&self, e: usize) -> [Vec3; 3] {
        let t = self.triangles[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_nodes(e);
        triangle_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    pub fn element_geometry(&self, e: usize) -> ElementGeometry {
        let [a, b, c] = self.element_nodes(e);
        triangle_geometry(a, b, c)
    }

    /// Elements incident to each node, in ascending element order.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes()];
        for (e, t) in self.triangles.iter().enumerate() {
            for &v in t {
                out[v].push(e);
            }
        }
        out
    }

    /// Tributary area of every node (one third of each incident element).
    pub fn tributary_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (e, t) in self.triangles.iter().enumerate() {
            let a3 = self.element_area(e) / 3.0;
            for &v in t {
                out[v] += a3;
            }
        }
        out
    }

    /// A copy of the mesh with node coordinates displaced by `u`.
    pub fn displaced(&self, u: &[Vec3]) -> Result<Self> {
        if u.len() != self.n_nodes() {
            return Err(Error::Argument(format!(
                "displacement has {} entries, mesh has {} nodes",
                u.len(),
                self.n_nodes()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(u)
            .map(|(&p, &d)| geom::add(p, d))
            .collect();
        SurfaceMesh::new(nodes, self.triangles.clone(), self.boundary_sets.clone())
    }
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a)))
}

/// Local frame: `e1` along the first edge, `e3` the unit normal, `e2 = e3 × e1`.
/// Local coordinates are the projections of the absolute node positions.
pub fn triangle_geometry(a: Vec3, b: Vec3, c: Vec3) -> ElementGeometry {
    let ab = geom::sub(b, a);
    let ac = geom::sub(c, a);
    let n = geom::cross(ab, ac);
    let area = 0.5 * geom::norm(n);
    let e3 = geom::normalize(n).unwrap_or([0.0, 0.0, 1.0]);
    let e1 = geom::normalize(ab).unwrap_or([1.0, 0.0, 0.0]);
    let e2 = geom::cross(e3, e1);
    let frame = [e1, e2, e3];
    let local = |p: Vec3| [geom::dot(e1, p), geom::dot(e2, p)];
    ElementGeometry {
        area,
        normal: e3,
        frame,
        local_coords: [local(a), local(b), local(c)],
        local_z: geom::dot(e3, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> SurfaceMesh {
        SurfaceMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_area() {
        let m = single();
        assert_eq!(m.n_nodes(), 3);
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.element_area(0), 0.5);
    }

    #[test]
    fn rejects_zero_area() {
        let err = SurfaceMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("element 0"), "{err}");
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let tris = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let err = SurfaceMesh::new(nodes, tris, BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = generate_cylinder_mesh(2.0, 3.0, 7, 4).unwrap();
        for i in 0..m.n_nodes() {
            for &j in m.neighbors(i) {
                assert!(m.neighbors(j).binary_search(&i).is_ok());
            }
        }
    }

    #[test]
    fn geometry_in_xy_plane() {
        let g = triangle_geometry([0.3, 0.1, 0.0], [1.2, 0.4, 0.0], [0.5, 1.5, 0.0]);
        assert!((g.normal[2].abs() - 1.0).abs() < 1e-15);
        // in-plane rotation preserves pairwise distances
        let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let l = g.local_coords;
        assert!((d(l[0], l[1]) - (0.9f64.powi(2) + 0.3f64.powi(2)).sqrt()).abs() < 1e-14);
        assert!((d(l[0], l[2]) - (0.2f64.powi(2) + 1.4f64.powi(2)).sqrt()).abs() < 1e-14);
        assert!(g.local_z.abs() < 1e-15);
    }

    #[test]
    fn equilateral_area() {
        let h = 3f64.sqrt() / 2.0;
        let g = triangle_geometry([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]);
        assert!((g.area - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn frame_is_orthonormal_and_planar() {
        let (a, b, c) = ([0.1, -0.4, 2.0], [1.3, 0.2, 1.1], [-0.7, 0.9, 0.4]);
        let g = triangle_geometry(a, b, c);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((geom::dot(g.frame[i], g.frame[j]) - want).abs() < 1e-14);
            }
        }
        for p in [a, b, c] {
            assert!((geom::dot(g.frame[2], p) - g.local_z).abs() < 1e-14);
        }
        let half_cross = 0.5 * geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a)));
        assert!((g.area - half_cross).abs() < 1e-15);
    }

    #[test]
    fn area_invariant_under_rotation() {
        let (a, b, c) = ([0.1, -0.4, 2.0], [1.3, 0.2, 1.1], [-0.7, 0.9, 0.4]);
        let (s, co) = (0.7f64.sin(), 0.7f64.cos());
        let rot = |p: Vec3| [co * p[0] - s * p[1], s * p[0] + co * p[1], p[2]];
        let rot2 = |p: Vec3| [p[0], co * p[1] - s * p[2], s * p[1] + co * p[2]];
        let a0 = triangle_area(a, b, c);
        let a1 = triangle_area(rot2(rot(a)), rot2(rot(b)), rot2(rot(c)));
        assert!((a0 - a1).abs() < 1e-12);
    }
}
