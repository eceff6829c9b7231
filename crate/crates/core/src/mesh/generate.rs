use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::SurfaceMesh;
use crate::error::{Error, Result};

/// Structured cylinder surface along +z with outward-facing normals.
///
/// Node `(ring j, angle i)` has index `j * n_circ + i`. Each quad is split
/// along the same diagonal, giving `2 * n_circ * (n_axial - 1)` triangles.
/// Boundary sets `inlet_ring` (z = 0) and `outlet_ring` (z = length) are added.
pub fn generate_cylinder_mesh(
    diameter: f64,
    length: f64,
    n_circ: usize,
    n_axial: usize,
) -> Result<SurfaceMesh> {
    if n_circ < 3 || n_axial < 2 {
        return Err(Error::Argument(format!(
            "cylinder needs n_circ >= 3 and n_axial >= 2 (got {n_circ}, {n_axial})"
        )));
    }
    if !(diameter > 0.0 && length > 0.0) || !diameter.is_finite() || !length.is_finite() {
        return Err(Error::Argument(format!(
            "cylinder needs positive diameter and length (got {diameter}, {length})"
        )));
    }
    let r = 0.5 * diameter;
    let mut nodes = Vec::with_capacity(n_circ * n_axial);
    for j in 0..n_axial {
        let z = length * j as f64 / (n_axial - 1) as f64;
        for i in 0..n_circ {
            let phi = 2.0 * PI * i as f64 / n_circ as f64;
            nodes.push([r * phi.cos(), r * phi.sin(), z]);
        }
    }
    let id = |j: usize, i: usize| j * n_circ + (i % n_circ);
    let mut tris = Vec::with_capacity(2 * n_circ * (n_axial - 1));
    for j in 0..n_axial - 1 {
        for i in 0..n_circ {
            let (a, b, c, d) = (id(j, i), id(j, i + 1), id(j + 1, i + 1), id(j + 1, i));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let mut sets = BTreeMap::new();
    sets.insert("inlet_ring".to_string(), (0..n_circ).collect());
    sets.insert(
        "outlet_ring".to_string(),
        ((n_axial - 1) * n_circ..n_axial * n_circ).collect(),
    );
    SurfaceMesh::new(nodes, tris, sets)
}

/// Nodes on the generator line at angle zero (x > 0, y = 0), ordered by z.
pub fn cylinder_generator_line(mesh: &SurfaceMesh) -> Vec<usize> {
    let scale = mesh
        .nodes()
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max);
    let mut line: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&v| {
            let p = mesh.nodes()[v];
            p[0] > 0.0 && p[1].abs() <= 1e-12 * scale.max(1.0)
        })
        .collect();
    line.sort_by(|&a, &b| mesh.nodes()[a][2].total_cmp(&mesh.nodes()[b][2]));
    line
}
