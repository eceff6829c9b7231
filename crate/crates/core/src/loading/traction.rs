use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::mesh::SurfaceMesh;

/// Blood viscosity in g/(cm s).
pub const BLOOD_VISCOSITY: f64 = 0.04;

/// One fluid traction snapshot: nodal pressure plus a per-element traction
/// that excludes that pressure (shear, or the full `σ^f n` when no nodal
/// pressure is given).
#[derive(Debug, Clone, PartialEq)]
pub struct WallTraction {
    pub pressure: Vec<f64>,
    pub element_traction: Vec<Vec3>,
}

impl WallTraction {
    pub fn zeros(mesh: &SurfaceMesh) -> Self {
        Self {
            pressure: vec![0.0; mesh.n_nodes()],
            element_traction: vec![[0.0; 3]; mesh.n_elements()],
        }
    }

    /// Element tractions only.
    pub fn from_elements(mesh: &SurfaceMesh, element_traction: Vec<Vec3>) -> Result<Self> {
        let t = Self {
            pressure: vec![0.0; mesh.n_nodes()],
            element_traction,
        };
        t.check(mesh)?;
        Ok(t)
    }

    pub fn check(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.pressure.len() != mesh.n_nodes() || self.element_traction.len() != mesh.n_elements() {
            return Err(Error::Validation(format!(
                "traction has {} nodal pressures and {} element vectors for a mesh with {} nodes and {} elements",
                self.pressure.len(),
                self.element_traction.len(),
                mesh.n_nodes(),
                mesh.n_elements()
            )));
        }
        let finite = self.pressure.iter().all(|v| v.is_finite())
            && self.element_traction.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("traction contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            pressure: self.pressure.iter().map(|p| s * p).collect(),
            element_traction: self.element_traction.iter().map(|t| geom::scale(*t, s)).collect(),
        }
    }
}

/// Area-weighted, renormalized node normals.
pub fn node_normals(mesh: &SurfaceMesh) -> Result<Vec<Vec3>> {
    let mut acc = vec![[0.0; 3]; mesh.n_nodes()];
    for (e, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(e);
        for &v in t {
            acc[v] = geom::add(acc[v], geom::scale(g.normal, g.area));
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(v, n)| {
            geom::normalize(n).ok_or_else(|| Error::Validation(format!("node {v} has no well-defined normal")))
        })
        .collect()
}

/// Nodal wall forces in dyn.
///
/// Per node: adjacent element tractions averaged with area weights, the
/// nodal plus superposed pressure applied along the averaged normal, the
/// result negated (fluid to wall) and multiplied by the tributary area.
pub fn nodal_forces(mesh: &SurfaceMesh, traction: &WallTraction, superposed_pressure: f64) -> Result<Vec<Vec3>> {
    traction.check(mesh)?;
    let normals = node_normals(mesh)?;
    let mut shear_sum = vec![[0.0; 3]; mesh.n_nodes()];
    let mut area_sum = vec![0.0; mesh.n_nodes()];
    for (e, t) in mesh.triangles().iter().enumerate() {
        let a = mesh.element_area(e);
        for &v in t {
            shear_sum[v] = geom::add(shear_sum[v], geom::scale(traction.element_traction[e], a));
            area_sum[v] += a;
        }
    }
    Ok((0..mesh.n_nodes())
        .map(|v| {
            let tributary = area_sum[v] / 3.0;
            let shear = geom::scale(shear_sum[v], 1.0 / area_sum[v]);
            // σ^f n = -p n + shear, and the wall gets the negative.
            let p = traction.pressure[v] + superposed_pressure;
            let tf = geom::sub(shear, geom::scale(normals[v], p));
            geom::scale(tf, -tributary)
        })
        .collect())
}

/// `τ_w = 4 μ Q / (π R³)`.
pub fn poiseuille_wall_shear(flow_rate: f64, viscosity: f64, radius: f64) -> f64 {
    4.0 * viscosity * flow_rate.abs() / (PI * radius.powi(3))
}

/// Fully developed flow in a straight cylinder around the z axis.
///
/// Positive `flow_rate` (mL/s = cm³/s) runs toward +z. Pressure falls
/// linearly with slope `8 μ |Q| / (π R⁴)` to zero at the downstream end;
/// the fluid-side shear on every element is `τ_w` against the flow.
pub fn analytic_poiseuille(mesh: &SurfaceMesh, flow_rate: f64, viscosity: f64) -> Result<WallTraction> {
    if !(viscosity >= 0.0) || !flow_rate.is_finite() || !viscosity.is_finite() {
        return Err(Error::Argument(format!(
            "flow rate {flow_rate} and viscosity {viscosity} must be finite, viscosity non-negative"
        )));
    }
    let radii: Vec<f64> = mesh.nodes().iter().map(|p| p[0].hypot(p[1])).collect();
    let radius = radii.iter().sum::<f64>() / radii.len().max(1) as f64;
    if radius <= 0.0 || radii.iter().any(|r| (r - radius).abs() > 1e-6 * radius) {
        return Err(Error::Unsupported(
            "analytic Poiseuille loading needs a straight cylinder centred on the z axis".into(),
        ));
    }
    let z_min = mesh.nodes().iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let z_max = mesh.nodes().iter().map(|p| p[2]).fold(f64::NEG_INFINITY, f64::max);
    let gradient = 8.0 * viscosity * flow_rate.abs() / (PI * radius.powi(4));
    let pressure = mesh
        .nodes()
        .iter()
        .map(|p| {
            let downstream = if flow_rate >= 0.0 { z_max - p[2] } else { p[2] - z_min };
            gradient * downstream
        })
        .collect();
    let tau = poiseuille_wall_shear(flow_rate, viscosity, radius);
    let dir = if flow_rate >= 0.0 { -1.0 } else { 1.0 };
    Ok(WallTraction {
        pressure,
        element_traction: vec![[0.0, 0.0, dir * tau]; mesh.n_elements()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cylinder_mesh;
    use std::collections::BTreeMap;

    #[test]
    fn flat_triangle_split() {
        let mesh = SurfaceMesh::new(
            vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 3.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
        )
        .unwrap();
        let t = WallTraction::from_elements(&mesh, vec![[1.0, -2.0, 0.5]]).unwrap();
        let f = nodal_forces(&mesh, &t, 0.0).unwrap();
        for v in f {
            assert_eq!(v, [-1.0, 2.0, -0.5]);
        }
    }

    #[test]
    fn shear_values() {
        let tau = poiseuille_wall_shear(66.59, 0.04, 2.0);
        assert!((tau - 4.0 * 0.04 * 66.59 / (PI * 8.0)).abs() < 1e-15);
        assert!((tau - 0.424).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_cylinder() {
        let mut nodes = generate_cylinder_mesh(4.0, 10.0, 8, 4).unwrap().nodes().to_vec();
        nodes[3][0] *= 1.1;
        let base = generate_cylinder_mesh(4.0, 10.0, 8, 4).unwrap();
        let bent = SurfaceMesh::new(nodes, base.triangles().to_vec(), BTreeMap::new()).unwrap();
        assert!(matches!(analytic_poiseuille(&bent, 1.0, 0.04), Err(Error::Unsupported(_))));
    }
}
