//! Cylindrical stresses, ensemble statistics and slice profiles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};
use crate::linalg::EnsembleVector;
use crate::mesh::{nearest_centerline_frame, Centerline, CylindricalTriad, SurfaceMesh};
use crate::shell::{recover_stress, GaussPointField, ShellMaterial, GAUSS_POINTS, GAUSS_WEIGHTS, N_GP};

/// Component names in output order.
pub const CYLINDRICAL_COMPONENTS: [&str; 6] = ["rr", "tt", "zz", "rt", "rz", "tz"];

/// Local `(σxx, σyy, τxy, τxz, τyz)` in the element frame (rows are the
/// local axes in global coordinates) to `(rr, θθ, zz, rθ, rz, θz)`.
pub fn to_cylindrical(local: &[f64; 5], frame: &Mat3, triad: &CylindricalTriad) -> [f64; 6] {
    let [sxx, syy, txy, txz, tyz] = *local;
    let sl = [[sxx, txy, txz], [txy, syy, tyz], [txz, tyz, 0.0]];
    let mut sg = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    acc += frame[p][i] * sl[p][q] * frame[q][j];
                }
            }
            sg[i][j] = acc;
        }
    }
    let proj = |a: Vec3, b: Vec3| geom::dot(a, geom::mat_vec(&sg, b));
    let (r, t, z) = (triad.radial, triad.circumferential, triad.axial);
    [proj(r, r), proj(t, t), proj(z, z), proj(r, t), proj(r, z), proj(t, z)]
}

/// Cylindrical stresses at every (realization, element, Gauss point).
#[derive(Debug, Clone, PartialEq)]
pub struct StressEnsemble {
    pub n_elements: usize,
    pub n_s: usize,
    /// Index `(r * n_elements + e) * 3 + g`.
    pub values: Vec<[f64; 6]>,
    pub time: f64,
}

impl StressEnsemble {
    pub fn at(&self, r: usize, e: usize, g: usize) -> [f64; 6] {
        self.values[(r * self.n_elements + e) * N_GP + g]
    }

    /// Gauss-weighted element average for one realization.
    pub fn element_mean(&self, r: usize, e: usize) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (g, w) in GAUSS_WEIGHTS.iter().enumerate() {
            let s = self.at(r, e, g);
            for c in 0..6 {
                out[c] += w * s[c];
            }
        }
        out
    }

    /// One component laid out sample-major, `(e * 3 + g) * n_s + r`.
    pub fn component_samples(&self, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for r in 0..self.n_s {
            for k in 0..self.n_elements * N_GP {
                out[k * self.n_s + r] = self.values[r * self.n_elements * N_GP + k][c];
            }
        }
        out
    }
}

/// Element triads from the centroid and facet normal.
pub fn element_triads(mesh: &SurfaceMesh, centerline: &Centerline) -> Result<Vec<CylindricalTriad>> {
    (0..mesh.n_elements())
        .map(|e| {
            let g = mesh.element_geometry(e);
            nearest_centerline_frame(centerline, element_centroid(mesh, e), g.normal)
        })
        .collect()
}

pub fn element_centroid(mesh: &SurfaceMesh, e: usize) -> Vec3 {
    let [a, b, c] = mesh.element_nodes(e);
    std::array::from_fn(|k| (a[k] + b[k] + c[k]) / 3.0)
}

pub fn cylindrical_stresses(
    mesh: &SurfaceMesh,
    centerline: &Centerline,
    u: &EnsembleVector,
    modulus: &GaussPointField,
    material: &ShellMaterial,
    time: f64,
) -> Result<StressEnsemble> {
    let (m, n_s) = (mesh.n_elements(), u.n_s());
    if u.n_nodes() != mesh.n_nodes() || modulus.n_elements != m || modulus.n_s != n_s {
        return Err(Error::Argument("displacement, modulus and mesh shapes differ".into()));
    }
    let triads = element_triads(mesh, centerline)?;
    let geos: Vec<_> = (0..m).map(|e| mesh.element_geometry(e)).collect();
    let mut values = vec![[0.0; 6]; n_s * m * N_GP];
    values.par_chunks_mut(m * N_GP).enumerate().for_each(|(r, chunk)| {
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let mut ue = [0.0; 9];
            for (a, &v) in tri.iter().enumerate() {
                for c in 0..3 {
                    ue[3 * a + c] = u.get(v, c, r);
                }
            }
            let local = recover_stress(&geos[e], &ue, &modulus.at(r, e), material);
            for g in 0..N_GP {
                chunk[e * N_GP + g] = to_cylindrical(&local[g], &geos[e].frame, &triads[e]);
            }
        }
    });
    Ok(StressEnsemble {
        n_elements: m,
        n_s,
        values,
        time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
}

impl EnsembleStats {
    pub fn width(&self) -> f64 {
        self.q95 - self.q05
    }
}

/// Linear interpolation between order statistics at `h = (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean with 5% and 95% quantiles. Panics on an empty slice.
pub fn ensemble_stats(samples: &[f64]) -> EnsembleStats {
    assert!(!samples.is_empty(), "ensemble statistics need at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Summing in sorted order keeps the mean permutation invariant.
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    EnsembleStats {
        mean,
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
    }
}

/// Samples for slicing: arc-length position, weight, and `n_s` values per
/// sample laid out `k * n_s + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSamples {
    pub position: Vec<f64>,
    pub weight: Vec<f64>,
    pub n_s: usize,
    pub values: Vec<f64>,
}

impl SliceSamples {
    /// Nodal quantity, tributary-area weights.
    pub fn nodal(mesh: &SurfaceMesh, centerline: &Centerline, n_s: usize, values: Vec<f64>) -> Result<Self> {
        let position = mesh.nodes().iter().map(|&p| centerline.project(p)).collect();
        Self::new(position, mesh.tributary_areas(), n_s, values)
    }

    /// Gauss-point quantity laid out `(e * 3 + g) * n_s + r`, weights `A_e / 3`.
    pub fn gauss(mesh: &SurfaceMesh, centerline: &Centerline, n_s: usize, values: Vec<f64>) -> Result<Self> {
        let mut position = Vec::with_capacity(mesh.n_elements() * N_GP);
        let mut weight = Vec::with_capacity(mesh.n_elements() * N_GP);
        for e in 0..mesh.n_elements() {
            let x = mesh.element_nodes(e);
            let a = mesh.element_area(e);
            for (bary, w) in GAUSS_POINTS.iter().zip(GAUSS_WEIGHTS) {
                let p = std::array::from_fn(|k| bary[0] * x[0][k] + bary[1] * x[1][k] + bary[2] * x[2][k]);
                position.push(centerline.project(p));
                weight.push(w * a);
            }
        }
        Self::new(position, weight, n_s, values)
    }

    pub fn new(position: Vec<f64>, weight: Vec<f64>, n_s: usize, values: Vec<f64>) -> Result<Self> {
        if n_s == 0 || position.len() != weight.len() || values.len() != position.len() * n_s {
            return Err(Error::Argument(format!(
                "slice samples: {} positions, {} weights, {} values for n_s = {n_s}",
                position.len(),
                weight.len(),
                values.len()
            )));
        }
        Ok(Self {
            position,
            weight,
            n_s,
            values,
        })
    }
}

/// Per-slice weighted means and their ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `[slice][realization]`; NaN for empty slices.
    pub means: Vec<Vec<f64>>,
    pub stats: Vec<Option<EnsembleStats>>,
}

impl SliceProfile {
    pub fn n_slices(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn empty_slices(&self) -> Vec<usize> {
        (0..self.n_slices()).filter(|&i| self.counts[i] == 0).collect()
    }

    /// Non-empty slices lying entirely inside `[lo, hi]`.
    pub fn slices_within(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.n_slices())
            .filter(|&i| self.counts[i] > 0 && self.edges[i] >= lo && self.edges[i + 1] <= hi)
            .collect()
    }
}

/// Equal-width bins over `[0, length]`; each sample goes to the bin that
/// contains its arc length, clamped to the end bins.
pub fn slice_average(samples: &SliceSamples, length: f64, n_slices: usize) -> Result<SliceProfile> {
    if n_slices == 0 || !(length > 0.0) {
        return Err(Error::Argument(format!("need n_slices >= 1 and positive length (got {n_slices}, {length})")));
    }
    let n_s = samples.n_s;
    let edges: Vec<f64> = (0..=n_slices).map(|i| length * i as f64 / n_slices as f64).collect();
    let mut counts = vec![0usize; n_slices];
    let mut wsum = vec![0.0; n_slices];
    let mut sums = vec![vec![0.0; n_s]; n_slices];
    for (k, (&s, &w)) in samples.position.iter().zip(&samples.weight).enumerate() {
        let bin = ((s / length * n_slices as f64).floor().max(0.0) as usize).min(n_slices - 1);
        counts[bin] += 1;
        wsum[bin] += w;
        for r in 0..n_s {
            sums[bin][r] += w * samples.values[k * n_s + r];
        }
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&wsum)
        .map(|(row, &w)| row.into_iter().map(|v| if w > 0.0 { v / w } else { f64::NAN }).collect())
        .collect();
    let stats = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| (c > 0).then(|| ensemble_stats(m)))
        .collect();
    Ok(SliceProfile {
        edges,
        counts,
        means,
        stats,
    })
}

/// `‖u‖` per node and realization, laid out `node * n_s + r`.
pub fn displacement_magnitudes(u: &EnsembleVector) -> Vec<f64> {
    let n_s = u.n_s();
    let mut out = vec![0.0; u.n_nodes() * n_s];
    for v in 0..u.n_nodes() {
        for r in 0..n_s {
            out[v * n_s + r] = u.node_norm(v, r);
        }
    }
    out
}

/// Values along a node path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProfile {
    pub nodes: Vec<usize>,
    /// Cumulative distance along the path.
    pub position: Vec<f64>,
    pub n_s: usize,
    /// `i * n_s + r`.
    pub values: Vec<f64>,
    pub stats: Vec<EnsembleStats>,
}

/// `‖u‖` along `path` with per-point statistics.
pub fn displacement_profile(mesh: &SurfaceMesh, u: &EnsembleVector, path: &[usize]) -> Result<PathProfile> {
    if let Some(&bad) = path.iter().find(|&&v| v >= mesh.n_nodes()) {
        return Err(Error::Argument(format!("path node {bad} out of range")));
    }
    let n_s = u.n_s();
    let mut position = Vec::with_capacity(path.len());
    let mut s = 0.0;
    for (i, &v) in path.iter().enumerate() {
        if i > 0 {
            s += geom::norm(geom::sub(mesh.nodes()[v], mesh.nodes()[path[i - 1]]));
        }
        position.push(s);
    }
    let values: Vec<f64> = path
        .iter()
        .flat_map(|&v| (0..n_s).map(move |r| u.node_norm(v, r)))
        .collect();
    let stats = values.chunks(n_s).map(ensemble_stats).collect();
    Ok(PathProfile {
        nodes: path.to_vec(),
        position,
        n_s,
        values,
        stats,
    })
}

/// Nine significant digits.
pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.8e}")
    }
}

/// Columns `x_label, mean, q05, q95`, then `r<i>` per realization when
/// `per_realization` is given (`i * n_s + r`). Missing stats print `nan`.
pub fn write_profile_csv(
    path: impl AsRef<Path>,
    x_label: &str,
    x: &[f64],
    stats: &[Option<EnsembleStats>],
    per_realization: Option<(&[f64], usize)>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = format!("{x_label},mean,q05,q95");
    if let Some((_, n_s)) = per_realization {
        for r in 0..n_s {
            header.push_str(&format!(",r{r}"));
        }
    }
    writeln!(w, "{header}").map_err(io)?;
    for (i, (xi, st)) in x.iter().zip(stats).enumerate() {
        let (m, lo, hi) = st.map_or((f64::NAN, f64::NAN, f64::NAN), |s| (s.mean, s.q05, s.q95));
        let mut line = format!("{},{},{},{}", sig9(*xi), sig9(m), sig9(lo), sig9(hi));
        if let Some((vals, n_s)) = per_realization {
            for r in 0..n_s {
                line.push(',');
                line.push_str(&sig9(vals[i * n_s + r]));
            }
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Element centroids with the ensemble mean of each cylindrical component.
pub fn write_stress_csv(path: impl AsRef<Path>, mesh: &SurfaceMesh, stress: &StressEnsemble) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let names: Vec<String> = CYLINDRICAL_COMPONENTS.iter().map(|c| format!("s_{c}")).collect();
    writeln!(w, "element,x,y,z,{}", names.join(",")).map_err(io)?;
    for e in 0..mesh.n_elements() {
        let mut mean = [0.0; 6];
        for r in 0..stress.n_s {
            let s = stress.element_mean(r, e);
            for c in 0..6 {
                mean[c] += s[c] / stress.n_s as f64;
            }
        }
        let x = element_centroid(mesh, e);
        let cols: Vec<String> = x.iter().chain(&mean).map(|v| sig9(*v)).collect();
        writeln!(w, "{e},{}", cols.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
