use std::collections::BTreeMap;

use rayon::prelude::*;

use super::sampling::FieldEnsemble;
use crate::error::{Error, Result};
use crate::geom::{norm, sub};
use crate::mesh::SurfaceMesh;

#[derive(Debug, Clone, Copy)]
pub struct CorrelationOptions {
    pub n_bins: usize,
    /// Largest pair distance considered [cm].
    pub h_max: f64,
    /// Nodes closer than this to the mesh boundary are excluded [cm].
    pub boundary_margin: f64,
}

impl CorrelationOptions {
    /// `h_max` of two correlation lengths and a one-length boundary margin.
    pub fn for_ensemble(ens: &FieldEnsemble, n_bins: usize) -> Self {
        Self {
            n_bins,
            h_max: 2.0 * ens.params.corr_len,
            boundary_margin: ens.params.corr_len,
        }
    }
}

/// Binned empirical correlation. Bins without pairs hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub bin_edges: Vec<f64>,
    pub correlation: Vec<f64>,
    pub pair_counts: Vec<usize>,
    pub interior_nodes: usize,
    /// Interior nodes skipped because their sample variance is zero.
    pub zero_variance_nodes: usize,
}

impl CorrelationEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

pub fn empirical_correlation(ens: &FieldEnsemble, mesh: &SurfaceMesh, n_bins: usize) -> Result<CorrelationEstimate> {
    empirical_correlation_with(ens, mesh, &CorrelationOptions::for_ensemble(ens, n_bins))
}

pub fn empirical_correlation_with(
    ens: &FieldEnsemble,
    mesh: &SurfaceMesh,
    opts: &CorrelationOptions,
) -> Result<CorrelationEstimate> {
    if ens.n_nodes != mesh.n_nodes() {
        return Err(Error::Argument(format!(
            "ensemble has {} nodes, mesh has {}",
            ens.n_nodes,
            mesh.n_nodes()
        )));
    }
    if opts.n_bins == 0 || !(opts.h_max > 0.0) {
        return Err(Error::Argument("need at least one bin and a positive h_max".into()));
    }
    let n_s = ens.n_s();
    if n_s < 100 {
        log::warn!("empirical correlation from only {n_s} realizations is noisy");
    }
    let nodes = mesh.nodes();
    let boundary = boundary_nodes(mesh);
    let interior: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&i| {
            boundary
                .iter()
                .all(|&b| norm(sub(nodes[i], nodes[b])) >= opts.boundary_margin)
        })
        .collect();

    let mut zero_variance = 0;
    let mut kept = Vec::new();
    let mut standardized: Vec<Vec<f64>> = Vec::new();
    for &i in &interior {
        let series: Vec<f64> = (0..n_s).map(|r| ens.nodal_values[r * ens.n_nodes + i]).collect();
        let mean = series.iter().sum::<f64>() / n_s as f64;
        let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_s as f64;
        if !(var > 0.0) || var <= 1e-28 * mean * mean {
            zero_variance += 1;
            continue;
        }
        let sd = var.sqrt();
        kept.push(i);
        standardized.push(series.iter().map(|v| (v - mean) / sd).collect());
    }

    let nb = opts.n_bins;
    let width = opts.h_max / nb as f64;
    let partials: Vec<(Vec<f64>, Vec<usize>)> = (0..kept.len())
        .into_par_iter()
        .map(|a| {
            let mut sums = vec![0.0; nb];
            let mut counts = vec![0usize; nb];
            for b in a + 1..kept.len() {
                let h = norm(sub(nodes[kept[a]], nodes[kept[b]]));
                if h >= opts.h_max {
                    continue;
                }
                let bin = ((h / width) as usize).min(nb - 1);
                let r: f64 = standardized[a].iter().zip(&standardized[b]).map(|(x, y)| x * y).sum::<f64>()
                    / n_s as f64;
                sums[bin] += r;
                counts[bin] += 1;
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![0.0; nb];
    let mut counts = vec![0usize; nb];
    for (s, c) in &partials {
        for k in 0..nb {
            sums[k] += s[k];
            counts[k] += c[k];
        }
    }
    let correlation = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect();
    Ok(CorrelationEstimate {
        bin_edges: (0..=nb).map(|k| k as f64 * width).collect(),
        correlation,
        pair_counts: counts,
        interior_nodes: interior.len(),
        zero_variance_nodes: zero_variance,
    })
}

/// Nodes on edges that belong to exactly one triangle.
pub fn boundary_nodes(mesh: &SurfaceMesh) -> Vec<usize> {
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out: Vec<usize> = edges
        .iter()
        .filter(|(_, &c)| c == 1)
        .flat_map(|(&(a, b), _)| [a, b])
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
