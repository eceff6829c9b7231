use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::series::{locate, TractionSeries};
use super::traction::{analytic_poiseuille, nodal_forces, WallTraction};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::integrator::LoadSource;
use crate::linalg::EnsembleVector;
use crate::mesh::SurfaceMesh;

/// Inflow scaling over time, linear between samples and periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Waveform {
    pub fn new(t: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != scale.len() {
            return Err(Error::Validation(format!("waveform has {} times and {} scales", t.len(), scale.len())));
        }
        if t.iter().chain(&scale).any(|v| !v.is_finite()) {
            return Err(Error::Validation("waveform contains non-finite values".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("waveform times must increase strictly".into()));
        }
        Ok(Self { t, scale })
    }

    /// A smooth systolic pulse on a diastolic floor, unit mean over a cycle.
    ///
    /// `0.5 + (0.5 / 0.175) sin²(π s / 0.35)` for the first 35% of the
    /// cycle, `0.5` afterwards; 201 samples with the last equal to the first.
    pub fn synthetic(period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Argument(format!("waveform period must be positive, got {period}")));
        }
        let n = 200;
        let (t, scale) = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                let pulse = if s < 0.35 { (PI * s / 0.35).sin().powi(2) } else { 0.0 };
                (s * period, 0.5 + 0.5 / 0.175 * pulse)
            })
            .unzip();
        Self::new(t, scale)
    }

    /// Rows `t,scale`; a header line and `#` comments are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (mut t, mut scale) = (Vec::new(), Vec::new());
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('t')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match cols.as_slice() {
                [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            let (a, b) = parsed.ok_or_else(|| Error::format(path, i + 1, "expected `t,scale`"))?;
            t.push(a);
            scale.push(b);
        }
        Self::new(t, scale).map_err(|e| Error::format(path, 0, e.to_string()))
    }

    pub fn at(&self, t: f64) -> f64 {
        let (i, j, w) = locate(&self.t, t);
        self.scale[i] + w * (self.scale[j] - self.scale[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadMode {
    Steady(WallTraction),
    PulsatileSeries(TractionSeries),
    AnalyticPoiseuille { flow_rate: f64, viscosity: f64 },
}

/// Fluid loading plus a uniform lumen pressure. The waveform scales the
/// fluid part only.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub mode: LoadMode,
    pub superposed_pressure: f64,
    pub waveform: Option<Waveform>,
}

impl LoadProgram {
    /// Precomputes nodal forces for every snapshot.
    pub fn compile(&self, mesh: &SurfaceMesh, n_s: usize) -> Result<ProgramLoad> {
        if !self.superposed_pressure.is_finite() {
            return Err(Error::Argument("superposed pressure must be finite".into()));
        }
        let (stamps, fluid) = match &self.mode {
            LoadMode::Steady(t) => (vec![0.0], vec![nodal_forces(mesh, t, 0.0)?]),
            LoadMode::AnalyticPoiseuille { flow_rate, viscosity } => {
                let t = analytic_poiseuille(mesh, *flow_rate, *viscosity)?;
                (vec![0.0], vec![nodal_forces(mesh, &t, 0.0)?])
            }
            LoadMode::PulsatileSeries(s) => {
                s.check(mesh)?;
                let f = s.snapshots.iter().map(|t| nodal_forces(mesh, t, 0.0)).collect::<Result<_>>()?;
                (s.time_stamps.clone(), f)
            }
        };
        let superposed = nodal_forces(mesh, &WallTraction::zeros(mesh), self.superposed_pressure)?;
        Ok(ProgramLoad {
            n_s,
            stamps,
            fluid,
            superposed,
            waveform: self.waveform.clone(),
        })
    }
}

/// Compiled [`LoadProgram`], identical in every realization.
#[derive(Debug, Clone)]
pub struct ProgramLoad {
    n_s: usize,
    stamps: Vec<f64>,
    fluid: Vec<Vec<Vec3>>,
    superposed: Vec<Vec3>,
    waveform: Option<Waveform>,
}

impl ProgramLoad {
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Nodal forces at time `t`.
    pub fn forces_at(&self, t: f64) -> Vec<Vec3> {
        let (i, j, w) = locate(&self.stamps, t);
        let s = self.waveform.as_ref().map_or(1.0, |wf| wf.at(t));
        self.fluid[i]
            .iter()
            .zip(&self.fluid[j])
            .zip(&self.superposed)
            .map(|((a, b), p)| std::array::from_fn(|k| s * (a[k] + w * (b[k] - a[k])) + p[k]))
            .collect()
    }
}

impl LoadSource for ProgramLoad {
    fn load_into(&self, t: f64, out: &mut EnsembleVector) -> Result<()> {
        let f = self.forces_at(t);
        if out.n_nodes() != f.len() || out.n_s() != self.n_s {
            return Err(Error::Argument("load vector shape differs from the compiled program".into()));
        }
        let n_s = self.n_s;
        for (chunk, v) in out.values_mut().chunks_mut(3 * n_s).zip(&f) {
            for c in 0..3 {
                chunk[c * n_s..(c + 1) * n_s].fill(v[c]);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_waveform_has_unit_mean() {
        let w = Waveform::synthetic(0.8).unwrap();
        let n = 8000;
        let mean = (0..n).map(|i| w.at(0.8 * i as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 1e-3, "{mean}");
        assert!((w.at(0.1) - w.at(0.9)).abs() < 1e-12);
    }
}
