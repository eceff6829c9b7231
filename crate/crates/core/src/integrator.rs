//! Central-difference time stepping of all realizations at once with a
//! lumped (diagonal) left-hand side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ElementStiffnesses, EnsembleVector, OperatorKind, StiffnessOperator};
use crate::mesh::SurfaceMesh;
use crate::shell::{lumped_mass, nominal_lumped_mass, GaussPointField, ShellMaterial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DampingMode {
    /// `C = c_d M` on both sides of the update.
    #[default]
    MassProportional,
    /// `f_v = -c_d (u_n - u_{n-1}) / dt` added to the right-hand side only.
    ViscousForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CflCheck {
    /// Error above twice the estimate, warning above the estimate.
    #[default]
    Enforce,
    Warn,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSteppingConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub damping_cd: f64,
    pub damping_mode: DampingMode,
    /// Rebuild stiffness from the displaced geometry every this many steps; 0 = never.
    pub stiffness_update_every: usize,
    #[serde(alias = "ramp_s")]
    pub ramp_duration: f64,
    pub cfl_safety: f64,
    pub cfl_check: CflCheck,
    pub observer_stride: usize,
    /// Displacement magnitude treated as divergence [cm].
    pub divergence_limit: f64,
}

impl Default for TimeSteppingConfig {
    fn default() -> Self {
        Self {
            dt: 1.0e-5,
            n_steps: 1000,
            damping_cd: 0.0,
            damping_mode: DampingMode::default(),
            stiffness_update_every: 0,
            ramp_duration: 0.0,
            cfl_safety: 0.9,
            cfl_check: CflCheck::default(),
            observer_stride: 100,
            divergence_limit: 1.0e3,
        }
    }
}

impl TimeSteppingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time.dt must be positive, got {}", self.dt));
        }
        if self.n_steps == 0 {
            return bad("time.n_steps must be at least 1".into());
        }
        if !(self.damping_cd >= 0.0 && self.damping_cd.is_finite()) {
            return bad(format!("time.damping_cd must be non-negative, got {}", self.damping_cd));
        }
        if !(self.ramp_duration >= 0.0 && self.ramp_duration.is_finite()) {
            return bad(format!("time.ramp_duration must be non-negative, got {}", self.ramp_duration));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("time.cfl_safety must be in (0, 1], got {}", self.cfl_safety));
        }
        if self.observer_stride == 0 {
            return bad("time.observer_stride must be at least 1".into());
        }
        if !(self.divergence_limit > 0.0) {
            return bad("time.divergence_limit must be positive".into());
        }
        Ok(())
    }
}

/// Load ramp `sin(π t / (2 T))` for `t < T`, then 1.
pub fn ramp_scale(t: f64, ramp_duration: f64) -> f64 {
    if ramp_duration <= 0.0 || t >= ramp_duration {
        1.0
    } else {
        (std::f64::consts::FRAC_PI_2 * t / ramp_duration).sin()
    }
}

/// Stable step estimate per realization and over the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalStep {
    pub per_realization: Vec<f64>,
    pub ensemble: f64,
}

/// Inscribed-circle diameter `4 A / perimeter`.
pub fn inscribed_diameter(mesh: &SurfaceMesh, e: usize) -> f64 {
    let [a, b, c] = mesh.element_nodes(e);
    let len = |p: [f64; 3], q: [f64; 3]| crate::geom::norm(crate::geom::sub(p, q));
    4.0 * mesh.element_area(e) / (len(a, b) + len(b, c) + len(c, a))
}

/// `safety * min_e d_e / sqrt(max_gp E / ρ)` per realization.
pub fn critical_time_step(mesh: &SurfaceMesh, modulus: &GaussPointField, density: f64, safety: f64) -> Result<CriticalStep> {
    if modulus.n_elements != mesh.n_elements() {
        return Err(Error::Argument("modulus field does not match the mesh".into()));
    }
    if !(density > 0.0) {
        return Err(Error::Argument("density must be positive".into()));
    }
    let d: Vec<f64> = (0..mesh.n_elements()).map(|e| inscribed_diameter(mesh, e)).collect();
    let per_realization: Vec<f64> = (0..modulus.n_s)
        .map(|r| {
            d.iter()
                .enumerate()
                .map(|(e, &de)| {
                    let emax = modulus.at(r, e).iter().fold(f64::MIN, |m, &v| m.max(v));
                    de / (emax / density).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
                * safety
        })
        .collect();
    let ensemble = per_realization.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CriticalStep {
        per_realization,
        ensemble,
    })
}

/// Mesh, material, and sampled fields: everything needed to rebuild the
/// stiffness operator.
#[derive(Debug, Clone)]
pub struct Structure {
    pub mesh: SurfaceMesh,
    pub material: ShellMaterial,
    pub modulus: GaussPointField,
    pub thickness: GaussPointField,
    pub operator_kind: OperatorKind,
}

impl Structure {
    pub fn n_s(&self) -> usize {
        self.modulus.n_s
    }

    pub fn operator(&self) -> Result<StiffnessOperator> {
        let k = ElementStiffnesses::new(&self.mesh, &self.material, &self.modulus, &self.thickness)?;
        StiffnessOperator::build(&self.mesh, k, self.operator_kind)
    }

    /// Operator on each realization's displaced geometry.
    pub fn displaced_operator(&self, u: &EnsembleVector) -> Result<StiffnessOperator> {
        let meshes = (0..self.n_s())
            .map(|r| {
                let ur = u.realization(r);
                let d: Vec<[f64; 3]> = ur.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                self.mesh.displaced(&d)
            })
            .collect::<Result<Vec<_>>>()?;
        let k = ElementStiffnesses::with_geometries(&meshes, &self.material, &self.modulus, &self.thickness)?;
        StiffnessOperator::build(&self.mesh, k, self.operator_kind)
    }

    /// Per-realization mass, or shared mass from a nominal thickness.
    pub fn mass(&self, nominal_thickness: Option<f64>) -> Vec<f64> {
        match nominal_thickness {
            Some(z) => nominal_lumped_mass(&self.mesh, z, &self.material, self.n_s()),
            None => lumped_mass(&self.mesh, &self.thickness, &self.material),
        }
    }

    /// Single-realization copy.
    pub fn select(&self, r: usize) -> Structure {
        Structure {
            mesh: self.mesh.clone(),
            material: self.material,
            modulus: self.modulus.select(r),
            thickness: self.thickness.select(r),
            operator_kind: self.operator_kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub u_prev: EnsembleVector,
    pub u_curr: EnsembleVector,
    pub t: f64,
    pub step: usize,
    /// `[node][realization]`
    pub mass: Vec<f64>,
    /// Sorted global DOF indices `3 node + component`.
    pub fixed_dofs: Vec<usize>,
}

impl EnsembleState {
    /// At rest.
    pub fn at_rest(n_nodes: usize, n_s: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n_nodes * n_s || mass.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Argument("mass must be positive with one entry per (node, realization)".into()));
        }
        Ok(Self {
            u_prev: EnsembleVector::zeros(n_nodes, n_s),
            u_curr: EnsembleVector::zeros(n_nodes, n_s),
            t: 0.0,
            step: 0,
            mass,
            fixed_dofs: Vec::new(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.u_curr.n_nodes()
    }

    pub fn n_s(&self) -> usize {
        self.u_curr.n_s()
    }

    /// Single-realization copy.
    pub fn select(&self, r: usize) -> Self {
        let n_s = self.n_s();
        Self {
            u_prev: self.u_prev.select(r),
            u_curr: self.u_curr.select(r),
            t: self.t,
            step: self.step,
            mass: self.mass.iter().skip(r).step_by(n_s).copied().collect(),
            fixed_dofs: self.fixed_dofs.clone(),
        }
    }

    fn zero_fixed(&mut self) {
        let n_s = self.n_s();
        for &d in &self.fixed_dofs {
            for v in [&mut self.u_prev, &mut self.u_curr] {
                v.values_mut()[d * n_s..(d + 1) * n_s].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
}

/// Fixes all three translations of every node in the named sets.
pub fn apply_dirichlet(state: &mut EnsembleState, mesh: &SurfaceMesh, sets: &[String]) -> Result<()> {
    let mut dofs = std::mem::take(&mut state.fixed_dofs);
    for name in sets {
        for &node in mesh.boundary_set(name)? {
            dofs.extend([3 * node, 3 * node + 1, 3 * node + 2]);
        }
    }
    dofs.sort_unstable();
    dofs.dedup();
    state.fixed_dofs = dofs;
    state.zero_fixed();
    Ok(())
}

/// Fixes an explicit list of `(node, component)` DOFs.
pub fn fix_dofs(state: &mut EnsembleState, dofs: &[(usize, usize)]) -> Result<()> {
    for &(node, c) in dofs {
        if node >= state.n_nodes() || c > 2 {
            return Err(Error::Argument(format!("DOF ({node}, {c}) out of range")));
        }
        state.fixed_dofs.push(3 * node + c);
    }
    state.fixed_dofs.sort_unstable();
    state.fixed_dofs.dedup();
    state.zero_fixed();
    Ok(())
}

/// Reusable buffers for [`step`].
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    ku: EnsembleVector,
    u_next: EnsembleVector,
}

impl StepWorkspace {
    pub fn new(n_nodes: usize, n_s: usize) -> Self {
        Self {
            ku: EnsembleVector::zeros(n_nodes, n_s),
            u_next: EnsembleVector::zeros(n_nodes, n_s),
        }
    }

    /// `K u_n` from the last step.
    pub fn ku(&self) -> &EnsembleVector {
        &self.ku
    }
}

/// Advances one step: `u_prev <- u_curr`, `u_curr <- u_next`.
pub fn step(
    state: &mut EnsembleState,
    op: &StiffnessOperator,
    f_ext: &EnsembleVector,
    cfg: &TimeSteppingConfig,
    ws: &mut StepWorkspace,
) -> Result<()> {
    let n_s = state.n_s();
    if !f_ext.same_shape(&state.u_curr) {
        return Err(Error::Argument("load vector shape differs from the state".into()));
    }
    op.apply_into(&state.u_curr, &mut ws.ku)?;
    let dt = cfg.dt;
    let dt2 = dt * dt;
    let cd = cfg.damping_cd;
    let (lhs_factor, prev_factor, force_coeff) = match cfg.damping_mode {
        DampingMode::MassProportional => (1.0 + 0.5 * dt * cd, 1.0 - 0.5 * dt * cd, 0.0),
        DampingMode::ViscousForce => (1.0, 1.0, cd / dt),
    };
    let mass = &state.mass;
    let uc = state.u_curr.values();
    let up = state.u_prev.values();
    let f = f_ext.values();
    let ku = ws.ku.values();
    ws.u_next
        .values_mut()
        .par_chunks_mut(3 * n_s)
        .enumerate()
        .for_each(|(node, out)| {
            let m = &mass[node * n_s..(node + 1) * n_s];
            let o = 3 * node * n_s;
            for c in 0..3 {
                for r in 0..n_s {
                    let k = o + c * n_s + r;
                    let rhs = dt2 * (f[k] - ku[k] - force_coeff * (uc[k] - up[k]))
                        + m[r] * (2.0 * uc[k] - prev_factor * up[k]);
                    out[c * n_s + r] = rhs / (m[r] * lhs_factor);
                }
            }
        });
    for &d in &state.fixed_dofs {
        ws.u_next.values_mut()[d * n_s..(d + 1) * n_s].iter_mut().for_each(|x| *x = 0.0);
    }
    std::mem::swap(&mut state.u_prev, &mut state.u_curr);
    std::mem::swap(&mut state.u_curr, &mut ws.u_next);
    state.step += 1;
    state.t = state.step as f64 * dt;
    check_divergence(state, cfg.divergence_limit)
}

fn check_divergence(state: &EnsembleState, limit: f64) -> Result<()> {
    let n_s = state.n_s();
    let bad = state
        .u_curr
        .values()
        .par_iter()
        .position_first(|v| !v.is_finite() || v.abs() > limit);
    match bad {
        None => Ok(()),
        Some(k) => Err(Error::Divergence {
            step: state.step,
            time: state.t,
            realization: k % n_s,
        }),
    }
}

/// Discrete energy per realization, exactly conserved by the undamped
/// scheme under a constant load:
/// `½ vᵀ M v + ½ u_{n}ᵀ K u_{n-1} - fᵀ (u_n + u_{n-1}) / 2`, `v = (u_n - u_{n-1}) / dt`.
pub fn discrete_energy(state: &EnsembleState, op: &StiffnessOperator, f: &EnsembleVector, dt: f64) -> Result<Vec<f64>> {
    let n_s = state.n_s();
    let k_prev = op.apply(&state.u_prev)?;
    let mut e = vec![0.0; n_s];
    let (uc, up, kp, fv) = (state.u_curr.values(), state.u_prev.values(), k_prev.values(), f.values());
    for node in 0..state.n_nodes() {
        for c in 0..3 {
            for r in 0..n_s {
                let k = (3 * node + c) * n_s + r;
                let v = (uc[k] - up[k]) / dt;
                e[r] += 0.5 * state.mass[node * n_s + r] * v * v + 0.5 * uc[k] * kp[k] - 0.5 * fv[k] * (uc[k] + up[k]);
            }
        }
    }
    Ok(e)
}

/// Time-dependent external loads.
pub trait LoadSource {
    /// Writes the unramped load at time `t` into `out`.
    fn load_into(&self, t: f64, out: &mut EnsembleVector) -> Result<()>;
}

/// The same load at all times.
#[derive(Debug, Clone)]
pub struct ConstantLoad(pub EnsembleVector);

impl LoadSource for ConstantLoad {
    fn load_into(&self, _t: f64, out: &mut EnsembleVector) -> Result<()> {
        out.values_mut().copy_from_slice(self.0.values());
        Ok(())
    }
}

/// What observers see every `observer_stride` steps and at the end.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub step: usize,
    pub t: f64,
    pub u: &'a EnsembleVector,
    pub u_prev: &'a EnsembleVector,
    pub operator: &'a StiffnessOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub stiffness_updates: usize,
    pub critical_step: Option<f64>,
}

/// Runs `cfg.n_steps` steps from `state`.
pub fn run(
    state: &mut EnsembleState,
    structure: &Structure,
    loads: &dyn LoadSource,
    cfg: &TimeSteppingConfig,
    observer: &mut dyn FnMut(&Snapshot) -> Result<()>,
) -> Result<RunSummary> {
    cfg.validate()?;
    if state.n_s() != structure.n_s() || state.n_nodes() != structure.mesh.n_nodes() {
        return Err(Error::Argument("state and structure shapes differ".into()));
    }
    let critical = if cfg.cfl_check == CflCheck::Off {
        None
    } else {
        let c = critical_time_step(&structure.mesh, &structure.modulus, structure.material.density, cfg.cfl_safety)?;
        if cfg.dt > 2.0 * c.ensemble && cfg.cfl_check == CflCheck::Enforce {
            return Err(Error::Config(format!(
                "time step {:e} s exceeds twice the stable estimate {:e} s",
                cfg.dt, c.ensemble
            )));
        }
        if cfg.dt > c.ensemble {
            log::warn!("time step {:e} s is above the stable estimate {:e} s", cfg.dt, c.ensemble);
        }
        Some(c.ensemble)
    };
    let mut op = structure.operator()?;
    let mut ws = StepWorkspace::new(state.n_nodes(), state.n_s());
    let mut f = EnsembleVector::zeros(state.n_nodes(), state.n_s());
    let mut updates = 0;
    for _ in 0..cfg.n_steps {
        let t = state.t;
        loads.load_into(t, &mut f)?;
        let s = ramp_scale(t, cfg.ramp_duration);
        if s != 1.0 {
            f.values_mut().iter_mut().for_each(|v| *v *= s);
        }
        step(state, &op, &f, cfg, &mut ws)?;
        if state.step.is_multiple_of(cfg.observer_stride) || state.step == cfg.n_steps {
            observer(&Snapshot {
                step: state.step,
                t: state.t,
                u: &state.u_curr,
                u_prev: &state.u_prev,
                operator: &op,
            })?;
        }
        if cfg.stiffness_update_every > 0 && state.step.is_multiple_of(cfg.stiffness_update_every) && state.step < cfg.n_steps {
            op = structure.displaced_operator(&state.u_curr)?;
            updates += 1;
        }
    }
    Ok(RunSummary {
        steps: state.step,
        final_time: state.t,
        stiffness_updates: updates,
        critical_step: critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp_scale(0.0, 0.2), 0.0);
        assert_eq!(ramp_scale(0.2, 0.2), 1.0);
        assert!((ramp_scale(0.1, 0.2) - (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-15);
        assert_eq!(ramp_scale(0.0, 0.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TimeSteppingConfig::default().validate().is_ok());
        let bad = TimeSteppingConfig { dt: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = TimeSteppingConfig { n_steps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TimeSteppingConfig { damping_cd: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
