//! Configured runs: sample, assemble, integrate, post-process, write.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{FieldConfig, LoadModeConfig, MassMode, MeshConfig, RunConfig};
use crate::error::{Error, Result};
use crate::gmrf::{assemble_galerkin, build_precision, sample_realizations, write_field_binary, FieldEnsemble, PrecisionOperator};
use crate::integrator::{apply_dirichlet, run, EnsembleState, RunSummary, Structure};
use crate::loading::{
    read_traction_csv, read_traction_series, LoadMode, LoadProgram, ProgramLoad, TractionSeries, WallTraction,
    Waveform,
};
use crate::mesh::{cylinder_generator_line, generate_cylinder_mesh, load_mesh, Centerline, MeshFormat, SurfaceMesh};
use crate::postproc::{
    cylindrical_stresses, displacement_magnitudes, displacement_profile, ensemble_stats, slice_average,
    write_profile_csv, write_stress_csv, EnsembleStats, PathProfile, SliceProfile, SliceSamples, StressEnsemble,
    CYLINDRICAL_COMPONENTS,
};
use crate::shell::{gauss_point_fields, GaussPointField};
use crate::units::mmhg_to_barye;

/// Mesh, centerline and profile path.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub mesh: SurfaceMesh,
    pub centerline: Centerline,
    pub profile_path: Vec<usize>,
}

pub fn build_geometry(cfg: &RunConfig) -> Result<Geometry> {
    match &cfg.mesh {
        MeshConfig::Cylinder { diameter, length, n_circ, n_axial, .. } => {
            let mesh = generate_cylinder_mesh(*diameter, *length, *n_circ, *n_axial)?;
            let centerline = Centerline::straight([0.0, 0.0, 0.0], [0.0, 0.0, *length], *n_axial)?;
            let profile_path = cylinder_generator_line(&mesh);
            Ok(Geometry { mesh, centerline, profile_path })
        }
        MeshConfig::File { path, format, centerline, profile_set, .. } => {
            let mesh = load_mesh(path, format.unwrap_or_else(|| MeshFormat::from_path(path)))?;
            let centerline = Centerline::load(centerline)?;
            let profile_path = match profile_set {
                Some(name) => {
                    let mut nodes = mesh.boundary_set(name)?.to_vec();
                    let s: Vec<f64> = nodes.iter().map(|&v| centerline.project(mesh.nodes()[v])).collect();
                    let mut order: Vec<usize> = (0..nodes.len()).collect();
                    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(nodes[a].cmp(&nodes[b])));
                    nodes = order.into_iter().map(|i| nodes[i]).collect();
                    nodes
                }
                None => Vec::new(),
            };
            Ok(Geometry { mesh, centerline, profile_path })
        }
    }
}

/// Factored precision per random field; `None` for constant fields.
#[derive(Debug, Clone)]
pub struct FieldOperators {
    pub modulus: Option<PrecisionOperator>,
    pub thickness: Option<PrecisionOperator>,
}

pub fn factor_fields(cfg: &RunConfig, mesh: &SurfaceMesh) -> Result<FieldOperators> {
    let gm = assemble_galerkin(mesh);
    let build = |f: &FieldConfig| -> Result<Option<PrecisionOperator>> {
        if f.std == 0.0 {
            return Ok(None);
        }
        build_precision(&gm, &f.matern()?).map(Some)
    };
    Ok(FieldOperators {
        modulus: build(&cfg.fields.modulus)?,
        thickness: build(&cfg.fields.thickness)?,
    })
}

/// Sampled material for realizations `range`.
#[derive(Debug, Clone)]
pub struct Material {
    pub modulus: GaussPointField,
    pub thickness: GaussPointField,
    pub modulus_nodal: Option<FieldEnsemble>,
    pub thickness_nodal: Option<FieldEnsemble>,
}

pub fn sample_material(
    cfg: &RunConfig,
    mesh: &SurfaceMesh,
    ops: &FieldOperators,
    range: Range<usize>,
) -> Result<Material> {
    let n_s = range.len();
    let one = |name: &str, f: &FieldConfig, op: &Option<PrecisionOperator>, seed: u64| -> Result<_> {
        match op {
            None => Ok((GaussPointField::uniform(mesh.n_elements(), n_s, f.mean), None)),
            Some(op) => {
                let ens = sample_realizations(op, f.mean, range.clone(), seed)?;
                let gp = gauss_point_fields(mesh, &ens)?;
                check_positive(name, &gp, &ens.realizations)?;
                Ok((gp, Some(ens)))
            }
        }
    };
    let (modulus, modulus_nodal) = one("modulus", &cfg.fields.modulus, &ops.modulus, cfg.modulus_seed())?;
    let (thickness, thickness_nodal) = one("thickness", &cfg.fields.thickness, &ops.thickness, cfg.thickness_seed())?;
    Ok(Material { modulus, thickness, modulus_nodal, thickness_nodal })
}

fn check_positive(name: &str, gp: &GaussPointField, realizations: &[usize]) -> Result<()> {
    let per = gp.n_elements * 3;
    for (r, chunk) in gp.values.chunks(per).enumerate() {
        if let Some(k) = chunk.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Validation(format!(
                "sampled {name} is non-positive ({:e}) at element {} in realization {}",
                chunk[k],
                k / 3,
                realizations[r]
            )));
        }
    }
    Ok(())
}

pub fn load_program(cfg: &RunConfig, mesh: &SurfaceMesh) -> Result<LoadProgram> {
    let l = &cfg.load;
    let read_series = |p: &Path| -> Result<TractionSeries> {
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            read_traction_csv(p, mesh)
        } else {
            read_traction_series(p, mesh)
        }
    };
    let mode = match l.mode {
        LoadModeConfig::Steady => match &l.series_path {
            Some(p) => LoadMode::Steady(read_series(p)?.snapshots.swap_remove(0)),
            None => LoadMode::Steady(WallTraction::zeros(mesh)),
        },
        LoadModeConfig::PulsatileSeries => {
            let p = l.series_path.as_ref().ok_or_else(|| Error::Config("missing load.series_path".into()))?;
            LoadMode::PulsatileSeries(read_series(p)?)
        }
        LoadModeConfig::AnalyticPoiseuille => LoadMode::AnalyticPoiseuille {
            flow_rate: l.flow_mls,
            viscosity: l.viscosity,
        },
    };
    let waveform = match &l.waveform_path {
        None => None,
        Some(p) if p.as_os_str() == "synthetic" => Some(Waveform::synthetic(l.waveform_period)?),
        Some(p) => Some(Waveform::load(p)?),
    };
    Ok(LoadProgram {
        mode,
        superposed_pressure: mmhg_to_barye(l.pressure_mmhg),
        waveform,
    })
}

/// Everything the time loop needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub structure: Structure,
    pub state: EnsembleState,
    pub loads: ProgramLoad,
    pub material: Material,
}

pub fn prepare(cfg: &RunConfig, geo: &Geometry, ops: &FieldOperators, range: Range<usize>) -> Result<Prepared> {
    let n_s = range.len();
    let material = sample_material(cfg, &geo.mesh, ops, range)?;
    let structure = Structure {
        mesh: geo.mesh.clone(),
        material: cfg.material,
        modulus: material.modulus.clone(),
        thickness: material.thickness.clone(),
        operator_kind: cfg.solver.operator,
    };
    let nominal = match cfg.solver.mass {
        MassMode::PerRealization => None,
        MassMode::Nominal => Some(cfg.fields.thickness.mean),
    };
    let mut state = EnsembleState::at_rest(geo.mesh.n_nodes(), n_s, structure.mass(nominal))?;
    apply_dirichlet(&mut state, &geo.mesh, cfg.mesh.fixed())?;
    let loads = load_program(cfg, &geo.mesh)?.compile(&geo.mesh, n_s)?;
    Ok(Prepared { structure, state, loads, material })
}

/// Peak displacement statistics at one observer sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub t: f64,
    pub max_displacement: EnsembleStats,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: RunSummary,
    pub n_s: usize,
    pub displacement_slices: SliceProfile,
    pub generator: Option<PathProfile>,
    pub stresses: StressEnsemble,
    /// One per cylindrical component, in output order.
    pub stress_slices: Vec<SliceProfile>,
    pub trace: Vec<TracePoint>,
    pub material: Material,
    pub interior: (f64, f64),
}

impl ScenarioResult {
    /// Mean 5-95% width of `‖u‖` over generator points inside the interior.
    pub fn interior_ci_width(&self) -> Option<f64> {
        let g = self.generator.as_ref()?;
        let (lo, hi) = self.interior;
        let widths: Vec<f64> = g
            .position
            .iter()
            .zip(&g.stats)
            .filter(|(s, _)| **s >= lo && **s <= hi)
            .map(|(_, st)| st.width())
            .collect();
        (!widths.is_empty()).then(|| widths.iter().sum::<f64>() / widths.len() as f64)
    }
}

/// Wall-clock seconds; kept out of the manifest.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Timings {
    pub geometry: f64,
    pub factorization: f64,
    pub sampling_and_setup: f64,
    pub time_loop: f64,
    pub postprocess: f64,
}

/// Runs the configured scenario without writing anything.
pub fn simulate(cfg: &RunConfig) -> Result<(ScenarioResult, Timings)> {
    let mut timings = Timings::default();
    let clock = Instant::now();
    let geo = build_geometry(cfg)?;
    timings.geometry = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let ops = factor_fields(cfg, &geo.mesh)?;
    timings.factorization = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let mut p = prepare(cfg, &geo, &ops, 0..cfg.n_s)?;
    timings.sampling_and_setup = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut trace = Vec::new();
    let summary = run(&mut p.state, &p.structure, &p.loads, &cfg.time, &mut |snap| {
        let n_s = snap.u.n_s();
        let mags = displacement_magnitudes(snap.u);
        let peaks: Vec<f64> = (0..n_s)
            .map(|r| mags.iter().skip(r).step_by(n_s).fold(0.0, |a: f64, &b| a.max(b)))
            .collect();
        trace.push(TracePoint { step: snap.step, t: snap.t, max_displacement: ensemble_stats(&peaks) });
        Ok(())
    })?;
    timings.time_loop = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let result = postprocess(cfg, &geo, p, summary, trace)?;
    timings.postprocess = clock.elapsed().as_secs_f64();
    Ok((result, timings))
}

fn postprocess(
    cfg: &RunConfig,
    geo: &Geometry,
    p: Prepared,
    summary: RunSummary,
    trace: Vec<TracePoint>,
) -> Result<ScenarioResult> {
    let n_s = p.state.n_s();
    let length = geo.centerline.total_length();
    let n_slices = cfg.output.n_slices;
    let u = &p.state.u_curr;
    let displacement_slices = slice_average(
        &SliceSamples::nodal(&geo.mesh, &geo.centerline, n_s, displacement_magnitudes(u))?,
        length,
        n_slices,
    )?;
    let generator = if geo.profile_path.is_empty() {
        None
    } else {
        Some(displacement_profile(&geo.mesh, u, &geo.profile_path)?)
    };
    let stresses = cylindrical_stresses(&geo.mesh, &geo.centerline, u, &p.structure.modulus, &cfg.material, summary.final_time)?;
    let stress_slices = (0..6)
        .map(|c| {
            let s = SliceSamples::gauss(&geo.mesh, &geo.centerline, n_s, stresses.component_samples(c))?;
            slice_average(&s, length, n_slices)
        })
        .collect::<Result<Vec<_>>>()?;
    let margin = cfg.interior_margin();
    Ok(ScenarioResult {
        summary,
        n_s,
        displacement_slices,
        generator,
        stresses,
        stress_slices,
        trace,
        material: p.material,
        interior: (margin, length - margin),
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    config_hash: String,
    config: serde_json::Value,
    seeds: Seeds,
    mesh: MeshInfo,
    n_s: usize,
    steps: usize,
    final_time: f64,
    stiffness_updates: usize,
    critical_time_step: Option<f64>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Seeds {
    run: u64,
    modulus: u64,
    thickness: u64,
}

#[derive(Debug, Serialize)]
struct MeshInfo {
    nodes: usize,
    elements: usize,
    total_area: f64,
}

/// Writes profiles, stresses, trace and `manifest.json` into `out_dir`;
/// timings go to `timing.json`. Returns the written file names.
pub fn write_outputs(
    cfg: &RunConfig,
    geo_mesh: &SurfaceMesh,
    result: &ScenarioResult,
    timings: &Timings,
    out_dir: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut names = Vec::new();
    let per_r = cfg.output.per_realization;
    let n_s = result.n_s;

    let slice_csv = |name: &str, prof: &SliceProfile, names: &mut Vec<String>| -> Result<()> {
        let flat: Vec<f64> = prof.means.iter().flatten().copied().collect();
        write_profile_csv(
            out_dir.join(name),
            "arc_length",
            &prof.centers(),
            &prof.stats,
            per_r.then_some((flat.as_slice(), n_s)),
        )?;
        names.push(name.to_string());
        Ok(())
    };
    slice_csv("profile_displacement.csv", &result.displacement_slices, &mut names)?;
    for (c, prof) in CYLINDRICAL_COMPONENTS.iter().zip(&result.stress_slices) {
        slice_csv(&format!("profile_stress_{c}.csv"), prof, &mut names)?;
    }
    if let Some(g) = &result.generator {
        let stats: Vec<Option<EnsembleStats>> = g.stats.iter().copied().map(Some).collect();
        write_profile_csv(
            out_dir.join("profile_generator.csv"),
            "arc_length",
            &g.position,
            &stats,
            per_r.then_some((g.values.as_slice(), n_s)),
        )?;
        names.push("profile_generator.csv".into());
    }
    write_stress_csv(out_dir.join("stress.csv"), geo_mesh, &result.stresses)?;
    names.push("stress.csv".into());

    let trace_path = out_dir.join("trace.csv");
    let mut text = String::from("step,t,max_u_mean,max_u_q05,max_u_q95\n");
    for tp in &result.trace {
        let s = tp.max_displacement;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            tp.step,
            crate::postproc::sig9(tp.t),
            crate::postproc::sig9(s.mean),
            crate::postproc::sig9(s.q05),
            crate::postproc::sig9(s.q95)
        ));
    }
    fs::write(&trace_path, text).map_err(|e| Error::io(&trace_path, e))?;
    names.push("trace.csv".into());

    if cfg.output.write_fields {
        for (name, f) in [("field_modulus.cvfe", &result.material.modulus_nodal), ("field_thickness.cvfe", &result.material.thickness_nodal)] {
            if let Some(f) = f {
                write_field_binary(f, out_dir.join(name))?;
                names.push(name.into());
            }
        }
    }

    let manifest = Manifest {
        name: &cfg.name,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        config: serde_json::to_value(cfg).map_err(|e| Error::Internal(e.to_string()))?,
        seeds: Seeds { run: cfg.seed, modulus: cfg.modulus_seed(), thickness: cfg.thickness_seed() },
        mesh: MeshInfo { nodes: geo_mesh.n_nodes(), elements: geo_mesh.n_elements(), total_area: geo_mesh.total_area() },
        n_s,
        steps: result.summary.steps,
        final_time: result.summary.final_time,
        stiffness_updates: result.summary.stiffness_updates,
        critical_time_step: result.summary.critical_step,
        outputs: names.clone(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    names.push("manifest.json".into());
    write_json(&out_dir.join("timing.json"), timings)?;
    names.push("timing.json".into());
    Ok(names)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Simulates and writes outputs to `out_dir` (or the configured directory).
/// A positive `cfg.workers` runs on a dedicated pool of that size.
pub fn run_scenario(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<(ScenarioResult, Vec<PathBuf>)> {
    let (result, timings) = if cfg.workers > 0 {
        crate::bench::pool(cfg.workers)?.install(|| simulate(cfg))?
    } else {
        simulate(cfg)?
    };
    let dir = out_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);
    // Geometry is cheap to rebuild and keeps the result free of a mesh copy.
    let geo = build_geometry(cfg)?;
    let names = write_outputs(cfg, &geo.mesh, &result, &timings, &dir)?;
    Ok((result, names.into_iter().map(|n| dir.join(n)).collect()))
}

/// Which material field to validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Modulus,
    Thickness,
}

/// Below this many realizations the binned estimate is noisy.
pub const MIN_VALIDATION_SAMPLES: usize = 500;

#[derive(Debug, Clone)]
pub struct FieldValidation {
    pub h: Vec<f64>,
    pub empirical: Vec<f64>,
    pub exact: Vec<f64>,
    pub pair_counts: Vec<usize>,
    /// Largest `|empirical - exact|` over non-empty bins with `h <= 2 ρ`.
    pub max_deviation: f64,
    pub warnings: Vec<String>,
}

/// Samples `cfg.n_s` realizations of one field and compares the binned
/// empirical correlation with the Matérn curve.
pub fn validate_field(cfg: &RunConfig, kind: FieldKind, n_bins: usize) -> Result<FieldValidation> {
    let f = match kind {
        FieldKind::Modulus => (&cfg.fields.modulus, cfg.modulus_seed()),
        FieldKind::Thickness => (&cfg.fields.thickness, cfg.thickness_seed()),
    };
    let (field, seed) = f;
    if field.std == 0.0 {
        return Err(Error::Config("field has zero standard deviation; nothing to validate".into()));
    }
    let geo = build_geometry(cfg)?;
    let params = field.matern()?;
    let op = build_precision(&assemble_galerkin(&geo.mesh), &params)?;
    let ens = sample_realizations(&op, field.mean, 0..cfg.n_s, seed)?;
    let est = crate::gmrf::empirical_correlation(&ens, &geo.mesh, n_bins)?;
    let h = est.bin_centers();
    let exact: Vec<f64> = h.iter().map(|&x| crate::gmrf::matern_correlation(&params, x)).collect();
    let max_deviation = h
        .iter()
        .zip(est.correlation.iter().zip(&exact))
        .filter(|(x, (e, _))| **x <= 2.0 * params.corr_len && e.is_finite())
        .map(|(_, (e, x))| (e - x).abs())
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if cfg.n_s < MIN_VALIDATION_SAMPLES {
        warnings.push(format!(
            "only {} realizations; at least {MIN_VALIDATION_SAMPLES} are recommended for a stable estimate",
            cfg.n_s
        ));
    }
    let empty = est.pair_counts.iter().filter(|&&c| c == 0).count();
    if empty > 0 {
        warnings.push(format!("{empty} distance bins contain no node pairs"));
    }
    if est.zero_variance_nodes > 0 {
        warnings.push(format!("{} interior nodes have zero sample variance", est.zero_variance_nodes));
    }
    Ok(FieldValidation {
        h,
        empirical: est.correlation,
        exact,
        pair_counts: est.pair_counts,
        max_deviation,
        warnings,
    })
}

impl FieldValidation {
    /// CSV `h,empirical,exact,pairs`, then a `#` summary line per warning.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use crate::postproc::sig9;
        let mut text = String::from("h,empirical,exact,pairs\n");
        for i in 0..self.h.len() {
            text.push_str(&format!(
                "{},{},{},{}\n",
                sig9(self.h[i]),
                sig9(self.empirical[i]),
                sig9(self.exact[i]),
                self.pair_counts[i]
            ));
        }
        text.push_str(&format!("# max_deviation,{}\n", sig9(self.max_deviation)));
        for w in &self.warnings {
            text.push_str(&format!("# warning,{w}\n"));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
