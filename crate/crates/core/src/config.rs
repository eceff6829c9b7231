//! Run configuration: one TOML file, with `CVENS_` environment overrides.
//!
//! `CVENS_TIME__DT=2e-5` sets `time.dt`; `__` separates table levels and
//! keys are lowercased. Values are parsed as TOML (numbers, booleans,
//! arrays) and fall back to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gmrf::MaternParams;
use crate::integrator::TimeSteppingConfig;
use crate::linalg::OperatorKind;
use crate::mesh::MeshFormat;
use crate::shell::ShellMaterial;

pub const ENV_PREFIX: &str = "CVENS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_s: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 leaves the choice to the thread pool.
    #[serde(default)]
    pub workers: usize,
    /// Where results go; not part of the run's identity, so never serialized.
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub material: ShellMaterial,
    pub fields: FieldsConfig,
    pub load: LoadConfig,
    #[serde(default)]
    pub time: TimeSteppingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "run".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum MeshConfig {
    /// Generated along +z from the origin; the centerline is the axis.
    Cylinder {
        diameter: f64,
        length: f64,
        n_circ: usize,
        n_axial: usize,
        #[serde(default = "default_fixed")]
        fixed: Vec<String>,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<MeshFormat>,
        centerline: PathBuf,
        #[serde(default)]
        fixed: Vec<String>,
        /// Boundary set whose nodes, ordered along the centerline, form the
        /// displacement profile path.
        #[serde(default)]
        profile_set: Option<String>,
    },
}

fn default_fixed() -> Vec<String> {
    vec!["inlet_ring".into(), "outlet_ring".into()]
}

impl MeshConfig {
    pub fn fixed(&self) -> &[String] {
        match self {
            MeshConfig::Cylinder { fixed, .. } | MeshConfig::File { fixed, .. } => fixed,
        }
    }
}

/// Mean and standard deviation of one Gaussian field with Matérn
/// covariance. `std = 0` gives the constant mean field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub mean: f64,
    pub std: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub corr_len: f64,
    /// Overrides the seed derived from the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_nu() -> f64 {
    1.0
}

impl FieldConfig {
    pub fn matern(&self) -> Result<MaternParams> {
        MaternParams::new(self.std * self.std, self.nu, self.corr_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    pub modulus: FieldConfig,
    pub thickness: FieldConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadModeConfig {
    Steady,
    PulsatileSeries,
    AnalyticPoiseuille,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub mode: LoadModeConfig,
    #[serde(default, rename = "pressure_mmhg", alias = "pressure_mmHg")]
    pub pressure_mmhg: f64,
    /// mL/s; positive flows toward +z.
    #[serde(default)]
    pub flow_mls: f64,
    #[serde(default = "default_viscosity")]
    pub viscosity: f64,
    /// Traction file (`.csv` or binary). Optional in steady mode, where
    /// its first snapshot is used.
    #[serde(default)]
    pub series_path: Option<PathBuf>,
    /// `t,scale` CSV, or the literal `synthetic`.
    #[serde(default)]
    pub waveform_path: Option<PathBuf>,
    #[serde(default = "default_period")]
    pub waveform_period: f64,
}

fn default_viscosity() -> f64 {
    crate::loading::BLOOD_VISCOSITY
}

fn default_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    #[default]
    PerRealization,
    /// Mass from the mean thickness, shared by all realizations.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub operator: OperatorKind,
    pub mass: MassMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub n_slices: usize,
    /// Per-realization columns in profile CSVs.
    pub per_realization: bool,
    /// Also write the sampled fields (binary).
    pub write_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            n_slices: 30,
            per_realization: false,
            write_fields: false,
        }
    }
}

impl RunConfig {
    /// Reads `path`, applies `CVENS_` overrides from the process
    /// environment, resolves relative paths against the file's directory,
    /// and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: impl AsRef<Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Self::from_toml_str(&text, env)?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and applies overrides; no path resolution or validation.
    pub fn from_toml_str(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut overrides: Vec<(String, String)> =
            env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (key, raw) in overrides {
            let keys: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
            apply_override(&mut value, &keys, &raw).map_err(|m| Error::Config(format!("{key}: {m}")))?;
        }
        toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && p.as_os_str() != "synthetic" {
                *p = base.join(&*p);
            }
        };
        if let MeshConfig::File { path, centerline, .. } = &mut self.mesh {
            fix(path);
            fix(centerline);
        }
        for p in self.load.series_path.iter_mut().chain(self.load.waveform_path.iter_mut()) {
            fix(p);
        }
    }

    /// End regions excluded from interior statistics: one diameter for
    /// generated cylinders, nothing for file meshes.
    pub fn interior_margin(&self) -> f64 {
        match self.mesh {
            MeshConfig::Cylinder { diameter, .. } => diameter,
            MeshConfig::File { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_s == 0 {
            return bad("n_s must be at least 1".into());
        }
        match &self.mesh {
            MeshConfig::Cylinder { diameter, length, n_circ, n_axial, .. } => {
                if !(*diameter > 0.0 && *length > 0.0) || *n_circ < 3 || *n_axial < 2 {
                    return bad("cylinder needs positive size, n_circ >= 3 and n_axial >= 2".into());
                }
            }
            MeshConfig::File { path, centerline, .. } => {
                for p in [path, centerline] {
                    if !p.exists() {
                        return bad(format!("{} does not exist", p.display()));
                    }
                }
            }
        }
        self.material.validate()?;
        for (name, f) in [("modulus", &self.fields.modulus), ("thickness", &self.fields.thickness)] {
            if !(f.mean > 0.0) || !f.mean.is_finite() {
                return bad(format!("fields.{name}.mean must be positive"));
            }
            if !(f.std >= 0.0) || !f.std.is_finite() {
                return bad(format!("fields.{name}.std must be non-negative"));
            }
            if f.std == 0.0 {
                continue;
            }
            f.matern()
                .and_then(|p| p.alpha().map(|_| ()))
                .map_err(|e| Error::Config(format!("fields.{name}: {e}")))?;
        }
        let l = &self.load;
        if !(l.pressure_mmhg >= 0.0) || !l.pressure_mmhg.is_finite() {
            return bad("load.pressure_mmhg must be finite and non-negative".into());
        }
        if !(l.viscosity >= 0.0) || !l.flow_mls.is_finite() {
            return bad("load.viscosity must be non-negative and load.flow_mls finite".into());
        }
        if l.mode == LoadModeConfig::PulsatileSeries && l.series_path.is_none() {
            return bad("load.mode = pulsatile-series needs load.series_path".into());
        }
        if l.mode == LoadModeConfig::AnalyticPoiseuille && !matches!(self.mesh, MeshConfig::Cylinder { .. }) {
            return bad("analytic-poiseuille loading needs a generated cylinder mesh".into());
        }
        for p in l.series_path.iter().chain(&l.waveform_path) {
            if p.as_os_str() != "synthetic" && !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        if !(l.waveform_period > 0.0) {
            return bad("load.waveform_period must be positive".into());
        }
        if self.output.n_slices == 0 {
            return bad("output.n_slices must be at least 1".into());
        }
        self.time.validate()
    }

    /// Stable text form used for hashing and the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn modulus_seed(&self) -> u64 {
        self.fields.modulus.seed.unwrap_or_else(|| derive_seed(self.seed, 0))
    }

    pub fn thickness_seed(&self) -> u64 {
        self.fields.thickness.seed.unwrap_or_else(|| derive_seed(self.seed, 1))
    }
}

/// SplitMix64 finalizer over `seed + stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, keys: &[String], raw: &str) -> std::result::Result<(), String> {
    let (last, parents) = keys.split_last().ok_or("empty key")?;
    // Match existing keys case-insensitively (`pressure_mmHg`).
    let existing = |t: &toml::Table, k: &str| t.keys().find(|e| e.to_lowercase() == k).cloned().unwrap_or(k.to_string());
    let mut cur = table;
    for k in parents {
        let k = existing(cur, k);
        let entry = cur.entry(k.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("`{k}` is not a table"))?;
    }
    // Keep the type of an existing float when the override looks integral.
    let last = existing(cur, last);
    let mut v = parse_scalar(raw);
    if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (cur.get(&last), &v) {
        v = toml::Value::Float(*i as f64);
    }
    cur.insert(last, v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
n_s = 4
[mesh]
kind = "cylinder"
diameter = 4.0
length = 10.0
n_circ = 8
n_axial = 6
[fields.modulus]
mean = 7.0e6
std = 7.0e5
corr_len = 3.7
[fields.thickness]
mean = 0.4
std = 0.04
corr_len = 3.7
[load]
mode = "analytic-poiseuille"
pressure_mmHg = 13.0
flow_mls = 66.59
[time]
dt = 4.0e-5
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(MIN, Vec::new()).unwrap();
        c.validate().unwrap();
        assert_eq!(c.output.n_slices, 30);
        assert_eq!(c.load.viscosity, 0.04);
        assert_eq!(c.mesh.fixed(), ["inlet_ring", "outlet_ring"]);
        assert_eq!(c.fields.modulus.nu, 1.0);
        assert_ne!(c.modulus_seed(), c.thickness_seed());
    }

    #[test]
    fn env_overrides() {
        let env = vec![
            ("CVENS_TIME__DT".to_string(), "2e-5".to_string()),
            ("CVENS_N_S".to_string(), "9".to_string()),
            ("CVENS_LOAD__PRESSURE_MMHG".to_string(), "10".to_string()),
            ("CVENS_NAME".to_string(), "renamed".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let c = RunConfig::from_toml_str(MIN, env).unwrap();
        assert_eq!(c.time.dt, 2e-5);
        assert_eq!(c.n_s, 9);
        assert_eq!(c.load.pressure_mmhg, 10.0);
        assert_eq!(c.name, "renamed");
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let extra = format!("{MIN}\nbogus = 1\n");
        assert!(matches!(RunConfig::from_toml_str(&extra, Vec::new()), Err(Error::Config(_))));
        let zero = RunConfig::from_toml_str(MIN, vec![("CVENS_N_S".into(), "0".into())]).unwrap();
        assert!(matches!(zero.validate(), Err(Error::Config(_))));
        let frac = RunConfig::from_toml_str(MIN, vec![("CVENS_FIELDS__MODULUS__NU".into(), "0.5".into())]).unwrap();
        assert!(matches!(frac.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_is_stable() {
        let a = RunConfig::from_toml_str(MIN, Vec::new()).unwrap();
        let b = RunConfig::from_toml_str(MIN, Vec::new()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::from_toml_str(MIN, vec![("CVENS_SEED".into(), "5".into())]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
