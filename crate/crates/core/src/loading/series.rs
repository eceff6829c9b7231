//! Time-stamped traction snapshots.
//!
//! Binary layout (little endian): `b"CVTS"`, version `u32 = 1`, element
//! count `M u64`, snapshot count `K u64`, `K` stamps `f64`, then for each
//! snapshot `M` triples `f64` holding the fluid-side element traction.
//!
//! CSV layout: header `t,element,tx,ty,tz`, one row per (stamp, element),
//! every element exactly once per stamp, stamps strictly increasing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::traction::WallTraction;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::SurfaceMesh;
use crate::textfmt::float;

const MAGIC: &[u8; 4] = b"CVTS";
const VERSION: u32 = 1;

/// Piecewise-linear in time, repeating with period `t_last - t_first`.
#[derive(Debug, Clone, PartialEq)]
pub struct TractionSeries {
    pub time_stamps: Vec<f64>,
    pub snapshots: Vec<WallTraction>,
}

impl TractionSeries {
    pub fn new(time_stamps: Vec<f64>, snapshots: Vec<WallTraction>) -> Result<Self> {
        let s = Self { time_stamps, snapshots };
        s.check_stamps()?;
        Ok(s)
    }

    pub fn constant(snapshot: WallTraction) -> Self {
        Self {
            time_stamps: vec![0.0],
            snapshots: vec![snapshot],
        }
    }

    fn check_stamps(&self) -> Result<()> {
        if self.time_stamps.is_empty() || self.time_stamps.len() != self.snapshots.len() {
            return Err(Error::Validation(format!(
                "{} time stamps for {} snapshots",
                self.time_stamps.len(),
                self.snapshots.len()
            )));
        }
        if self.time_stamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("non-finite time stamp".into()));
        }
        if let Some(w) = self.time_stamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "time stamps must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn check(&self, mesh: &SurfaceMesh) -> Result<()> {
        self.check_stamps()?;
        self.snapshots.iter().try_for_each(|s| s.check(mesh))
    }

    pub fn period(&self) -> f64 {
        self.time_stamps.last().unwrap() - self.time_stamps[0]
    }

    /// Bracketing snapshot indices and the weight of the upper one.
    pub fn locate(&self, t: f64) -> (usize, usize, f64) {
        locate(&self.time_stamps, t)
    }

    pub fn at(&self, t: f64) -> WallTraction {
        let (i, j, w) = self.locate(t);
        if w == 0.0 {
            return self.snapshots[i].clone();
        }
        let (a, b) = (&self.snapshots[i], &self.snapshots[j]);
        WallTraction {
            pressure: a.pressure.iter().zip(&b.pressure).map(|(x, y)| x + w * (y - x)).collect(),
            element_traction: a
                .element_traction
                .iter()
                .zip(&b.element_traction)
                .map(|(x, y)| std::array::from_fn(|k| x[k] + w * (y[k] - x[k])))
                .collect(),
        }
    }
}

/// Shared by traction series and waveforms. Inside `[t0, t_last]` the
/// stamps are used as is; outside, `t` wraps by the span.
pub(crate) fn locate(stamps: &[f64], t: f64) -> (usize, usize, f64) {
    let n = stamps.len();
    let (t0, t1) = (stamps[0], stamps[n - 1]);
    if n == 1 {
        return (0, 0, 0.0);
    }
    let t = if (t0..=t1).contains(&t) { t } else { t0 + (t - t0).rem_euclid(t1 - t0) };
    let j = stamps.partition_point(|&s| s <= t);
    if j == 0 {
        return (0, 0, 0.0);
    }
    if j == n {
        return (n - 1, n - 1, 0.0);
    }
    let i = j - 1;
    let w = (t - stamps[i]) / (stamps[j] - stamps[i]);
    if w == 0.0 { (i, i, 0.0) } else { (i, j, w) }
}

fn reject_pressure(series: &TractionSeries) -> Result<()> {
    if series.snapshots.iter().any(|s| s.pressure.iter().any(|&p| p != 0.0)) {
        return Err(Error::Argument(
            "traction files store element tractions only; fold nodal pressure in first".into(),
        ));
    }
    Ok(())
}

pub fn write_traction_series(series: &TractionSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = series.snapshots.first().map_or(0, |s| s.element_traction.len());
    reject_pressure(series)?;
    let mut buf = Vec::with_capacity(24 + 8 * series.time_stamps.len() * (1 + 3 * m));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    buf.extend_from_slice(&(series.time_stamps.len() as u64).to_le_bytes());
    for t in &series.time_stamps {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    for s in &series.snapshots {
        for v in s.element_traction.iter().flatten() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_traction_series(path: impl AsRef<Path>, mesh: &SurfaceMesh) -> Result<TractionSeries> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format(path, 0, m);
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(bad("not a traction series file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported traction series version {version}")));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = k
        .checked_mul(1 + 3 * m)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    if m != mesh.n_elements() {
        return Err(Error::Validation(format!(
            "traction series has {m} elements, mesh has {}",
            mesh.n_elements()
        )));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let stamps: Vec<f64> = (0..k).map(|i| f(24 + 8 * i)).collect();
    let base = 24 + 8 * k;
    let snapshots = (0..k)
        .map(|s| {
            let tr: Vec<Vec3> = (0..m)
                .map(|e| std::array::from_fn(|c| f(base + 8 * ((s * m + e) * 3 + c))))
                .collect();
            WallTraction::from_elements(mesh, tr)
        })
        .collect::<Result<Vec<_>>>()?;
    TractionSeries::new(stamps, snapshots)
}

pub fn write_traction_csv(series: &TractionSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    reject_pressure(series)?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "t,element,tx,ty,tz").map_err(io)?;
    for (t, s) in series.time_stamps.iter().zip(&series.snapshots) {
        for (e, v) in s.element_traction.iter().enumerate() {
            writeln!(w, "{},{e},{},{},{}", float(*t), float(v[0]), float(v[1]), float(v[2])).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_traction_csv(path: impl AsRef<Path>, mesh: &SurfaceMesh) -> Result<TractionSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let m = mesh.n_elements();
    let mut stamps: Vec<f64> = Vec::new();
    let mut values: Vec<Vec<Option<Vec3>>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(Error::format(path, line_no, format!("expected 5 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::format(path, line_no, format!("bad number {s:?}")));
        let t = num(cols[0])?;
        let e: usize = cols[1]
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("bad element index {:?}", cols[1])))?;
        if e >= m {
            return Err(Error::format(path, line_no, format!("element {e} out of range for {m} elements")));
        }
        let v = [num(cols[2])?, num(cols[3])?, num(cols[4])?];
        if stamps.last() != Some(&t) {
            if stamps.last().is_some_and(|&last| t <= last) {
                return Err(Error::format(path, line_no, "time stamps must increase strictly"));
            }
            stamps.push(t);
            values.push(vec![None; m]);
        }
        let slot = &mut values.last_mut().unwrap()[e];
        if slot.is_some() {
            return Err(Error::format(path, line_no, format!("element {e} repeated at t = {t}")));
        }
        *slot = Some(v);
    }
    let snapshots = values
        .into_iter()
        .zip(&stamps)
        .map(|(vals, t)| {
            let tr = vals
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Validation(format!("snapshot at t = {t} is missing elements")))?;
            WallTraction::from_elements(mesh, tr)
        })
        .collect::<Result<Vec<_>>>()?;
    TractionSeries::new(stamps, snapshots)
}
