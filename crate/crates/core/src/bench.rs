//! Dual-speedup benchmark: sample speedup `x` and parallel speedup `y`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::integrator::{run, CflCheck, TimeSteppingConfig};
use crate::linalg::{ElementStiffnesses, EnsembleVector, OperatorKind, SpmvStrategy, StiffnessOperator};
use crate::scenario::{build_geometry, factor_fields, prepare, Geometry, FieldOperators};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_s: Vec<usize>,
    pub workers: Vec<usize>,
    pub n_steps: usize,
    pub dt: f64,
    /// Timed repetitions per cell after one untimed warm-up.
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_s: vec![1, 10, 100],
            workers: vec![1],
            n_steps: 1000,
            dt: 1.0e-5,
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchCell {
    pub n_s: usize,
    pub workers: usize,
    /// Sampling, assembly and time loop, one entry per repetition.
    pub inclusive: Vec<f64>,
    /// The integrator call alone (operator build plus steps).
    pub loop_only: Vec<f64>,
}

impl BenchCell {
    pub fn median_inclusive(&self) -> f64 {
        median(&self.inclusive)
    }

    pub fn median_loop(&self) -> f64 {
        median(&self.loop_only)
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub n_elements: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub cells: Vec<BenchCell>,
}

impl SpeedupReport {
    pub fn cell(&self, n_s: usize, workers: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.n_s == n_s && c.workers == workers)
    }

    fn time(&self, n_s: usize, workers: usize) -> Option<f64> {
        self.cell(n_s, workers).map(BenchCell::median_inclusive)
    }

    /// `n_s T(1) / T(n_s)` at fixed workers.
    pub fn sample_speedup(&self, n_s: usize, workers: usize) -> Option<f64> {
        Some(n_s as f64 * self.time(1, workers)? / self.time(n_s, workers)?)
    }

    /// `T(1 worker) / T(workers)` at fixed `n_s`.
    pub fn parallel_speedup(&self, n_s: usize, workers: usize) -> Option<f64> {
        Some(self.time(n_s, 1)? / self.time(n_s, workers)?)
    }

    fn axes(&self) -> (Vec<usize>, Vec<usize>) {
        let mut n: Vec<usize> = self.cells.iter().map(|c| c.n_s).collect();
        let mut w: Vec<usize> = self.cells.iter().map(|c| c.workers).collect();
        n.sort_unstable();
        n.dedup();
        w.sort_unstable();
        w.dedup();
        (n, w)
    }

    /// Rows are ensemble sizes, columns worker counts; each cell is the
    /// median inclusive time with `(x,y)`.
    pub fn table_text(&self) -> String {
        let (ns, ws) = self.axes();
        let mut out = format!(
            "{} elements, {} steps, dt = {:e} s; median of timed runs, (x,y) = (sample, parallel) speedup\n",
            self.n_elements, self.n_steps, self.dt
        );
        let width = 26;
        let _ = write!(out, "{:>8}", "");
        for w in &ws {
            let _ = write!(out, "{:>width$}", format!("{w} worker{}", if *w == 1 { "" } else { "s" }));
        }
        out.push('\n');
        for n in &ns {
            let _ = write!(out, "{:>8}", format!("{n} Smp"));
            for w in &ws {
                let cell = match (self.time(*n, *w), self.sample_speedup(*n, *w), self.parallel_speedup(*n, *w)) {
                    (Some(t), Some(x), Some(y)) => format!("{t:.3} s ({x:.2},{y:.2})"),
                    _ => "-".into(),
                };
                let _ = write!(out, "{cell:>width$}");
            }
            out.push('\n');
        }
        out
    }

    /// One row per repetition with the raw times.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from("n_s,workers,repetition,inclusive_s,loop_s\n");
        for c in &self.cells {
            for (i, (a, b)) in c.inclusive.iter().zip(&c.loop_only).enumerate() {
                let _ = writeln!(out, "{},{},{i},{a:e},{b:e}", c.n_s, c.workers);
            }
        }
        out
    }

    /// Medians with the derived speedups.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n_s,workers,median_inclusive_s,median_loop_s,x,y\n");
        for c in &self.cells {
            let x = self.sample_speedup(c.n_s, c.workers).unwrap_or(f64::NAN);
            let y = self.parallel_speedup(c.n_s, c.workers).unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{},{:e},{:e},{x},{y}", c.n_s, c.workers, c.median_inclusive(), c.median_loop());
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("bench_table.txt", self.table_text()),
            ("bench_raw.csv", self.raw_csv()),
            ("bench_summary.csv", self.summary_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

/// One timed run: sampling, assembly, and the time loop.
fn timed_run(cfg: &RunConfig, geo: &Geometry, ops: &FieldOperators, n_s: usize, time: &TimeSteppingConfig) -> Result<(f64, f64)> {
    let start = Instant::now();
    let mut p = prepare(cfg, geo, ops, 0..n_s)?;
    let loop_start = Instant::now();
    run(&mut p.state, &p.structure, &p.loads, time, &mut |_| Ok(()))?;
    let end = Instant::now();
    Ok(((end - start).as_secs_f64(), (end - loop_start).as_secs_f64()))
}

/// Runs every `(n_s, workers)` cell strictly one after another. The grid
/// always gains `n_s = 1` and `workers = 1` so both speedups are defined.
/// Mesh generation and field factorization happen once, untimed.
pub fn run_benchmark(cfg: &RunConfig, bench: &BenchConfig) -> Result<SpeedupReport> {
    if bench.n_s.is_empty() || bench.workers.is_empty() || bench.n_s.contains(&0) || bench.workers.contains(&0) {
        return Err(Error::Config("benchmark grid needs non-empty, positive n_s and workers lists".into()));
    }
    if bench.repeats < 3 {
        return Err(Error::Config("benchmark needs at least 3 timed repetitions".into()));
    }
    let mut ns = bench.n_s.clone();
    ns.push(1);
    ns.sort_unstable();
    ns.dedup();
    let mut ws = bench.workers.clone();
    ws.push(1);
    ws.sort_unstable();
    ws.dedup();

    let geo = build_geometry(cfg)?;
    let ops = factor_fields(cfg, &geo.mesh)?;
    let time = TimeSteppingConfig {
        dt: bench.dt,
        n_steps: bench.n_steps,
        observer_stride: bench.n_steps.max(1),
        cfl_check: CflCheck::Warn,
        ..cfg.time.clone()
    };
    let mut cells = Vec::new();
    for &w in &ws {
        let pool = pool(w)?;
        for &n in &ns {
            let cell = pool.install(|| -> Result<BenchCell> {
                timed_run(cfg, &geo, &ops, n, &time)?;
                let mut cell = BenchCell { n_s: n, workers: w, inclusive: Vec::new(), loop_only: Vec::new() };
                for _ in 0..bench.repeats {
                    let (a, b) = timed_run(cfg, &geo, &ops, n, &time)?;
                    cell.inclusive.push(a);
                    cell.loop_only.push(b);
                }
                Ok(cell)
            })?;
            log::info!("bench n_s = {n}, workers = {w}: median {:.3} s", cell.median_inclusive());
            cells.push(cell);
        }
    }
    Ok(SpeedupReport {
        n_elements: geo.mesh.n_elements(),
        n_steps: bench.n_steps,
        dt: bench.dt,
        cells,
    })
}

/// Median seconds per stiffness product for each operator variant.
pub fn spmv_table(cfg: &RunConfig, n_s: usize, workers: usize, products: usize) -> Result<Vec<(String, f64)>> {
    let geo = build_geometry(cfg)?;
    let ops = factor_fields(cfg, &geo.mesh)?;
    let p = prepare(cfg, &geo, &ops, 0..n_s)?;
    let kinds = [
        ("matrix-free", OperatorKind::MatrixFree),
        ("assembled row-scalar", OperatorKind::Assembled { strategy: SpmvStrategy::RowScalar }),
        (
            "assembled row-blocked",
            OperatorKind::Assembled { strategy: SpmvStrategy::RowBlocked { rows_per_task: 64, nnz_stream_len: 512 } },
        ),
        ("partitioned (4 parts)", OperatorKind::Partitioned { n_parts: 4, seed: 0 }),
    ];
    let x = EnsembleVector::from_fn(geo.mesh.n_nodes(), n_s, |i, c, r| ((i * 3 + c + r) % 7) as f64 - 3.0);
    pool(workers)?.install(|| {
        kinds
            .iter()
            .map(|(name, kind)| {
                let k = ElementStiffnesses::new(&geo.mesh, &cfg.material, &p.structure.modulus, &p.structure.thickness)?;
                let op = StiffnessOperator::build(&geo.mesh, k, *kind)?;
                let mut out = EnsembleVector::zeros(geo.mesh.n_nodes(), n_s);
                op.apply_into(&x, &mut out)?;
                let times = (0..3)
                    .map(|_| {
                        let t = Instant::now();
                        for _ in 0..products {
                            op.apply_into(&x, &mut out)?;
                        }
                        Ok(t.elapsed().as_secs_f64() / products.max(1) as f64)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((name.to_string(), median(&times)))
            })
            .collect()
    })
}
