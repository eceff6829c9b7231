use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cvens_core::bench::{run_benchmark, spmv_table, BenchConfig};
use cvens_core::config::RunConfig;
use cvens_core::integrator::critical_time_step;
use cvens_core::mesh::{generate_cylinder_mesh, load_mesh, save_mesh, MeshFormat};
use cvens_core::scenario::{run_scenario, validate_field, FieldKind};
use cvens_core::shell::GaussPointField;
use cvens_core::Error;

#[derive(Parser)]
#[command(name = "cvens", version, about = "Ensemble vessel-wall simulations with random material fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied after the config file and `CVENS_*` variables.
#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, integrate, and post-process one scenario.
    Run {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Time the ensemble solve over a grid of ensemble sizes and worker counts.
    Bench {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated worker counts.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        workers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        n_s: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1.0e-5)]
        dt: f64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Also time single stiffness products for each operator variant.
        #[arg(long)]
        spmv: bool,
    },
    /// Compare the empirical correlation of sampled fields with the Matérn curve.
    FieldValidate {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value_t = Field::Modulus)]
        field: Field,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Ensemble size; defaults to the config's n_s.
        #[arg(long)]
        n_s: Option<usize>,
    },
    /// Print node, element and boundary-set counts and a critical time step.
    MeshInfo {
        mesh: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Elastic modulus for the time-step estimate [Barye].
        #[arg(long, default_value_t = 7.0e6)]
        modulus: f64,
        /// Density [g/cm³].
        #[arg(long, default_value_t = 1.06)]
        density: f64,
    },
    /// Write a structured cylinder mesh along +z.
    GenCylinder {
        #[arg(long, default_value_t = 4.0)]
        diameter: f64,
        #[arg(long, default_value_t = 30.0)]
        length: f64,
        #[arg(long, default_value_t = 43)]
        n_circ: usize,
        #[arg(long, default_value_t = 60)]
        n_axial: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Also write the axis as a centerline file.
        #[arg(long)]
        centerline: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Modulus,
    Thickness,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Vtk,
    Json,
}

impl From<Format> for MeshFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Vtk => MeshFormat::LegacyVtkAscii,
            Format::Json => MeshFormat::InternalJson,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Divergence { .. } => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
        _ => 1,
    }
}

fn load_config(args: &RunArgs) -> cvens_core::Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> cvens_core::Result<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    Ok(dir)
}

fn execute(cli: Cli) -> cvens_core::Result<()> {
    match cli.command {
        Command::Run { args, workers } => {
            let mut cfg = load_config(&args)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let (res, files) = run_scenario(&cfg, None)?;
            println!(
                "{}: {} realizations, {} steps to t = {:e} s",
                cfg.name, res.n_s, res.summary.steps, res.summary.final_time
            );
            for f in files {
                println!("  {}", f.display());
            }
        }
        Command::Bench { args, workers, n_s, steps, dt, repeats, spmv } => {
            let cfg = load_config(&args)?;
            cfg.validate()?;
            let bench = BenchConfig { n_s, workers, n_steps: steps, dt, repeats };
            let report = run_benchmark(&cfg, &bench)?;
            let dir = out_dir(&cfg)?;
            report.write(dir)?;
            print!("{}", report.table_text());
            if spmv {
                let n = bench.n_s.iter().copied().max().unwrap_or(1);
                for (name, t) in spmv_table(&cfg, n, 1, 50)? {
                    println!("{name:<24} {:.3e} s per product", t);
                }
            }
        }
        Command::FieldValidate { args, field, bins, n_s } => {
            let mut cfg = load_config(&args)?;
            if let Some(n) = n_s {
                cfg.n_s = n;
            }
            cfg.validate()?;
            let (kind, name) = match field {
                Field::Modulus => (FieldKind::Modulus, "modulus"),
                Field::Thickness => (FieldKind::Thickness, "thickness"),
            };
            let report = validate_field(&cfg, kind, bins)?;
            let path = out_dir(&cfg)?.join(format!("correlation_{name}.csv"));
            report.write_csv(&path)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            println!("max deviation for h <= 2 corr_len: {:.4}", report.max_deviation);
            println!("  {}", path.display());
        }
        Command::MeshInfo { mesh, format, modulus, density } => {
            let fmt = format.map_or_else(|| MeshFormat::from_path(&mesh), Into::into);
            let m = load_mesh(&mesh, fmt)?;
            println!("nodes      {}", m.n_nodes());
            println!("elements   {}", m.n_elements());
            println!("area       {:.6e} cm^2", m.total_area());
            for (name, nodes) in m.boundary_sets() {
                println!("set {name:<16} {} nodes", nodes.len());
            }
            let field = GaussPointField::uniform(m.n_elements(), 1, modulus);
            let crit = critical_time_step(&m, &field, density, 1.0)?;
            println!("critical dt {:.4e} s (E = {modulus:e}, rho = {density})", crit.ensemble);
        }
        Command::GenCylinder { diameter, length, n_circ, n_axial, out, format, centerline } => {
            let m = generate_cylinder_mesh(diameter, length, n_circ, n_axial)?;
            let fmt = format.map_or_else(|| MeshFormat::from_path(&out), Into::into);
            save_mesh(&m, &out, fmt)?;
            if let Some(c) = centerline {
                let text = format!("0 0 0\n0 0 {length}\n");
                fs::write(&c, text).map_err(|e| Error::Io { path: c.clone(), source: e })?;
            }
            println!("{} nodes, {} elements -> {}", m.n_nodes(), m.n_elements(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
