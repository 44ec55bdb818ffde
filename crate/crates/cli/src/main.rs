use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use surfield::convergence::{
    run_convergence, run_oracle_suite, snapshot, with_thread_limit, DensitySpec, ExperimentConfig, OracleConfig,
    SnapshotSpec, Surface,
};
use surfield::assembly::MassMode;

#[derive(Parser)]
#[command(name = "surfield", version, about = "Galerkin-Chebyshev random fields on closed curves and surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Circle,
    Sphere,
}

impl From<SurfaceArg> for Surface {
    fn from(s: SurfaceArg) -> Self {
        match s {
            SurfaceArg::Circle => Surface::Circle,
            SurfaceArg::Sphere => Surface::Sphere,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MassArg {
    Consistent,
    Lumped,
}

impl From<MassArg> for MassMode {
    fn from(m: MassArg) -> Self {
        match m {
            MassArg::Consistent => MassMode::Consistent,
            MassArg::Lumped => MassMode::Lumped,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Matern,
    CirclePaper,
    Power,
    Oscillatory,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Strong-error convergence study; exits non-zero if a slope misses --slope-tolerance.
    Converge {
        /// JSON experiment description; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        surface: Option<SurfaceArg>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        #[arg(long)]
        fine_level: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mass_mode: Option<MassArg>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        c_v_scale: Option<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        slope_tolerance: Option<f64>,
    },
    /// Write one field sample as PLY (plus CSV and offset curve on the circle).
    Snapshot {
        #[arg(long, value_enum)]
        surface: SurfaceArg,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value = "matern")]
        density: DensityArg,
        #[arg(long, default_value_t = 10.0)]
        kappa2: f64,
        #[arg(long, default_value_t = 1e4)]
        v0: f64,
        #[arg(long, default_value_t = 500.0)]
        c0: f64,
        /// Value of the constant density.
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        mass_mode: Option<MassArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense oracle checks on a small mesh; exits non-zero if any check fails.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        surface: Option<SurfaceArg>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        cap: Option<usize>,
    },
}

fn run(cli: Cli) -> surfield::Result<bool> {
    match cli.command {
        Command::Converge {
            config,
            surface,
            levels,
            fine_level,
            alphas,
            n_samples,
            seed,
            mass_mode,
            epsilon,
            c_v_scale,
            output_dir,
            slope_tolerance,
        } => {
            let mut cfg = match (config, surface) {
                (Some(path), _) => ExperimentConfig::from_json_file(path)?,
                (None, Some(SurfaceArg::Sphere)) => ExperimentConfig::sphere_reference(),
                (None, _) => ExperimentConfig::circle_reference(),
            };
            if let Some(s) = surface {
                cfg.surface = s.into();
            }
            if let Some(v) = levels {
                cfg.levels = v;
            }
            if let Some(v) = fine_level {
                cfg.fine_level = v;
            }
            if let Some(v) = alphas {
                cfg.alphas = v;
            }
            if let Some(v) = n_samples {
                cfg.n_samples = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = mass_mode {
                cfg.mass_mode = Some(v.into());
            }
            if let Some(v) = epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = c_v_scale {
                cfg.c_v_scale = v;
            }
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            if slope_tolerance.is_some() {
                cfg.slope_tolerance = slope_tolerance;
            }
            let report = run_convergence(&cfg)?;
            print!("{}", report.summary());
            if let Some(dir) = &cfg.output_dir {
                report.write(dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(report.passed())
        }
        Command::Snapshot {
            surface,
            level,
            density,
            kappa2,
            v0,
            c0,
            value,
            alpha,
            seed,
            mass_mode,
            out,
        } => {
            let density = match density {
                DensityArg::Matern => DensitySpec::Matern { kappa2 },
                DensityArg::CirclePaper => DensitySpec::CirclePaper { v0 },
                DensityArg::Power => DensitySpec::Power { c0 },
                DensityArg::Oscillatory => DensitySpec::Oscillatory,
                DensityArg::Constant => DensitySpec::Constant { value },
            };
            let mut spec = SnapshotSpec::new(surface.into(), level, density, alpha, seed);
            spec.mass_mode = mass_mode.map(Into::into);
            let files = with_thread_limit(|| snapshot(&spec, &out))??;
            println!("wrote {} ({} vertices)", files.ply.display(), files.values.len());
            for extra in files.csv.iter().chain(&files.offset_ply) {
                println!("wrote {}", extra.display());
            }
            Ok(true)
        }
        Command::Oracle {
            config,
            surface,
            level,
            cap,
        } => {
            let mut cfg = match config {
                Some(path) => OracleConfig::from_json_file(path)?,
                None => OracleConfig::default(),
            };
            if let Some(s) = surface {
                cfg.surface = s.into();
            }
            if let Some(v) = level {
                cfg.level = v;
            }
            if let Some(v) = cap {
                cfg.cap = v;
            }
            let report = with_thread_limit(|| run_oracle_suite(&cfg))??;
            print!("{}", report.render());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
