use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinetic_entropy::error::Error;
use kinetic_entropy::experiment::{
    load_config, run_choose_c, run_diagnose, run_evolve, run_fit, run_sweep, DiagnoseConfig,
    EvolveConfig, FitConfig, SweepConfig,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "kentropy", version, about = "Entropy production diagnostics for singular collision kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Multiplies every quadrature resolution.
    #[arg(long, global = true, default_value_t = 1.0)]
    quad_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy, production and its time derivative for one profile.
    Diagnose,
    /// Scan a and delta, then fit scaling exponents.
    Sweep,
    /// Integrate the equation on a grid and record D(t).
    Evolve,
    /// Fit power laws to (a, value) samples.
    Fit,
    /// Pick the bulk level c for a counterexample profile.
    ChooseC,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn read<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Err(Failure::Config("--config PATH is required".into()));
    };
    load_config(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if !(cli.quad_scale.is_finite() && cli.quad_scale > 0.0) {
        return Err(Failure::Config(format!("--quad-scale must be positive, got {}", cli.quad_scale)));
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let cfg = cli.config.as_deref();
    let default_out = PathBuf::from("out");
    let out = cli.out.as_ref().unwrap_or(&default_out);
    match cli.command {
        Command::Diagnose => {
            let o = run_diagnose(&read::<DiagnoseConfig>(cfg)?, cli.quad_scale, out)?;
            let r = &o.report;
            println!("H = {:.6e}", r.entropy_h);
            println!("D = {:.6e} (symmetrized {:.6e})", r.d_direct, r.d_symmetric);
            println!(
                "dD/dt = {:.6e} = {:.6e} + {:.6e}",
                r.dtd_total, r.dtd_negative_term, r.dtd_positive_term
            );
            if o.region_map.checked && !o.region_map.ok {
                eprintln!("region map: {}", o.region_map.detail.as_deref().unwrap_or("failed"));
            }
        }
        Command::Sweep => {
            let sweep: SweepConfig = match cfg {
                Some(_) => read(cfg)?,
                None => SweepConfig::default(),
            };
            let out = cli.out.clone().or_else(|| sweep.out_dir.clone()).unwrap_or(default_out);
            let o = run_sweep(&sweep, cli.quad_scale, &out)?;
            for c in &o.cells {
                println!(
                    "{} a={:.4e} delta={:.1e} dD/dt={:.6e}{}",
                    c.kernel,
                    c.a,
                    c.delta,
                    c.dtd_total,
                    c.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
                );
            }
            if o.cells.iter().any(|c| c.error.is_some()) {
                return Err(Failure::Numerical("some sweep cells failed".into()));
            }
        }
        Command::Evolve => {
            let o = run_evolve(&read::<EvolveConfig>(cfg)?, cli.quad_scale, out)?;
            for r in &o.series.records {
                println!("t={:.6e} D={:.6e} dD/dt={:.6e}", r.t, r.d_direct, r.dtd_total);
            }
        }
        Command::Fit => {
            let o = run_fit(&read::<FitConfig>(cfg)?, out)?;
            let f = &o.fits;
            println!("power law: p = {:.4}, residual {:.3e}", f.power.exponent_p, f.power.residual);
            println!(
                "with log: p = {:.4}, q = {:.4}, residual {:.3e}",
                f.with_log.exponent_p, f.with_log.log_coefficient, f.with_log.residual
            );
        }
        Command::ChooseC => {
            let o = run_choose_c(&read::<DiagnoseConfig>(cfg)?, cli.quad_scale, out)?;
            println!("c = {}", o.choice.c);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
