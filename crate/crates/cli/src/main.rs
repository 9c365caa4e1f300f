//! Experiment harness for the long-jump exclusion process toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure or a
//! failed verification gate.

mod config;
mod output;
mod tasks;

use clap::{Parser, Subcommand};
use config::{load_config_file, parse_variant, ExperimentConfig, Task};
use fracsep::{ModelParams, Variant};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(
    name = "fracsep",
    version,
    about = "Exclusion process with heavy-tailed jumps and extended reservoirs: \
             simulation, density evolution and operator diagnostics"
)]
struct Cli {
    /// TOML config file; CLI flags and FRACSEP_* environment variables
    /// override its values
    #[arg(long, global = true, env = "FRACSEP_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory (created if missing)
    #[arg(long, global = true, env = "FRACSEP_OUT")]
    out: Option<PathBuf>,

    /// Lattice size N (bulk sites 1..N-1)
    #[arg(long = "N", global = true, env = "FRACSEP_N")]
    n: Option<usize>,

    /// Jump tail exponent, in (0,2) excluding 1
    #[arg(long, global = true, env = "FRACSEP_GAMMA", allow_hyphen_values = true)]
    gamma: Option<f64>,

    /// Reservoir strength exponent
    #[arg(long, global = true, env = "FRACSEP_THETA", allow_hyphen_values = true)]
    theta: Option<f64>,

    /// Reservoir intensity, > 0
    #[arg(long, global = true, env = "FRACSEP_KAPPA")]
    kappa: Option<f64>,

    /// Left reservoir density, in (0,1)
    #[arg(long, global = true, env = "FRACSEP_ALPHA")]
    alpha: Option<f64>,

    /// Right reservoir density, in (0,1)
    #[arg(long, global = true, env = "FRACSEP_BETA")]
    beta: Option<f64>,

    /// Macroscopic time horizon
    #[arg(long = "T", global = true, env = "FRACSEP_T")]
    t: Option<f64>,

    /// Replica count for Monte Carlo tasks
    #[arg(long, global = true, env = "FRACSEP_REPLICAS")]
    replicas: Option<u64>,

    /// Base seed; replica k derives its stream from (seed, k)
    #[arg(long, global = true, env = "FRACSEP_SEED")]
    seed: Option<u64>,

    /// Dynamics variant: full | one-site | diffusive-bulk
    #[arg(long, global = true, env = "FRACSEP_VARIANT")]
    variant: Option<String>,

    /// Number of sample times on [0, T] (inclusive)
    #[arg(long, global = true, env = "FRACSEP_SAMPLES")]
    samples: Option<usize>,

    /// Constant initial density profile
    #[arg(long, global = true, env = "FRACSEP_G_INIT")]
    g_init: Option<f64>,

    /// Worker threads (defaults to the rayon heuristic)
    #[arg(long, global = true, env = "FRACSEP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo ensemble of the particle system; writes the mean
    /// occupation profile with standard errors
    Simulate,
    /// Deterministic mean-occupation ODE trajectory
    Evolve,
    /// Stationary density profile
    Stationary,
    /// Stationary profiles and regime labels over a (gamma, theta) grid
    Sweep {
        /// Comma-separated gamma values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gamma_grid: Option<Vec<f64>>,
        /// Comma-separated theta values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta_grid: Option<Vec<f64>>,
    },
    /// Discrete-to-continuum operator convergence diagnostic e_N
    VerifyOperator {
        /// Comma-separated lattice sizes
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
    },
    /// Ensemble vs ODE duality check plus the weak residual of the
    /// classified regime
    VerifyHydro {
        /// Evaluate the residual of this regime instead of the classified
        /// one (negative control)
        #[arg(long)]
        force_regime: Option<String>,
    },
}

fn resolve(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let file = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => Default::default(),
    };
    let fp = file.params.unwrap_or_default();
    let fr = file.run.unwrap_or_default();
    let fs = file.sweep.unwrap_or_default();
    let fq = file.quadrature.unwrap_or_default();

    let variant: Variant = match cli.variant.clone().or(fp.variant) {
        Some(s) => parse_variant(&s)?,
        None => Variant::Full,
    };
    let params = ModelParams::new(
        cli.n.or(fp.n).unwrap_or(128),
        cli.gamma.or(fp.gamma).unwrap_or(1.5),
        cli.theta.or(fp.theta).unwrap_or(0.0),
        cli.kappa.or(fp.kappa).unwrap_or(1.0),
        cli.alpha.or(fp.alpha).unwrap_or(0.2),
        cli.beta.or(fp.beta).unwrap_or(0.8),
        variant,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let (task, gamma_grid, theta_grid, n_grid, forced_regime) = match &cli.command {
        Command::Simulate => (Task::Simulate, vec![], vec![], vec![], None),
        Command::Evolve => (Task::Evolve, vec![], vec![], vec![], None),
        Command::Stationary => (Task::Stationary, vec![], vec![], vec![], None),
        Command::Sweep { gamma_grid, theta_grid } => (
            Task::Sweep,
            gamma_grid
                .clone()
                .or(fs.gamma)
                .unwrap_or_else(|| vec![0.5, 1.5]),
            theta_grid
                .clone()
                .or(fs.theta)
                .unwrap_or_else(|| vec![-1.0, 0.0, 0.2, 0.5, 2.0]),
            vec![],
            None,
        ),
        Command::VerifyOperator { n_grid } => (
            Task::VerifyOperator,
            vec![],
            vec![],
            n_grid
                .clone()
                .or(fs.n_grid)
                .unwrap_or_else(|| vec![128, 256, 512, 1024]),
            None,
        ),
        Command::VerifyHydro { force_regime } => {
            (Task::VerifyHydro, vec![], vec![], vec![], force_regime.clone())
        }
    };

    let config = ExperimentConfig {
        task,
        params,
        t_max: cli.t.or(fr.t).unwrap_or(0.1),
        samples: cli.samples.or(fr.samples).unwrap_or(201),
        replicas: cli.replicas.or(fr.replicas).unwrap_or(100),
        seed: cli.seed.or(fr.seed).unwrap_or(42),
        g_init: cli.g_init.or(fr.g_init).unwrap_or(0.5),
        gamma_grid,
        theta_grid,
        n_grid,
        quad_epsilon: fq.epsilon.unwrap_or(1e-12),
        quad_tol_interior: fq.tol_interior.unwrap_or(1e-8),
        quad_tol_boundary: fq.tol_boundary.unwrap_or(1e-6),
        forced_regime,
        out_dir: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
    };
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("config error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&config.out_dir) {
        eprintln!("config error: cannot create {}: {e}", config.out_dir.display());
        return ExitCode::from(2);
    }

    let start = Instant::now();
    match tasks::run(&config) {
        Ok(outcome) => {
            let wall = start.elapsed().as_millis();
            match output::write_summary(&config, outcome.payload, outcome.columns, wall) {
                Ok(path) => {
                    println!(
                        "{}: {} ({} ms), summary at {}",
                        config.task.name(),
                        if outcome.passed { "ok" } else { "verification failed" },
                        wall,
                        path.display()
                    );
                    if outcome.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("cannot write summary: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Err(e) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}
