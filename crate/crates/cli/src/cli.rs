//! Argument grammar and flag-over-config resolution.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Report};
use crate::config::{load_config, RunConfig, Schedule};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "pollinet", version, about = "Plant-pollinator network simulations across scales")]
pub struct Cli {
    /// Worker threads for replicas and sweeps (default: all cores).
    #[arg(long, env = "POLLINET_JOBS", global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a community and export its edges, traits and degrees.
    SampleGraph {
        #[command(flatten)]
        common: Common,
    },
    /// Run the individual-based model.
    SimulateIbm {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: Option<u64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Integrate the mean-field ODE.
    IntegrateOde {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Compare IBM fluctuations with the Ornstein-Uhlenbeck limit.
    SimulateFluctuations {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: Option<u64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        ou_paths: Option<usize>,
    },
    /// Solve the trait-continuum equation on a grid.
    SolveKinetic {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        grid_n: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Equilibria, nullclines and basins of the one-plant one-pollinator system.
    AnalyzePair {
        #[command(flatten)]
        common: Common,
    },
    /// W1 distance between sampled ODEs and the grid solution over a ladder of n.
    ConvergenceStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n", value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// IBM vs ODE error over a ladder of carrying capacities.
    LlnStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K", value_delimiter = ',')]
        ks: Option<Vec<u64>>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
    },
}

fn base(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn set_t_end(cfg: &mut RunConfig, t_end: Option<f64>) {
    if let Some(t) = t_end {
        cfg.schedule.get_or_insert_with(|| Schedule::new(t)).t_end = t;
    }
}

fn set_replicas(cfg: &mut RunConfig, replicas: Option<usize>) {
    if let Some(r) = replicas {
        cfg.schedule.get_or_insert_with(|| Schedule::new(1.0)).replicas = r;
    }
}

/// Apply flags on top of the config file.
pub fn resolve(command: &Command) -> CliResult<RunConfig> {
    Ok(match command {
        Command::SampleGraph { common } | Command::AnalyzePair { common } => base(common)?,
        Command::SimulateIbm { common, k, t_end, replicas } => {
            let mut c = base(common)?;
            c.scale.k = k.or(c.scale.k);
            set_t_end(&mut c, *t_end);
            set_replicas(&mut c, *replicas);
            c
        }
        Command::IntegrateOde { common, t_end } => {
            let mut c = base(common)?;
            set_t_end(&mut c, *t_end);
            c
        }
        Command::SimulateFluctuations { common, k, t_end, replicas, ou_paths } => {
            let mut c = base(common)?;
            c.scale.k = k.or(c.scale.k);
            set_t_end(&mut c, *t_end);
            set_replicas(&mut c, *replicas);
            if let Some(p) = ou_paths {
                c.fluctuations.ou_paths = *p;
            }
            c
        }
        Command::SolveKinetic { common, grid_n, t_end } => {
            let mut c = base(common)?;
            c.scale.grid_n = grid_n.or(c.scale.grid_n);
            set_t_end(&mut c, *t_end);
            c
        }
        Command::ConvergenceStudy { common, ns, seeds, t_end } => {
            let mut c = base(common)?;
            if ns.is_some() {
                c.study.ns = ns.clone();
            }
            c.study.seeds = seeds.or(c.study.seeds);
            set_t_end(&mut c, *t_end);
            c
        }
        Command::LlnStudy { common, ks, replicas, t_end } => {
            let mut c = commands::resolve_lln(&base(common)?);
            if ks.is_some() {
                c.study.ks = ks.clone();
            }
            set_t_end(&mut c, *t_end);
            set_replicas(&mut c, *replicas);
            c
        }
    })
}

pub fn run(command: &Command) -> CliResult<Report> {
    let cfg = resolve(command)?;
    match command {
        Command::SampleGraph { .. } => commands::sample_graph(&cfg),
        Command::SimulateIbm { .. } => commands::simulate_ibm(&cfg),
        Command::IntegrateOde { .. } => commands::integrate_ode(&cfg),
        Command::SimulateFluctuations { .. } => commands::simulate_fluctuations(&cfg),
        Command::SolveKinetic { .. } => commands::solve_kinetic(&cfg),
        Command::AnalyzePair { .. } => commands::analyze_pair(&cfg),
        Command::ConvergenceStudy { .. } => commands::convergence_study(&cfg),
        Command::LlnStudy { .. } => commands::lln_study(&cfg),
    }
}
