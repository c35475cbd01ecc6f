//! `skinlab`: spectra, relaxation scans, steady states, perturbation theory
//! and quantum-jump trajectories from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use skinlab::io::{self, Manifest};

use config::{BackendKind, BcKind, Format, ModelKind, NumList, RunConfig, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] skinlab::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("every scan row failed (first: {first}); rows written to {}", path.display())]
    AllFailed { path: PathBuf, first: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Lib(e) => e.kind(),
            CliError::Config(_) => "config",
            CliError::AllFailed { .. } => "allRowsFailed",
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "skinlab",
    version,
    about = "Liouvillian spectra and relaxation of monitored free fermions"
)]
struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Liouvillian spectrum (single particle, or a particle-number sector with --N).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Dump |ρ| maps of this many leading right eigenmodes.
        #[arg(long)]
        modes: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Relaxation from one initial state: d(t), τ, plateau and classification.
    Relax {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dynamics: DynamicsArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Relaxation table over lists of L and gamma.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
    /// Steady state(s), site profile and localization length.
    Steady {
        #[command(flatten)]
        common: Common,
    },
    /// Perturbative spectrum in the monitoring rate.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        order: Option<u8>,
        /// Match against the exact spectrum and report the largest distance.
        #[arg(long)]
        compare: bool,
    },
    /// Quantum-jump trajectories in a particle-number sector.
    Traj {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ntraj: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        sample_dt: Option<f64>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        /// domainwall or sites:1,3,5
        #[arg(long)]
        init: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, value_enum)]
    bc: Option<BcKind>,
    /// Lattice size; scans accept lists and ranges such as 16:48:8.
    #[arg(long = "L")]
    l: Option<String>,
    /// Monitoring rate; scans accept lists and ranges.
    #[arg(long)]
    gamma: Option<String>,
    /// Hopping amplitude.
    #[arg(long)]
    t: Option<f64>,
    /// Particle number.
    #[arg(long = "N")]
    n: Option<usize>,
    /// double, or extended:DIGITS (up to 31).
    #[arg(long)]
    precision: Option<String>,
    /// Base seed of the trajectory random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, or a directory for the default file name.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct DynamicsArgs {
    /// lastsite, uniform, file:PATH, or domainwall with --N.
    #[arg(long)]
    init: Option<String>,
    /// Trace distance below which the state counts as relaxed.
    #[arg(long)]
    threshold: Option<f64>,
    /// Evolution horizon; defaults to max(50/gap, 10 L), or 8/gap + 4 L with --N.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of output times on the hybrid log/linear grid.
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Many-body eigensolver.
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    /// Eigenvalues requested from the Krylov solver.
    #[arg(long)]
    nev: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.model, self.model);
        set(&mut c.bc, self.bc);
        set(&mut c.l, self.l.map(NumList::Text));
        set(&mut c.gamma, self.gamma.map(NumList::Text));
        set(&mut c.t, self.t);
        if self.n.is_some() {
            c.n = self.n;
        }
        set(&mut c.precision, self.precision);
        set(&mut c.seed, self.seed);
        if self.output.is_some() {
            c.output = self.output;
        }
        if self.format.is_some() {
            c.format = self.format;
        }
    }
}

impl DynamicsArgs {
    fn apply(self, c: &mut RunConfig) {
        if self.init.is_some() {
            c.init = self.init;
        }
        set(&mut c.threshold, self.threshold);
        if self.t_max.is_some() {
            c.t_max = self.t_max;
        }
        set(&mut c.grid_points, self.grid_points);
    }
}

impl SolverArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.solver, self.solver);
        set(&mut c.nev, self.nev);
    }
}

/// Merges flags into the configuration and names the command.
fn resolve(command: Command, mut c: RunConfig) -> (&'static str, RunConfig) {
    let name = match command {
        Command::Spectrum {
            common,
            modes,
            solver,
        } => {
            common.apply(&mut c);
            solver.apply(&mut c);
            set(&mut c.modes, modes);
            "spectrum"
        }
        Command::Relax {
            common,
            dynamics,
            solver,
        } => {
            common.apply(&mut c);
            dynamics.apply(&mut c);
            solver.apply(&mut c);
            "relax"
        }
        Command::Scan { common, dynamics } => {
            common.apply(&mut c);
            dynamics.apply(&mut c);
            "scan"
        }
        Command::Steady { common } => {
            common.apply(&mut c);
            "steady"
        }
        Command::Perturb {
            common,
            order,
            compare,
        } => {
            common.apply(&mut c);
            set(&mut c.order, order);
            c.compare |= compare;
            "perturb"
        }
        Command::Traj {
            common,
            ntraj,
            dt,
            t_max,
            sample_dt,
            backend,
            init,
        } => {
            common.apply(&mut c);
            set(&mut c.ntraj, ntraj);
            set(&mut c.dt, dt);
            if t_max.is_some() {
                c.t_max = t_max;
            }
            set(&mut c.sample_dt, sample_dt);
            set(&mut c.backend, backend);
            if init.is_some() {
                c.init = init;
            }
            "traj"
        }
    };
    (name, c)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let (name, cfg) = resolve(cli.command, base);
    let start = Instant::now();
    let mut manifest = Manifest::new(
        name,
        serde_json::to_value(&cfg).map_err(skinlab::Error::from)?,
    );
    let files = match name {
        "spectrum" => commands::spectrum(&cfg)?,
        "relax" => commands::relax(&cfg)?,
        "scan" => commands::scan(&cfg)?,
        "steady" => commands::steady(&cfg)?,
        "perturb" => commands::perturb(&cfg)?,
        "traj" => commands::traj(&cfg)?,
        _ => unreachable!("every subcommand is named in resolve"),
    };
    manifest.outputs = files.iter().map(|p| p.display().to_string()).collect();
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    io::write_json(&Manifest::sidecar_path(&files[0]), &manifest)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn report(kind: &str, message: &str) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({ "error": { "kind": kind, "message": message } })
    );
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => return report("usage", e.render().to_string().trim()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}
