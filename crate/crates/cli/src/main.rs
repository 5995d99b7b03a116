//! `polyvem`: mesh generation, solvers and convergence harnesses.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Unknown flag or key, malformed value.
    Usage(String),
    /// Mesh file missing or malformed.
    Mesh(String),
    /// Unsupported (p, r) or k.
    Discretization(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Mesh(_) => 3,
            CliError::Discretization(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Mesh(m) | CliError::Discretization(m) | CliError::Other(m) => m,
        }
    }
}

impl From<polyvem::Error> for CliError {
    fn from(e: polyvem::Error) -> Self {
        match e {
            polyvem::Error::Unsupported(_) => CliError::Discretization(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "polyvem", version, about = "Virtual element solvers on polygonal meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug)]
struct Common {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (for mesh-gen: the mesh file).
    #[arg(long)]
    out: Option<String>,
}

/// Mesh source: a POLYMESH file or a generator.
#[derive(Args, Debug)]
struct MeshArgs {
    /// POLYMESH file; overrides the generator options.
    #[arg(long)]
    mesh: Option<String>,
    /// quads | quads-random | hexagons | octagons | voronoi
    #[arg(long)]
    family: Option<String>,
    /// Resolution (cells per side; seeds for voronoi).
    #[arg(long)]
    n: Option<usize>,
    /// Vertex jitter of quads-random, as a fraction of h.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lloyd iterations for voronoi.
    #[arg(long)]
    lloyd_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mesh and write it as a POLYMESH file.
    MeshGen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
    },
    /// Solve the manufactured polyharmonic problem on one mesh.
    SolvePoly {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
    },
    /// Polyharmonic convergence table over `levels` halvings of h.
    ConvergePoly {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Cahn-Hilliard manufactured convergence table.
    ConvergeCh {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Spinodal decomposition from a random state; writes frames and history.
    Spinodal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Seed of the initial state.
        #[arg(long)]
        state_seed: Option<u64>,
        #[arg(long)]
        frame_every: Option<usize>,
    },
    /// Elastodynamics benchmark convergence table.
    ConvergeElasto {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        elastic: ElasticArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Elastodynamics benchmark for k = 1..k_max on one mesh.
    PRefine {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        elastic: ElasticArgs,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Shape-regularity report of a mesh.
    CheckMesh {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
        /// Regularity threshold for both checks.
        #[arg(long)]
        gamma: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct ElasticArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// orthogonal | monomial
    #[arg(long)]
    basis: Option<String>,
    /// elastic | interpolant
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    dt_max: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
}

/// Flags given on the command line, keyed by their long names.
fn given_flags(m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for id in m.ids() {
        let id = id.as_str();
        if id == "config" || m.value_source(id) != Some(clap::parser::ValueSource::CommandLine) {
            continue;
        }
        if let Ok(Some(mut raw)) = m.try_get_raw(id) {
            if let Some(v) = raw.next() {
                out.insert(id.replace('_', "-"), v.to_string_lossy().into_owned());
            }
        }
    }
    out
}

fn run() -> Result<(), CliError> {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return Err(match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => return Ok(()),
                _ => CliError::Usage(String::new()),
            });
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let allowed: Vec<String> = Cli::command()
        .find_subcommand(name)
        .expect("known subcommand")
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .filter(|l| l != "config")
        .collect();
    let config_path = match &cli.command {
        Command::MeshGen { common, .. }
        | Command::SolvePoly { common, .. }
        | Command::ConvergePoly { common, .. }
        | Command::ConvergeCh { common, .. }
        | Command::Spinodal { common, .. }
        | Command::ConvergeElasto { common, .. }
        | Command::PRefine { common, .. }
        | Command::CheckMesh { common, .. } => common.config.clone(),
    };
    let cfg = RunConfig::new(name, config_path.as_deref(), given_flags(sub), &allowed)?;
    configure_threads()?;
    commands::dispatch(name, &cfg)
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("POLYVEM_THREADS") {
        let n: usize =
            v.parse().map_err(|_| CliError::Usage(format!("POLYVEM_THREADS must be a positive integer, got '{v}'")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Other(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message().is_empty() {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.code())
        }
    }
}
