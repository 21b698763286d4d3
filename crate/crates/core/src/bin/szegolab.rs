use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use szegolab::functional_calculus::{ScalarFunction, Smoothness};
use szegolab::harness::{
    exit_code, identity_suite, run_experiment, with_workers, ExperimentConfig, ExperimentKind, IdentityInputs,
    Overrides, RunSummary, EXIT_IDENTITY, EXIT_OK,
};
use szegolab::lattice_models::EnsembleSpec;
use szegolab::{LabError, Result};

#[derive(Parser)]
#[command(name = "szegolab", version, about = "Szegő-type trace asymptotics for ergodic lattice operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Override the ensemble seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the sample budget.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Decay certification for the ensemble and `g` of a TOML file.
    Verify { config: PathBuf },
    /// Exact combinatorial and decomposition identities.
    Identities {
        /// Dimension; all of 1..=3 when omitted.
        #[arg(long)]
        d: Option<usize>,
        /// Side of the cube for the combinatorial checks.
        #[arg(long, default_value_t = 4)]
        side: i64,
    },
    /// Classical one-dimensional Szegő checks from a TOML file.
    Szego1d { config: PathBuf },
}

fn load(path: &std::path::Path, o: &Overrides, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path, o)?;
    if let Some(k) = kind {
        cfg.kind = k;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn identities(g: &Global, d: Option<usize>, side: i64) -> Result<RunSummary> {
    let dims: Vec<usize> = match d {
        Some(d) if (1..=3).contains(&d) => vec![d],
        Some(d) => return Err(LabError::Config(format!("d = {d} outside 1..=3"))),
        None => vec![1, 2, 3],
    };
    if !(2..=6).contains(&side) {
        return Err(LabError::Config(format!("side = {side} outside 2..=6")));
    }
    if g.samples == Some(0) || g.workers == Some(0) {
        return Err(LabError::Config("samples and workers must be at least 1".into()));
    }
    let seed = g.seed.unwrap_or(0);
    let inputs = IdentityInputs {
        spec: EnsembleSpec::anderson(4.0, seed),
        g: ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4))?,
        h: ScalarFunction::polynomial(vec![0.0, 0.0, 1.0]),
        seed,
        telescoping_trials: g.samples.unwrap_or(50) as u64,
    };
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let report = with_workers(g.workers, || identity_suite(&dims, side, &inputs))??;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(out.join("identities.json"), json)?;
    Ok(if report.passed {
        RunSummary {
            code: EXIT_OK,
            message: "all identities hold".into(),
        }
    } else {
        RunSummary {
            code: EXIT_IDENTITY,
            message: "identity residuals above tolerance".into(),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let o = Overrides {
        seed: g.seed,
        samples: g.samples,
        out: g.out.clone(),
        workers: g.workers,
    };
    let result = match &cli.cmd {
        Cmd::Run { config } => load(config, &o, None).and_then(|c| run_experiment(&c)),
        Cmd::Verify { config } => load(config, &o, Some(ExperimentKind::Verify)).and_then(|c| run_experiment(&c)),
        Cmd::Szego1d { config } => load(config, &o, Some(ExperimentKind::Szego1d)).and_then(|c| run_experiment(&c)),
        Cmd::Identities { d, side } => identities(g, *d, *side),
    };
    match result {
        Ok(s) => {
            println!("{}", s.message);
            ExitCode::from(s.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
