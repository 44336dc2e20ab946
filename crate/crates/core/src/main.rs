use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use giantnet::algorithms::{Algorithm, RunStatus};
use giantnet::harness::{
    compare, load_config, write_metrics_csv, write_summary_csv, Experiment, ExperimentConfig,
};
use giantnet::topology::{make_graph, metropolis_weights, validate_mixing};
use giantnet::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "giantnet", version, about = "Network-GIANT distributed Newton simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm and write the per-iteration metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` from the config; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the config and the mixing matrix it produces.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tune and run several algorithms on the same instance.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "giant,dgd,gt")]
        algos: Vec<Algorithm>,
        #[arg(long, default_value_t = 1e-6)]
        target: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the communication graph as an edge list.
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::InvalidSpec(_) | Error::InvalidParams(_) => {
            EXIT_VALIDATION
        }
        _ => EXIT_RUNTIME,
    }
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<u8, Error> {
    if cfg.algorithm.hessian_shift > 0.0 {
        eprintln!(
            "warning: hessian_shift = {} perturbs every local Hessian; results are not plain Network-GIANT",
            cfg.algorithm.hessian_shift
        );
    }
    let exp = Experiment::build(cfg)?;
    let result = exp.run(cfg.algorithm.name, &cfg.algorithm.to_config())?;
    let target = out.or_else(|| cfg.output.clone());
    write_metrics_csv(&result.log, sink(target.as_ref())?)?;
    if result.status == RunStatus::Diverged {
        eprintln!(
            "run diverged after {} iterations",
            result.log.last().map_or(0, |r| r.iteration)
        );
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn cmd_validate(cfg: &ExperimentConfig) -> Result<u8, Error> {
    let graph = make_graph(cfg.topology.kind, cfg.topology_n(), cfg.topology.p, cfg.topology.seed)?;
    let p = metropolis_weights(&graph);
    let report = validate_mixing(p.matrix(), &graph);
    println!("config ok: {} agents, d = {}", cfg.problem.n, cfg.problem.d);
    print!("{report}");
    Ok(if report.all_passed() { 0 } else { EXIT_VALIDATION })
}

fn cmd_compare(
    cfg: &ExperimentConfig,
    algos: &[Algorithm],
    target: f64,
    out: Option<PathBuf>,
) -> Result<u8, Error> {
    let summary = compare(cfg, algos, target)?;
    print!("{summary}");
    if let Some(path) = out {
        write_summary_csv(&summary, sink(Some(&path))?)?;
    }
    Ok(0)
}

fn cmd_graph(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<u8, Error> {
    let graph = make_graph(cfg.topology.kind, cfg.topology_n(), cfg.topology.p, cfg.topology.seed)?;
    let mut w = sink(out.as_ref())?;
    w.write_all(graph.to_edge_list().as_bytes())?;
    w.flush()?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_path = match &cli.command {
        Command::Run { config, .. }
        | Command::Validate { config }
        | Command::Compare { config, .. }
        | Command::Graph { config, .. } => config.clone(),
    };
    let cfg = match load_config(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let result = match cli.command {
        Command::Run { out, .. } => cmd_run(&cfg, out),
        Command::Validate { .. } => cmd_validate(&cfg),
        Command::Compare {
            algos, target, out, ..
        } => cmd_compare(&cfg, &algos, target, out),
        Command::Graph { out, .. } => cmd_graph(&cfg, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
