use std::fmt;
use std::fs::File;
use std::io::BufWriter;

use crate::algorithms::{centralized_newton, run, Algorithm, AlgorithmConfig, RunStatus};
use crate::diagnostics::{estimate_rate, MetricsLog, RateEstimate};
use crate::error::Result;
use crate::numerics::{Matrix, Vector};
use crate::objectives::{generate_problem, ProblemInstance, REFERENCE_TOL};
use crate::rng;
use crate::topology::{make_graph, metropolis_weights, Graph, MixingMatrix};

use super::config::ExperimentConfig;
use super::csv::write_metrics_csv;

/// Runs whose final gap exceeds this are counted as diverged by the tuner.
pub const TUNER_DIVERGENCE_GAP: f64 = 1e12;

/// Tail share of usable records used for the rate column of comparisons.
pub const SUMMARY_RATE_TAIL: f64 = 0.5;

/// Step-size grid used when the config does not supply one.
pub fn default_grid(algorithm: Algorithm) -> Vec<f64> {
    match algorithm {
        Algorithm::Giant => vec![0.25, 0.5, 1.0],
        Algorithm::Dgd | Algorithm::Gt => vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
    }
}

/// Everything a run needs, built once from the seeds in a config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub instance: ProblemInstance,
    pub graph: Graph,
    pub mixing: MixingMatrix,
    pub x0: Matrix,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut instance = generate_problem(cfg.problem.seed, &cfg.problem)?;
        if instance.reference_solution().is_none() {
            let x_star = centralized_newton(&instance, &Vector::zeros(instance.dim()), REFERENCE_TOL)?;
            instance = instance.with_reference(x_star.x)?;
        }
        let graph = make_graph(cfg.topology.kind, cfg.topology_n(), cfg.topology.p, cfg.topology.seed)?;
        let mixing = metropolis_weights(&graph);
        let x0 = rng::normal_matrix(&mut rng::seeded(cfg.run_seed), cfg.problem.n, cfg.problem.d);
        Ok(Experiment {
            instance,
            graph,
            mixing,
            x0,
        })
    }

    pub fn run(&self, algorithm: Algorithm, cfg: &AlgorithmConfig) -> Result<ExperimentRun> {
        let outcome = run(algorithm, &self.instance, &self.mixing, cfg, &self.x0)?;
        Ok(ExperimentRun {
            algorithm,
            log: outcome.log,
            status: outcome.status,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRun {
    pub algorithm: Algorithm,
    pub log: MetricsLog,
    pub status: RunStatus,
}

/// Runs the configured algorithm and, when `cfg.output` is set, writes the
/// metrics CSV there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let exp = Experiment::build(cfg)?;
    let result = exp.run(cfg.algorithm.name, &cfg.algorithm.to_config())?;
    if let Some(path) = &cfg.output {
        write_metrics_csv(&result.log, BufWriter::new(File::create(path)?))?;
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    pub epsilon: f64,
    /// First iteration with gap at or below the target.
    pub iterations: Option<usize>,
    pub final_gap: f64,
    pub diverged: bool,
    pub log: MetricsLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub best_epsilon: f64,
    /// One entry per grid value, in grid order.
    pub outcomes: Vec<TuneOutcome>,
}

impl TuneResult {
    pub fn best(&self) -> &TuneOutcome {
        self.outcomes
            .iter()
            .find(|o| o.epsilon == self.best_epsilon)
            .expect("best epsilon comes from the grid")
    }
}

/// Tunes the configured algorithm's step size with gap target
/// `algorithm.grad_tol`.
pub fn tune_epsilon(cfg: &ExperimentConfig, grid: &[f64]) -> Result<TuneResult> {
    let exp = Experiment::build(cfg)?;
    tune_epsilon_for(&exp, cfg.algorithm.name, &cfg.algorithm.to_config(), grid, cfg.algorithm.grad_tol)
}

/// Runs every `ε` in `grid` and keeps the one that reaches `target` in the
/// fewest iterations (earliest in the grid on ties). If none reaches it, the
/// smallest final gap among non-diverged runs wins; if all diverge, the
/// first grid entry is reported.
pub fn tune_epsilon_for(
    exp: &Experiment,
    algorithm: Algorithm,
    base: &AlgorithmConfig,
    grid: &[f64],
    target: f64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(crate::Error::Validation("epsilon grid must not be empty".into()));
    }
    let mut outcomes = Vec::with_capacity(grid.len());
    for &epsilon in grid {
        let cfg = AlgorithmConfig {
            epsilon,
            ..base.clone()
        };
        cfg.validate()?;
        let outcome = match exp.run(algorithm, &cfg) {
            Ok(run) => {
                let final_gap = run.log.last().map_or(f64::NAN, |r| r.opt_gap);
                let diverged = run.status == RunStatus::Diverged
                    || !final_gap.is_finite()
                    || final_gap > TUNER_DIVERGENCE_GAP;
                TuneOutcome {
                    epsilon,
                    iterations: if diverged { None } else { run.log.iterations_to(target) },
                    final_gap,
                    diverged,
                    log: run.log,
                }
            }
            // a Hessian that stops being SPD along the way is a failed step size
            Err(_) => TuneOutcome {
                epsilon,
                iterations: None,
                final_gap: f64::NAN,
                diverged: true,
                log: MetricsLog::default(),
            },
        };
        outcomes.push(outcome);
    }

    let reached = outcomes
        .iter()
        .filter_map(|o| o.iterations.map(|k| (k, o.epsilon)))
        .min_by_key(|(k, _)| *k);
    let best_epsilon = match reached {
        Some((_, eps)) => eps,
        None => outcomes
            .iter()
            .filter(|o| !o.diverged)
            .min_by(|a, b| a.final_gap.total_cmp(&b.final_gap))
            .map_or(grid[0], |o| o.epsilon),
    };
    Ok(TuneResult {
        best_epsilon,
        outcomes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub iterations_to_target: Option<usize>,
    pub final_gap: f64,
    pub rate: Option<RateEstimate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSummary {
    pub target: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonSummary {
    pub fn row(&self, algorithm: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

impl fmt::Display for ComparisonSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target gap {:e}", self.target)?;
        writeln!(
            f,
            "{:<8} {:>10} {:>14} {:>14} {:>12} {:>8}",
            "algo", "epsilon", "iters", "final_gap", "rate", "r2"
        )?;
        for r in &self.rows {
            let iters = r
                .iterations_to_target
                .map_or_else(|| "not-reached".to_string(), |k| k.to_string());
            let (rate, r2) = r
                .rate
                .map_or(("-".to_string(), "-".to_string()), |e| {
                    (format!("{:.6}", e.rate), format!("{:.4}", e.r_squared))
                });
            writeln!(
                f,
                "{:<8} {:>10} {:>14} {:>14.3e} {:>12} {:>8}",
                r.algorithm.name(),
                r.epsilon,
                iters,
                r.final_gap,
                rate,
                r2
            )?;
        }
        Ok(())
    }
}

/// Tunes and runs each algorithm on the same instance, graph and starting
/// point. The configured algorithm uses `tuner.epsilon_grid` when present;
/// every other algorithm uses [`default_grid`].
pub fn compare(cfg: &ExperimentConfig, algorithms: &[Algorithm], target: f64) -> Result<ComparisonSummary> {
    let exp = Experiment::build(cfg)?;
    let base = cfg.algorithm.to_config();
    let mut rows = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let grid = match &cfg.tuner {
            Some(t) if algorithm == cfg.algorithm.name => t.epsilon_grid.clone(),
            _ => default_grid(algorithm),
        };
        let tuned = tune_epsilon_for(&exp, algorithm, &base, &grid, target)?;
        let best = tuned.best();
        rows.push(ComparisonRow {
            algorithm,
            epsilon: tuned.best_epsilon,
            iterations_to_target: best.iterations,
            final_gap: best.final_gap,
            rate: estimate_rate(&best.log, SUMMARY_RATE_TAIL).ok(),
        });
    }
    Ok(ComparisonSummary { target, rows })
}
