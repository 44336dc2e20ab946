//! Network-GIANT and the first-order baselines, written as pure
//! state-transition functions over stacked `n x d` iterates (row `i` belongs
//! to agent `i`).
//!
//! One Network-GIANT iteration, with mixing matrix `P` applied `K` times:
//!
//! ```text
//! grads   = [∇f_i(x_i)]
//! w'      = P^K (w + grads - g)
//! g'      = grads
//! d_i     = ∇²f_i(x_i)⁻¹ w'_i
//! x'      = P^K (x - ε d)
//! ```
//!
//! Because `1ᵀP = 1ᵀ`, the agent sum of `w` always equals the agent sum of
//! the most recent local gradients, so every agent applies its own inverse
//! Hessian to a running estimate of the global gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, MetricsLog};
use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{spd_factorize, Matrix, Vector};
use crate::objectives::{LocalObjective, ProblemInstance};
use crate::topology::MixingMatrix;

/// Newton steps allowed in [`centralized_newton`].
pub const MAX_NEWTON_ITERS: usize = 200;

/// Any state entry above this magnitude (or non-finite) aborts a run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Giant,
    Dgd,
    Gt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Giant, Algorithm::Dgd, Algorithm::Gt];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Giant => "giant",
            Algorithm::Dgd => "dgd",
            Algorithm::Gt => "gt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "giant" => Ok(Algorithm::Giant),
            "dgd" => Ok(Algorithm::Dgd),
            "gt" => Ok(Algorithm::Gt),
            other => Err(Error::Validation(format!(
                "unknown algorithm '{other}' (expected giant, dgd or gt)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmConfig {
    pub epsilon: f64,
    /// Consensus rounds `K` per iteration.
    pub consensus_rounds: usize,
    pub max_iters: usize,
    /// Stop once `‖∇f(x̄)‖` drops to this value.
    pub grad_tol: f64,
    /// Levenberg shift `δ` added to every local Hessian. Zero by default;
    /// any positive value changes the method.
    pub hessian_shift: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            epsilon: 1.0,
            consensus_rounds: 1,
            max_iters: 5000,
            grad_tol: 1e-10,
            hessian_shift: 0.0,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation(format!(
                "algorithm.epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.consensus_rounds < 1 {
            return Err(Error::Validation("algorithm.K must be >= 1".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Validation(format!(
                "algorithm.grad_tol must be >= 0, got {}",
                self.grad_tol
            )));
        }
        if !(self.hessian_shift >= 0.0 && self.hessian_shift.is_finite()) {
            return Err(Error::Validation(format!(
                "algorithm.hessian_shift must be >= 0, got {}",
                self.hessian_shift
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub x: Matrix,
    /// Local gradients from the previous iteration.
    pub g: Matrix,
    /// Gradient trackers.
    pub w: Matrix,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtState {
    pub x: Matrix,
    pub y: Matrix,
    pub prev_grad: Matrix,
}

fn check_stack(instance: &ProblemInstance, x: &Matrix) -> Result<()> {
    let want = (instance.agents(), instance.dim());
    if x.shape() != want {
        return Err(dim_mismatch(
            format!("{}x{}", want.0, want.1),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    Ok(())
}

fn check_mixing(instance: &ProblemInstance, p: &Matrix) -> Result<()> {
    if p.shape() != (instance.agents(), instance.agents()) {
        return Err(dim_mismatch(
            format!("{0}x{0} mixing matrix", instance.agents()),
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    Ok(())
}

/// Row `i` holds `∇f_i(x_i)`.
pub fn stacked_gradients(instance: &ProblemInstance, x: &Matrix) -> Result<Matrix> {
    check_stack(instance, x)?;
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (i, obj) in instance.objectives().iter().enumerate() {
        let g = obj.gradient(&x.row_vector(i))?;
        out.set_row(i, g.as_slice());
    }
    Ok(out)
}

/// `g = w = ∇f_i(x_i⁰)`, so the tracking identity holds from the start.
pub fn giant_init(instance: &ProblemInstance, x0: &Matrix) -> Result<NetworkState> {
    let grads = stacked_gradients(instance, x0)?;
    Ok(NetworkState {
        x: x0.clone(),
        g: grads.clone(),
        w: grads,
        iteration: 0,
    })
}

/// One Network-GIANT iteration with `P^K` formed from `cfg.consensus_rounds`.
pub fn giant_step(
    state: &NetworkState,
    instance: &ProblemInstance,
    p: &MixingMatrix,
    cfg: &AlgorithmConfig,
) -> Result<NetworkState> {
    if cfg.consensus_rounds < 1 {
        return Err(Error::Validation("K must be >= 1".into()));
    }
    let mix = p.matrix().power(cfg.consensus_rounds)?;
    giant_step_mixed(state, instance, &mix, cfg.epsilon, cfg.hessian_shift)
}

/// [`giant_step`] with the consensus operator `P^K` already formed.
pub fn giant_step_mixed(
    state: &NetworkState,
    instance: &ProblemInstance,
    mix: &Matrix,
    epsilon: f64,
    hessian_shift: f64,
) -> Result<NetworkState> {
    check_stack(instance, &state.x)?;
    check_stack(instance, &state.g)?;
    check_stack(instance, &state.w)?;
    check_mixing(instance, mix)?;

    let grads = stacked_gradients(instance, &state.x)?;
    let innovation = &(&state.w + &grads) - &state.g;
    let w_next = mix.matmul(&innovation)?;

    let mut local = state.x.clone();
    for (i, obj) in instance.objectives().iter().enumerate() {
        let xi = state.x.row_vector(i);
        let mut h = obj.hessian(&xi)?;
        if hessian_shift > 0.0 {
            for k in 0..h.rows() {
                h[(k, k)] += hessian_shift;
            }
        }
        let dir = spd_factorize(&h)?.solve(&w_next.row_vector(i))?;
        for (xk, dk) in local.row_mut(i).iter_mut().zip(dir.iter()) {
            *xk -= epsilon * dk;
        }
    }
    let x_next = mix.matmul(&local)?;

    Ok(NetworkState {
        x: x_next,
        g: grads,
        w: w_next,
        iteration: state.iteration + 1,
    })
}

/// Decentralized gradient descent: `x' = P x - ε ∇f(x)`.
pub fn dgd_step(x: &Matrix, instance: &ProblemInstance, p: &MixingMatrix, epsilon: f64) -> Result<Matrix> {
    check_stack(instance, x)?;
    check_mixing(instance, p.matrix())?;
    let grads = stacked_gradients(instance, x)?;
    Ok(&p.matrix().matmul(x)? - &grads.scale(epsilon))
}

pub fn gt_init(instance: &ProblemInstance, x0: &Matrix) -> Result<GtState> {
    let grads = stacked_gradients(instance, x0)?;
    Ok(GtState {
        x: x0.clone(),
        y: grads.clone(),
        prev_grad: grads,
    })
}

/// Gradient tracking: `x' = P x - ε y`, `y' = P y + ∇f(x') - ∇f(x)`.
pub fn gt_step(state: &GtState, instance: &ProblemInstance, p: &MixingMatrix, epsilon: f64) -> Result<GtState> {
    check_stack(instance, &state.x)?;
    check_stack(instance, &state.y)?;
    check_stack(instance, &state.prev_grad)?;
    check_mixing(instance, p.matrix())?;
    let x_next = &p.matrix().matmul(&state.x)? - &state.y.scale(epsilon);
    let grads = stacked_gradients(instance, &x_next)?;
    let y_next = &(&p.matrix().matmul(&state.y)? + &grads) - &state.prev_grad;
    Ok(GtState {
        x: x_next,
        y: y_next,
        prev_grad: grads,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSolution {
    pub x: Vector,
    pub iterations: usize,
}

/// Newton's method on the global cost with Armijo backtracking. Full steps
/// are taken once the Newton decrement is at round-off level, or whenever
/// backtracking cannot certify decrease.
pub fn centralized_newton(instance: &ProblemInstance, x0: &Vector, tol: f64) -> Result<NewtonSolution> {
    if x0.len() != instance.dim() {
        return Err(dim_mismatch(instance.dim(), x0.len()));
    }
    let mut x = x0.clone();
    for it in 0..=MAX_NEWTON_ITERS {
        let g = instance.gradient(&x)?;
        if g.norm() <= tol {
            return Ok(NewtonSolution { x, iterations: it });
        }
        if it == MAX_NEWTON_ITERS {
            break;
        }
        let dir = spd_factorize(&instance.hessian(&x)?)?.solve(&g)?;
        let f0 = instance.value(&x)?;
        let slope = g.dot(&dir);
        // decrease below the round-off in f: Armijo can no longer tell steps apart
        if slope <= f64::EPSILON.sqrt() * (1.0 + f0.abs()) {
            x.axpy(-1.0, &dir);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            trial.axpy(-t, &dir);
            if instance.value(&trial)? <= f0 - 1e-4 * t * slope {
                x = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            x.axpy(-1.0, &dir);
        }
    }
    Err(Error::MaxItersExceeded(MAX_NEWTON_ITERS))
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmState {
    Giant(NetworkState),
    Dgd(Matrix),
    Gt(GtState),
}

impl AlgorithmState {
    pub fn x(&self) -> &Matrix {
        match self {
            AlgorithmState::Giant(s) => &s.x,
            AlgorithmState::Dgd(x) => x,
            AlgorithmState::Gt(s) => &s.x,
        }
    }

    fn within_bounds(&self) -> bool {
        let ok = |m: &Matrix| m.as_slice().iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND);
        match self {
            AlgorithmState::Giant(s) => ok(&s.x) && ok(&s.w) && ok(&s.g),
            AlgorithmState::Dgd(x) => ok(x),
            AlgorithmState::Gt(s) => ok(&s.x) && ok(&s.y) && ok(&s.prev_grad),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    /// `‖∇f(x̄)‖ <= grad_tol`.
    Converged,
    MaxIters,
    /// The divergence guard fired; the log ends at the last finite iterate.
    Diverged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub final_state: AlgorithmState,
    pub log: MetricsLog,
    pub status: RunStatus,
}

fn record_for(
    state: &AlgorithmState,
    prev_x: &Matrix,
    iteration: usize,
    instance: &ProblemInstance,
) -> Result<diagnostics::MetricsRecord> {
    let drift = match state {
        AlgorithmState::Giant(s) => diagnostics::tracking_drift(s, instance, prev_x)?,
        AlgorithmState::Gt(s) => diagnostics::tracker_mismatch(&s.y, &stacked_gradients(instance, &s.x)?),
        AlgorithmState::Dgd(_) => f64::NAN,
    };
    diagnostics::metrics_record(iteration, instance, state.x(), drift)
}

/// Runs `algorithm` from `x0` until the averaged iterate's gradient norm
/// drops to `cfg.grad_tol`, `cfg.max_iters` steps have been taken, or the
/// divergence guard fires. One record is logged per iterate, starting at
/// `k = 0`.
pub fn run(
    algorithm: Algorithm,
    instance: &ProblemInstance,
    p: &MixingMatrix,
    cfg: &AlgorithmConfig,
    x0: &Matrix,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_stack(instance, x0)?;
    check_mixing(instance, p.matrix())?;

    let mix = p.matrix().power(cfg.consensus_rounds)?;
    let mix_p = MixingMatrix::new(mix.clone())?;
    let mut state = match algorithm {
        Algorithm::Giant => AlgorithmState::Giant(giant_init(instance, x0)?),
        Algorithm::Dgd => AlgorithmState::Dgd(x0.clone()),
        Algorithm::Gt => AlgorithmState::Gt(gt_init(instance, x0)?),
    };
    let mut prev_x = x0.clone();
    let mut log = MetricsLog::default();
    let first = record_for(&state, &prev_x, 0, instance)?;
    let mut converged = first.grad_norm <= cfg.grad_tol;
    log.records.push(first);

    let mut status = RunStatus::MaxIters;
    for k in 1..=cfg.max_iters {
        if converged {
            break;
        }
        let next = match &state {
            AlgorithmState::Giant(s) => {
                AlgorithmState::Giant(giant_step_mixed(s, instance, &mix, cfg.epsilon, cfg.hessian_shift)?)
            }
            AlgorithmState::Dgd(x) => AlgorithmState::Dgd(dgd_step(x, instance, &mix_p, cfg.epsilon)?),
            AlgorithmState::Gt(s) => AlgorithmState::Gt(gt_step(s, instance, &mix_p, cfg.epsilon)?),
        };
        if !next.within_bounds() {
            status = RunStatus::Diverged;
            break;
        }
        prev_x = std::mem::replace(&mut state, next).x().clone();
        let rec = record_for(&state, &prev_x, k, instance)?;
        converged = rec.grad_norm <= cfg.grad_tol;
        log.records.push(rec);
    }
    if converged {
        status = RunStatus::Converged;
    }
    Ok(RunOutcome {
        final_state: state,
        log,
        status,
    })
}
