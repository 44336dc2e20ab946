//! Numerical checks of the structure behind Network-GIANT's convergence:
//! mean/disagreement split of the stacked iterates, the harmonic Hessian
//! mean, Lyapunov and descent inequalities around `x*`, tracking drift, and
//! linear-rate fits of the optimality gap.

use std::fmt;

use crate::algorithms::{stacked_gradients, NetworkState};
use crate::error::{Error, Result};
use crate::numerics::{spd_factorize, Matrix, Vector};
use crate::objectives::{LocalObjective, ProblemInstance};

/// Slack used by [`descent_check`] with declared bounds.
pub const DESCENT_TOL: f64 = 1e-10;
/// Slack used when the bounds are estimates.
pub const ESTIMATED_DESCENT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    /// `f(x̄) - f(x*)`; NaN when the instance has no reference solution.
    pub opt_gap: f64,
    /// Frobenius norm of the disagreement `x - x̄`.
    pub consensus_err: f64,
    /// `‖∇f(x̄)‖`.
    pub grad_norm: f64,
    /// Tracker drift; NaN for methods without a tracker.
    pub tracking_drift: f64,
    /// `V(x̄) = f(x̄) - f(x*)`.
    pub lyapunov: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    /// First iteration whose gap is at or below `target`.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.opt_gap <= target).map(|r| r.iteration)
    }

    /// Builds a log from a bare gap sequence (iteration = index).
    pub fn from_gaps(gaps: &[f64]) -> Self {
        MetricsLog {
            records: gaps
                .iter()
                .enumerate()
                .map(|(k, &g)| MetricsRecord {
                    iteration: k,
                    opt_gap: g,
                    consensus_err: 0.0,
                    grad_norm: f64::NAN,
                    tracking_drift: f64::NAN,
                    lyapunov: g,
                })
                .collect(),
        }
    }
}

/// `x̄ = (1/n) 11ᵀ x` and `x̃ = x - x̄`.
pub fn decompose(x: &Matrix) -> (Matrix, Matrix) {
    let mean = Matrix::repeat_row(&x.column_means(), x.rows());
    let disagreement = x - &mean;
    (mean, disagreement)
}

/// `M = (1/n) Σ ∇²f_i(x)⁻¹`, assembled column by column from Cholesky solves.
pub fn harmonic_hessian_mean(instance: &ProblemInstance, x: &Vector) -> Result<Matrix> {
    let d = instance.dim();
    let n = instance.agents() as f64;
    let mut acc = Matrix::zeros(d, d);
    for obj in instance.objectives() {
        let f = spd_factorize(&obj.hessian(x)?)?;
        for j in 0..d {
            let mut e = Vector::zeros(d);
            e[j] = 1.0;
            let col = f.solve(&e)?;
            for i in 0..d {
                acc[(i, j)] += col[i];
            }
        }
    }
    Ok(Matrix::from_fn(d, d, |i, j| 0.5 * (acc[(i, j)] + acc[(j, i)]) / n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    /// The side that must be at least `rhs - tol`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentReport {
    pub checks: Vec<InequalityCheck>,
    pub tolerance: f64,
    pub estimated_bounds: bool,
}

impl DescentReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

impl fmt::Display for DescentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<16} {:>24.16e} >= {:<24.16e} {}",
                c.name,
                c.lhs,
                c.rhs,
                if c.holds { "ok" } else { "VIOLATED" }
            )?;
        }
        if self.estimated_bounds {
            writeln!(f, "(bounds are estimates; tolerance {:e})", self.tolerance)?;
        }
        Ok(())
    }
}

/// Checks, in coordinates centered at `x*` and with the instance's declared
/// `mu` and `L`:
///
/// * `gᵀMg >= ‖g‖²/L`
/// * `gᵀMg >= (mu²/L)‖x - x*‖²`
/// * `(mu²/2)‖x - x*‖² <= V(x) <= (L²/2)‖x - x*‖²`
/// * `‖∇V(x)‖ <= L‖x - x*‖`
///
/// where `g = ∇f(x)`, `M` is the harmonic Hessian mean and
/// `V(x) = f(x) - f(x*)`.
pub fn descent_check(instance: &ProblemInstance, x: &Vector) -> Result<DescentReport> {
    descent_check_with_bounds(instance, x, instance.mu(), instance.lipschitz(), false)
}

/// [`descent_check`] against caller-supplied bounds. Estimated bounds use
/// the looser [`ESTIMATED_DESCENT_TOL`].
pub fn descent_check_with_bounds(
    instance: &ProblemInstance,
    x: &Vector,
    mu: f64,
    lipschitz: f64,
    estimated: bool,
) -> Result<DescentReport> {
    let x_star = instance.reference_solution().ok_or(Error::MissingReference)?;
    let tol = if estimated { ESTIMATED_DESCENT_TOL } else { DESCENT_TOL };

    let g = instance.gradient(x)?;
    let m = harmonic_hessian_mean(instance, x)?;
    let curvature = g.dot(&m.matvec(&g)?);
    let g_sq = g.dot(&g);
    let offset = x - x_star;
    let e_sq = offset.dot(&offset);
    let v = instance.value(x)? - instance.value(x_star)?;

    let check = |name, lhs: f64, rhs: f64| InequalityCheck {
        name,
        lhs,
        rhs,
        holds: lhs >= rhs - tol,
    };
    let checks = vec![
        check("harmonic_curv", curvature, g_sq / lipschitz),
        check("strong_descent", curvature, mu * mu / lipschitz * e_sq),
        check("lyapunov_lower", v, 0.5 * mu * mu * e_sq),
        check("lyapunov_upper", 0.5 * lipschitz * lipschitz * e_sq, v),
        check("gradient_bound", lipschitz * e_sq.sqrt(), g_sq.sqrt()),
    ];
    Ok(DescentReport {
        checks,
        tolerance: tol,
        estimated_bounds: estimated,
    })
}

/// `‖Σ_i w_i^k - Σ_i ∇f_i(x_i^{k-1})‖`, where `prev_x` is the iterate the
/// trackers were last fed from (`x⁰` right after initialization).
pub fn tracking_drift(state: &NetworkState, instance: &ProblemInstance, prev_x: &Matrix) -> Result<f64> {
    Ok(tracker_mismatch(&state.w, &stacked_gradients(instance, prev_x)?))
}

/// Norm of the difference between agent sums of a tracker and of gradients.
pub fn tracker_mismatch(tracker: &Matrix, grads: &Matrix) -> f64 {
    (&tracker.column_sums() - &grads.column_sums()).norm()
}

pub fn metrics_record(
    iteration: usize,
    instance: &ProblemInstance,
    x: &Matrix,
    tracking_drift: f64,
) -> Result<MetricsRecord> {
    let (_, disagreement) = decompose(x);
    let x_bar = x.column_means();
    let gap = match instance.reference_solution() {
        Some(_) => instance.optimality_gap(&x_bar)?,
        None => f64::NAN,
    };
    Ok(MetricsRecord {
        iteration,
        opt_gap: gap,
        consensus_err: disagreement.frobenius_norm(),
        grad_norm: instance.gradient(&x_bar)?.norm(),
        tracking_drift,
        lyapunov: gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    /// Fitted per-iteration contraction `10^slope`.
    pub rate: f64,
    /// Coefficient of determination of the fit; 0 when the gaps are constant.
    pub r_squared: f64,
    /// First and last iteration in the fitted window.
    pub window: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFitOptions {
    /// Leading share of records treated as transient.
    pub transient_fraction: f64,
    /// Gaps at or below this value are floating-point noise.
    pub gap_floor: f64,
}

impl Default for RateFitOptions {
    fn default() -> Self {
        RateFitOptions {
            transient_fraction: 0.1,
            gap_floor: 1e-14,
        }
    }
}

/// Minimum number of points in a rate fit.
pub const MIN_RATE_POINTS: usize = 10;

pub fn estimate_rate(log: &MetricsLog, tail_fraction: f64) -> Result<RateEstimate> {
    estimate_rate_with(log, tail_fraction, RateFitOptions::default())
}

/// Least-squares fit of `log10(opt_gap)` against `k` over the last
/// `tail_fraction` of the usable records (past the transient, above the
/// gap floor).
pub fn estimate_rate_with(log: &MetricsLog, tail_fraction: f64, opts: RateFitOptions) -> Result<RateEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InsufficientData(format!(
            "tail fraction must be in (0, 1], got {tail_fraction}"
        )));
    }
    let skip = (opts.transient_fraction * log.len() as f64).floor() as usize;
    let usable: Vec<&MetricsRecord> = log
        .records
        .iter()
        .skip(skip)
        .filter(|r| r.opt_gap.is_finite() && r.opt_gap > opts.gap_floor)
        .collect();
    let take = (tail_fraction * usable.len() as f64).ceil() as usize;
    let window = &usable[usable.len() - take..];
    if window.len() < MIN_RATE_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable records in the fit window, need {MIN_RATE_POINTS}",
            window.len()
        )));
    }

    let len = window.len() as f64;
    let ks: Vec<f64> = window.iter().map(|r| r.iteration as f64).collect();
    let ys: Vec<f64> = window.iter().map(|r| r.opt_gap.log10()).collect();
    let k_mean = ks.iter().sum::<f64>() / len;
    let y_mean = ys.iter().sum::<f64>() / len;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (k, y) in ks.iter().zip(&ys) {
        sxy += (k - k_mean) * (y - y_mean);
        sxx += (k - k_mean) * (k - k_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        let intercept = y_mean - slope * k_mean;
        let ss_res: f64 = ks
            .iter()
            .zip(&ys)
            .map(|(k, y)| (y - (intercept + slope * k)).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RateEstimate {
        rate: 10f64.powf(slope),
        r_squared,
        window: (window[0].iteration, window[window.len() - 1].iteration),
    })
}
