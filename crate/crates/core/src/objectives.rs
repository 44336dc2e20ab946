//! Local cost functions `f_i` and the problem instances built from them.
//!
//! Every objective is twice differentiable and strongly convex, with
//! `mu I <= hessian(x) <= L I` for the bounds carried by its
//! [`ProblemInstance`].

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{spd_factorize, symmetric_eigenvalues, Matrix, Vector};
use crate::rng;

/// Scale of the eigenvalue range used by generated quadratic instances:
/// eigenvalues are drawn from `[1, 1 + heterogeneity * CONDITION_SCALE]`.
pub const CONDITION_SCALE: f64 = 10.0;

/// Gradient-norm tolerance used when computing reference solutions by Newton.
pub const REFERENCE_TOL: f64 = 1e-12;

pub trait LocalObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
    fn hessian(&self, x: &Vector) -> Result<Matrix>;
}

fn check_dim(expected: usize, x: &Vector) -> Result<()> {
    if x.len() != expected {
        return Err(dim_mismatch(expected, x.len()));
    }
    Ok(())
}

/// `f(x) = ½ xᵀAx + bᵀx + c`
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    a: Matrix,
    b: Vector,
    c: f64,
}

impl QuadraticObjective {
    pub fn new(a: Matrix, b: Vector, c: f64) -> Result<Self> {
        if !a.is_square() || a.rows() != b.len() || b.is_empty() {
            return Err(dim_mismatch(
                format!("{0}x{0} matrix with length-{0} vector", b.len()),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        let asym = a.asymmetry().unwrap_or(0.0);
        if asym > crate::numerics::SYMMETRY_TOL * a.max_abs() {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(QuadraticObjective { a, b, c })
    }

    /// `½‖x - center‖²`
    pub fn centered(center: &Vector) -> Self {
        let d = center.len();
        let c = 0.5 * center.dot(center);
        QuadraticObjective {
            a: Matrix::identity(d),
            b: -center,
            c,
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl LocalObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let ax = self.a.matvec(x)?;
        Ok(0.5 * x.dot(&ax) + self.b.dot(x) + self.c)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        Ok(&self.a.matvec(x)? + &self.b)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim(), x)?;
        Ok(self.a.clone())
    }
}

/// Ridge-regularized logistic loss,
/// `f(x) = (1/m) Σ log(1 + exp(-y_j a_jᵀx)) + (λ/2)‖x‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticObjective {
    features: Matrix,
    labels: Vec<f64>,
    lambda: f64,
}

impl LogisticObjective {
    pub fn new(features: Matrix, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if features.rows() != labels.len() || features.rows() == 0 || features.cols() == 0 {
            return Err(dim_mismatch(
                format!("{} labels", features.rows()),
                labels.len(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidSpec(format!("ridge weight must be > 0, got {lambda}")));
        }
        if let Some(bad) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
            return Err(Error::InvalidSpec(format!("labels must be ±1, got {bad}")));
        }
        Ok(LogisticObjective {
            features,
            labels,
            lambda,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `λ + max_j ‖a_j‖² / 4`, an upper bound on the Hessian spectrum.
    pub fn smoothness_bound(&self) -> f64 {
        let max_sq = (0..self.features.rows())
            .map(|j| self.features.row(j).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        self.lambda + 0.25 * max_sq
    }

    fn margins(&self, x: &Vector) -> Result<Vec<f64>> {
        Ok(self.features.matvec(x)?.into_vec())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LocalObjective for LogisticObjective {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let m = self.labels.len() as f64;
        let loss: f64 = self
            .margins(x)?
            .iter()
            .zip(&self.labels)
            .map(|(z, y)| softplus(-y * z))
            .sum();
        Ok(loss / m + 0.5 * self.lambda * x.dot(x))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        let m = self.labels.len() as f64;
        let mut g = x.scale(self.lambda);
        for (j, (z, y)) in self.margins(x)?.iter().zip(&self.labels).enumerate() {
            let coef = -y * sigmoid(-y * z) / m;
            for (gk, ak) in g.as_mut_slice().iter_mut().zip(self.features.row(j)) {
                *gk += coef * ak;
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim(), x)?;
        let d = self.dim();
        let m = self.labels.len() as f64;
        let mut h = Matrix::identity(d).scale(self.lambda);
        for (j, z) in self.margins(x)?.iter().enumerate() {
            let s = sigmoid(*z);
            let w = s * (1.0 - s) / m;
            let a = self.features.row(j);
            for r in 0..d {
                for c in r..d {
                    h[(r, c)] += w * a[r] * a[c];
                }
            }
        }
        for r in 0..d {
            for c in 0..r {
                h[(r, c)] = h[(c, r)];
            }
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Quadratic(QuadraticObjective),
    Logistic(LogisticObjective),
}

impl LocalObjective for Objective {
    fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.dim(),
            Objective::Logistic(l) => l.dim(),
        }
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        match self {
            Objective::Quadratic(q) => q.value(x),
            Objective::Logistic(l) => l.value(x),
        }
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        match self {
            Objective::Quadratic(q) => q.gradient(x),
            Objective::Logistic(l) => l.gradient(x),
        }
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        match self {
            Objective::Quadratic(q) => q.hessian(x),
            Objective::Logistic(l) => l.hessian(x),
        }
    }
}

impl From<QuadraticObjective> for Objective {
    fn from(q: QuadraticObjective) -> Self {
        Objective::Quadratic(q)
    }
}

impl From<LogisticObjective> for Objective {
    fn from(l: LogisticObjective) -> Self {
        Objective::Logistic(l)
    }
}

/// `n` local objectives over a shared decision variable. The global cost is
/// the average `f(x) = (1/n) Σ f_i(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    objectives: Vec<Objective>,
    mu: f64,
    lipschitz: f64,
    reference_solution: Option<Vector>,
}

impl ProblemInstance {
    pub fn new(objectives: Vec<Objective>, mu: f64, lipschitz: f64) -> Result<Self> {
        let d = match objectives.first() {
            Some(o) => o.dim(),
            None => return Err(Error::InvalidSpec("instance needs at least one objective".into())),
        };
        if let Some(bad) = objectives.iter().find(|o| o.dim() != d) {
            return Err(dim_mismatch(d, bad.dim()));
        }
        if !(mu > 0.0 && mu <= lipschitz && lipschitz.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bounds must satisfy 0 < mu <= L, got mu={mu}, L={lipschitz}"
            )));
        }
        Ok(ProblemInstance {
            objectives,
            mu,
            lipschitz,
            reference_solution: None,
        })
    }

    pub fn with_reference(mut self, x_star: Vector) -> Result<Self> {
        check_dim(self.dim(), &x_star)?;
        self.reference_solution = Some(x_star);
        Ok(self)
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn agents(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn reference_solution(&self) -> Option<&Vector> {
        self.reference_solution.as_ref()
    }

    /// Global cost `(1/n) Σ f_i(x)`.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        let mut total = 0.0;
        for o in &self.objectives {
            total += o.value(x)?;
        }
        Ok(total / self.agents() as f64)
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        let mut total = Vector::zeros(self.dim());
        for o in &self.objectives {
            total.axpy(1.0, &o.gradient(x)?);
        }
        Ok(total.scale(1.0 / self.agents() as f64))
    }

    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let d = self.dim();
        let mut total = Matrix::zeros(d, d);
        for o in &self.objectives {
            total = &total + &o.hessian(x)?;
        }
        Ok(total.scale(1.0 / self.agents() as f64))
    }

    /// `f(x) - f(x*)`; requires a reference solution.
    pub fn optimality_gap(&self, x: &Vector) -> Result<f64> {
        let x_star = self.reference_solution.as_ref().ok_or(Error::MissingReference)?;
        Ok(self.value(x)? - self.value(x_star)?)
    }
}

/// Smallest and largest Hessian eigenvalue over all objectives and sample
/// points.
pub fn estimate_bounds(instance: &ProblemInstance, sample_points: &[Vector]) -> Result<(f64, f64)> {
    let mut mu_hat = f64::INFINITY;
    let mut l_hat = f64::NEG_INFINITY;
    for x in sample_points {
        for o in instance.objectives() {
            let ev = symmetric_eigenvalues(&o.hessian(x)?)?;
            mu_hat = mu_hat.min(ev[0]);
            l_hat = l_hat.max(ev[ev.len() - 1]);
        }
    }
    if sample_points.is_empty() {
        return Err(Error::InvalidSpec("estimate_bounds needs at least one sample point".into()));
    }
    Ok((mu_hat, l_hat))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

fn default_samples() -> usize {
    20
}

fn default_lambda() -> f64 {
    0.1
}

/// Recipe for a synthetic instance. Also the `problem` section of the
/// experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_samples")]
    pub samples_per_agent: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn quadratic(n: usize, d: usize, heterogeneity: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Quadratic,
            n,
            d,
            samples_per_agent: default_samples(),
            lambda: default_lambda(),
            heterogeneity,
            seed: 0,
        }
    }

    pub fn logistic(n: usize, d: usize, samples_per_agent: usize, lambda: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Logistic,
            n,
            d,
            samples_per_agent,
            lambda,
            heterogeneity: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidSpec("n must be >= 1".into()));
        }
        if self.d < 1 {
            return Err(Error::InvalidSpec("d must be >= 1".into()));
        }
        if !(self.heterogeneity >= 0.0 && self.heterogeneity.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "heterogeneity must be a finite value >= 0, got {}",
                self.heterogeneity
            )));
        }
        if self.kind == ProblemKind::Logistic {
            if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "logistic lambda must be > 0, got {}",
                    self.lambda
                )));
            }
            if self.samples_per_agent < 1 {
                return Err(Error::InvalidSpec("samples_per_agent must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Deterministic synthetic instance. The seed given here overrides
/// `spec.seed`.
pub fn generate_problem(seed: u64, spec: &ProblemSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng = rng::seeded(seed);
    match spec.kind {
        ProblemKind::Quadratic => generate_quadratic(&mut rng, spec),
        ProblemKind::Logistic => generate_logistic(&mut rng, spec),
    }
}

/// Orthonormal columns from Gram-Schmidt on a Gaussian matrix.
fn random_orthogonal(rng: &mut rng::SimRng, d: usize) -> Matrix {
    let g = rng::normal_matrix(rng, d, d);
    let mut cols: Vec<Vector> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = Vector::from_vec((0..d).map(|i| g[(i, j)]).collect());
        for q in &cols {
            let proj = q.dot(&v);
            v.axpy(-proj, q);
        }
        let norm = v.norm();
        cols.push(v.scale(1.0 / norm));
    }
    Matrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Agents share one random eigenbasis `Q`; agent `i` gets `A_i = Q D_i Qᵀ`
/// where eigenvalue `k` of `D_i` is log-uniform on the `k`-th of `d` equal
/// log-strata of `[1, 1 + h·CONDITION_SCALE]`. The global Hessian therefore
/// keeps the full condition spread, and agents disagree within each stratum.
/// Linear terms are `b_i = b_0 + h·δ_i`.
fn generate_quadratic(rng: &mut rng::SimRng, spec: &ProblemSpec) -> Result<ProblemInstance> {
    use rand::Rng;

    let d = spec.d;
    let h = spec.heterogeneity;
    let top = 1.0 + h * CONDITION_SCALE;
    let q = random_orthogonal(rng, d);
    let b0 = rng::normal_vector(rng, d);

    let mut objectives = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let eig: Vec<f64> = (0..d)
            .map(|k| (((k as f64 + rng.gen::<f64>()) / d as f64) * top.ln()).exp())
            .collect();
        let qd = Matrix::from_fn(d, d, |i, j| q[(i, j)] * eig[j]);
        let a = qd.matmul(&q.transpose())?;
        let a = Matrix::from_fn(d, d, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let mut b = b0.clone();
        b.axpy(h, &rng::normal_vector(rng, d));
        objectives.push(QuadraticObjective::new(a, b, 0.0)?.into());
    }

    let x_star = quadratic_minimizer(&objectives)?;
    ProblemInstance::new(objectives, 1.0, top)?.with_reference(x_star)
}

/// Solves `(Σ A_i) x = -Σ b_i`.
fn quadratic_minimizer(objectives: &[Objective]) -> Result<Vector> {
    let d = objectives[0].dim();
    let mut a_sum = Matrix::zeros(d, d);
    let mut b_sum = Vector::zeros(d);
    for o in objectives {
        match o {
            Objective::Quadratic(q) => {
                a_sum = &a_sum + q.a();
                b_sum.axpy(1.0, q.b());
            }
            Objective::Logistic(_) => unreachable!("quadratic instance"),
        }
    }
    spd_factorize(&a_sum)?.solve(&-&b_sum)
}

fn generate_logistic(rng: &mut rng::SimRng, spec: &ProblemSpec) -> Result<ProblemInstance> {
    use rand::Rng;

    let d = spec.d;
    let m = spec.samples_per_agent;
    let truth = rng::normal_vector(rng, d);
    let mut objectives = Vec::with_capacity(spec.n);
    let mut lipschitz: f64 = spec.lambda;
    for _ in 0..spec.n {
        let shift = rng::normal_vector(rng, d).scale(spec.heterogeneity);
        let mut features = rng::normal_matrix(rng, m, d);
        for j in 0..m {
            for (f, s) in features.row_mut(j).iter_mut().zip(shift.iter()) {
                *f += s;
            }
        }
        let labels: Vec<f64> = (0..m)
            .map(|j| {
                let z: f64 = features.row(j).iter().zip(truth.iter()).map(|(a, t)| a * t).sum();
                if rng.gen::<f64>() < sigmoid(z) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let obj = LogisticObjective::new(features, labels, spec.lambda)?;
        lipschitz = lipschitz.max(obj.smoothness_bound());
        objectives.push(obj.into());
    }
    let instance = ProblemInstance::new(objectives, spec.lambda, lipschitz)?;
    let x_star = crate::algorithms::centralized_newton(&instance, &Vector::zeros(d), REFERENCE_TOL)?;
    instance.with_reference(x_star.x)
}

/// Central finite differences with step `1e-6 · (1 + ‖x‖∞)`.
pub mod fd {
    use super::LocalObjective;
    use crate::error::Result;
    use crate::numerics::{Matrix, Vector};

    pub fn step(x: &Vector) -> f64 {
        1e-6 * (1.0 + x.norm_inf())
    }

    pub fn gradient<O: LocalObjective + ?Sized>(obj: &O, x: &Vector) -> Result<Vector> {
        let h = step(x);
        let mut g = Vector::zeros(x.len());
        for k in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            g[k] = (obj.value(&plus)? - obj.value(&minus)?) / (2.0 * h);
        }
        Ok(g)
    }

    /// Differentiates the analytic gradient; the result is symmetrized.
    pub fn hessian<O: LocalObjective + ?Sized>(obj: &O, x: &Vector) -> Result<Matrix> {
        let h = step(x);
        let d = x.len();
        let mut cols = Vec::with_capacity(d);
        for k in 0..d {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            let diff = &obj.gradient(&plus)? - &obj.gradient(&minus)?;
            cols.push(diff.scale(1.0 / (2.0 * h)));
        }
        Ok(Matrix::from_fn(d, d, |i, j| 0.5 * (cols[j][i] + cols[i][j])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x)
    }

    fn single_logistic(lambda: f64) -> LogisticObjective {
        LogisticObjective::new(Matrix::from_rows(&[[1.0, 0.0]]), vec![1.0], lambda).unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let q = QuadraticObjective::new(Matrix::identity(2), Vector::zeros(2), 0.0).unwrap();
        assert_eq!(q.value(&v(&[3.0, 4.0])).unwrap(), 12.5);
        assert_eq!(q.value(&Vector::zeros(2)).unwrap(), 0.0);
        assert_eq!(q.gradient(&v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        assert_eq!(q.hessian(&v(&[7.0, -1.0])).unwrap(), Matrix::identity(2));
        assert!(matches!(q.value(&Vector::zeros(3)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(q.gradient(&Vector::zeros(1)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn logistic_value_at_origin_is_log2() {
        let l = single_logistic(1.0);
        assert!((l.value(&Vector::zeros(2)).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_single_sample_derivatives() {
        // Frozen from central finite differences of the loss (value, then
        // gradient): d/dz log(1+e^-z) at 0 is -1/2 and the curvature is 1/4.
        let l = single_logistic(1.0);
        let x = Vector::zeros(2);
        let fd_g = fd::gradient(&l, &x).unwrap();
        assert!((fd_g[0] + 0.5).abs() < 1e-9 && fd_g[1].abs() < 1e-9);
        let g = l.gradient(&x).unwrap();
        assert_eq!(g, v(&[-0.5, 0.0]));

        let fd_h = fd::hessian(&l, &x).unwrap();
        assert!((fd_h[(0, 0)] - 1.25).abs() < 1e-8);
        let h = l.hessian(&x).unwrap();
        assert_eq!(h, Matrix::from_rows(&[[1.25, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn logistic_ridge_lower_bound() {
        let spec = ProblemSpec::logistic(3, 4, 15, 0.1);
        let inst = generate_problem(9, &spec).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..10 {
            let x = rng::normal_vector(&mut r, 4).scale(3.0);
            for o in inst.objectives() {
                let ev = symmetric_eigenvalues(&o.hessian(&x).unwrap()).unwrap();
                assert!(ev[0] >= 0.1 - 1e-12);
            }
        }
    }

    #[test]
    fn logistic_rejects_bad_inputs() {
        let f = Matrix::from_rows(&[[1.0, 0.0]]);
        assert!(LogisticObjective::new(f.clone(), vec![1.0], 0.0).is_err());
        assert!(LogisticObjective::new(f.clone(), vec![0.5], 1.0).is_err());
        assert!(LogisticObjective::new(f, vec![1.0, -1.0], 1.0).is_err());
    }

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let inst = generate_problem(3, &ProblemSpec::quadratic(4, 3, 0.5)).unwrap();
        let x_star = inst.reference_solution().unwrap();
        assert!(inst.gradient(x_star).unwrap().norm() <= 1e-8);

        let c = v(&[1.0, -2.0]);
        let q = QuadraticObjective::centered(&c);
        assert!(q.gradient(&c).unwrap().norm() <= 1e-12);
        assert_eq!(q.value(&c).unwrap(), 0.0);

        let inst = generate_problem(3, &ProblemSpec::logistic(3, 3, 10, 0.2)).unwrap();
        let x_star = inst.reference_solution().unwrap();
        assert!(inst.gradient(x_star).unwrap().norm() <= 1e-8);
    }

    #[test]
    fn estimate_bounds_examples() {
        let d = 3;
        let q = |s: f64| -> Objective {
            QuadraticObjective::new(Matrix::identity(d).scale(s), Vector::zeros(d), 0.0)
                .unwrap()
                .into()
        };
        let pts = vec![Vector::zeros(d), v(&[1.0, 2.0, 3.0])];
        let inst = ProblemInstance::new(vec![q(2.0), q(2.0)], 2.0, 2.0).unwrap();
        let (lo, hi) = estimate_bounds(&inst, &pts).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);

        let inst = ProblemInstance::new(vec![q(1.0), q(3.0)], 1.0, 3.0).unwrap();
        let (lo, hi) = estimate_bounds(&inst, &pts[..1]).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);

        let inst = generate_problem(5, &ProblemSpec::logistic(4, 3, 12, 0.3)).unwrap();
        let mut r = rng::seeded(2);
        let pts: Vec<Vector> = (0..5).map(|_| rng::normal_vector(&mut r, 3)).collect();
        let (lo, hi) = estimate_bounds(&inst, &pts).unwrap();
        assert!(lo >= 0.3 - 1e-12);
        assert!(lo <= hi && hi <= inst.lipschitz() + 1e-9);

        assert!(estimate_bounds(&inst, &[]).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        for spec in [ProblemSpec::quadratic(5, 3, 0.7), ProblemSpec::logistic(3, 2, 8, 0.1)] {
            let a = generate_problem(42, &spec).unwrap();
            let b = generate_problem(42, &spec).unwrap();
            assert_eq!(a, b);
            let c = generate_problem(43, &spec).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn zero_heterogeneity_gives_identical_agents() {
        let inst = generate_problem(11, &ProblemSpec::quadratic(5, 3, 0.0)).unwrap();
        let first = &inst.objectives()[0];
        assert!(inst.objectives().iter().all(|o| o == first));
    }

    #[test]
    fn quadratic_reference_solves_normal_equations() {
        let inst = generate_problem(8, &ProblemSpec::quadratic(4, 3, 1.0)).unwrap();
        let x_star = inst.reference_solution().unwrap();
        // (1/n) Σ (A_i x* + b_i), evaluated directly from the stored data
        let mut acc = Vector::zeros(3);
        for o in inst.objectives() {
            let Objective::Quadratic(q) = o else { panic!() };
            acc.axpy(1.0, &(&q.a().matvec(x_star).unwrap() + q.b()));
        }
        assert!(acc.scale(0.25).norm() <= 1e-10);
    }

    #[test]
    fn generated_quadratic_respects_declared_bounds() {
        let inst = generate_problem(4, &ProblemSpec::quadratic(6, 4, 1.2)).unwrap();
        let (lo, hi) = estimate_bounds(&inst, &[Vector::zeros(4)]).unwrap();
        assert!(lo >= inst.mu() - 1e-12);
        assert!(hi <= inst.lipschitz() + 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let mut s = ProblemSpec::quadratic(0, 3, 0.0);
        assert!(matches!(generate_problem(0, &s), Err(Error::InvalidSpec(_))));
        s.n = 2;
        s.d = 0;
        assert!(matches!(generate_problem(0, &s), Err(Error::InvalidSpec(_))));
        let s = ProblemSpec::logistic(2, 2, 5, 0.0);
        assert!(matches!(generate_problem(0, &s), Err(Error::InvalidSpec(_))));
        let s = ProblemSpec::logistic(2, 2, 5, -1.0);
        assert!(matches!(generate_problem(0, &s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn instance_rejects_bad_bounds() {
        let q: Objective = QuadraticObjective::centered(&Vector::zeros(2)).into();
        assert!(ProblemInstance::new(vec![q.clone()], 0.0, 1.0).is_err());
        assert!(ProblemInstance::new(vec![q.clone()], 2.0, 1.0).is_err());
        assert!(ProblemInstance::new(vec![], 1.0, 1.0).is_err());
        let q3: Objective = QuadraticObjective::centered(&Vector::zeros(3)).into();
        assert!(ProblemInstance::new(vec![q, q3], 1.0, 1.0).is_err());
    }
}
