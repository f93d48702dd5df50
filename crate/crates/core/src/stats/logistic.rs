//! Logistic regression: the negative log-likelihood and its derivatives, an
//! L1-penalized fit by accelerated proximal gradient, and an unpenalized
//! Newton (IRLS) refit with the inverse observed information as covariance.
//!
//! Coefficient vectors always carry the intercept at index 0, followed by one
//! entry per design column. The intercept is never penalized.

use serde::{Deserialize, Serialize};

use super::linalg::{Cholesky, Matrix};
use crate::error::{Error, Result};

/// Borrowed n×k design (row-major, no intercept column) and binary outcome.
#[derive(Debug, Clone, Copy)]
pub struct Design<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n_rows: usize,
    n_cols: usize,
}

impl<'a> Design<'a> {
    pub fn new(x: &'a [f64], n_rows: usize, n_cols: usize, y: &'a [f64]) -> Result<Self> {
        if x.len() != n_rows * n_cols || y.len() != n_rows {
            return Err(Error::Misaligned(format!(
                "design of {} values for {n_rows}x{n_cols}, outcome of {}",
                x.len(),
                y.len()
            )));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("outcome must be 0 or 1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite values".into()));
        }
        Ok(Self {
            x,
            y,
            n_rows,
            n_cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of coefficients including the intercept.
    pub fn n_params(&self) -> usize {
        self.n_cols + 1
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    fn linear_predictor(&self, beta: &[f64], i: usize) -> f64 {
        beta[0]
            + self
                .row(i)
                .iter()
                .zip(&beta[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Σᵢ log(1 + e^{ηᵢ}) − yᵢ ηᵢ.
pub fn negative_log_likelihood(design: &Design<'_>, beta: &[f64]) -> f64 {
    assert_eq!(beta.len(), design.n_params());
    (0..design.n_rows)
        .map(|i| {
            let eta = design.linear_predictor(beta, i);
            softplus(eta) - design.y[i] * eta
        })
        .sum()
}

pub fn nll_gradient(design: &Design<'_>, beta: &[f64]) -> Vec<f64> {
    assert_eq!(beta.len(), design.n_params());
    let mut g = vec![0.0; design.n_params()];
    for i in 0..design.n_rows {
        let r = sigmoid(design.linear_predictor(beta, i)) - design.y[i];
        g[0] += r;
        for (gj, x) in g[1..].iter_mut().zip(design.row(i)) {
            *gj += r * x;
        }
    }
    g
}

/// Observed information Xᵀ W X with W = diag(p(1 − p)).
pub fn nll_hessian(design: &Design<'_>, beta: &[f64]) -> Matrix {
    let p = design.n_params();
    let mut h = Matrix::zeros(p, p);
    let mut aug = vec![0.0; p];
    for i in 0..design.n_rows {
        let mu = sigmoid(design.linear_predictor(beta, i));
        let w = mu * (1.0 - mu);
        aug[0] = 1.0;
        aug[1..].copy_from_slice(design.row(i));
        for a in 0..p {
            let wa = w * aug[a];
            if wa == 0.0 {
                continue;
            }
            for b in 0..=a {
                h[(a, b)] += wa * aug[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// L1 penalty weight on the summed negative log-likelihood.
    pub lambda: f64,
    pub max_iterations: usize,
    pub lasso_max_iterations: usize,
    /// Convergence tolerance on max |gradient| (KKT residual for the L1 fit).
    pub gradient_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    /// Armijo constant for the Newton line search.
    pub armijo: f64,
    pub ridge_jitter: f64,
    pub max_jitter_steps: usize,
    /// |β| below this counts as eliminated by the L1 fit.
    pub elimination_threshold: f64,
    /// |β| above this flags quasi-separation in the refit.
    pub separation_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iterations: 100,
            lasso_max_iterations: 200,
            gradient_tol: 1e-8,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo: 1e-4,
            ridge_jitter: 1e-10,
            max_jitter_steps: 12,
            elimination_threshold: 1e-10,
            separation_threshold: 30.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda >= 0.0
            && self.lambda.is_finite()
            && self.max_iterations > 0
            && self.lasso_max_iterations > 0
            && self.gradient_tol > 0.0
            && self.initial_step > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.armijo > 0.0
            && self.armijo < 0.5
            && self.ridge_jitter > 0.0
            && self.elimination_threshold >= 0.0
            && self.separation_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid solver settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    /// Column indices (0-based, excluding the intercept) with |β| below the
    /// elimination threshold.
    pub eliminated: Vec<usize>,
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn l1_norm(beta: &[f64]) -> f64 {
    beta[1..].iter().map(|b| b.abs()).sum()
}

/// Largest violation of the L1 optimality conditions.
pub fn kkt_residual(beta: &[f64], gradient: &[f64], lambda: f64) -> f64 {
    let mut r = gradient[0].abs();
    for (b, g) in beta[1..].iter().zip(&gradient[1..]) {
        let v = if *b != 0.0 {
            (g + lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        r = r.max(v);
    }
    r
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// argmin_d gᵀd + ½ dᵀHd + λ Σ_{j≥1} |βⱼ + dⱼ| by coordinate descent.
fn quadratic_l1_step(h: &Matrix, g: &[f64], beta: &[f64], lambda: f64) -> Vec<f64> {
    let p = g.len();
    let mut d = vec![0.0; p];
    let mut hd = vec![0.0; p];
    let scale = (0..p).fold(0.0_f64, |m, j| m.max(h[(j, j)]));
    for _ in 0..10_000 {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let hjj = h[(j, j)];
            if !(hjj > 1e-14 * scale) {
                continue;
            }
            let q = g[j] + hd[j];
            let current = beta[j] + d[j];
            let target = if j == 0 {
                current - q / hjj
            } else {
                soft_threshold(current - q / hjj, lambda / hjj)
            };
            let delta = target - current;
            if delta != 0.0 {
                d[j] += delta;
                for (k, v) in hd.iter_mut().enumerate() {
                    *v += h[(k, j)] * delta;
                }
                max_change = max_change.max(delta.abs() * hjj.sqrt());
            }
        }
        if max_change <= 1e-15 * (1.0 + scale.sqrt()) {
            break;
        }
    }
    d
}

/// Minimizes NLL(β) + λ Σ_{j≥1} |βⱼ| by proximal Newton steps from zero: each
/// step solves the penalized local quadratic by cyclic coordinate descent,
/// then backtracks on the true objective.
pub fn fit_logistic_l1(design: &Design<'_>, settings: &SolverSettings) -> Result<LassoFit> {
    settings.validate()?;
    if design.n_rows == 0 {
        return Err(Error::Domain("cannot fit on zero rows".into()));
    }
    let lambda = settings.lambda;
    let p = design.n_params();
    let objective = |b: &[f64]| negative_log_likelihood(design, b) + lambda * l1_norm(b);

    let mut x = vec![0.0; p];
    let mut fx = objective(&x);
    let mut converged = false;
    let mut iterations = 0;
    let mut gx = nll_gradient(design, &x);

    for iter in 1..=settings.lasso_max_iterations {
        if kkt_residual(&x, &gx, lambda) <= settings.gradient_tol {
            converged = true;
            break;
        }
        iterations = iter;
        let h = nll_hessian(design, &x);
        let d = quadratic_l1_step(&h, &gx, &x, lambda);
        let w: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let decrease: f64 = gx.iter().zip(&d).map(|(g, d)| g * d).sum::<f64>()
            + lambda * (l1_norm(&w) - l1_norm(&x));
        if !(decrease < 0.0) {
            // the quadratic model offers nothing at working precision
            break;
        }
        let mut t = settings.initial_step.min(1.0);
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fc = objective(&cand);
            if fc <= fx + settings.armijo * t * decrease {
                accepted = Some((cand, fc));
                break;
            }
            t *= settings.backtrack_factor;
        }
        let Some((cand, fc)) = accepted else {
            break;
        };
        x = cand;
        fx = fc;
        gx = nll_gradient(design, &x);
    }
    if kkt_residual(&x, &gx, lambda) <= settings.gradient_tol {
        converged = true;
    }

    let kkt = kkt_residual(&x, &gx, lambda);
    let eliminated = (1..p)
        .filter(|&j| x[j].abs() < settings.elimination_threshold)
        .map(|j| j - 1)
        .collect();
    Ok(LassoFit {
        objective: fx,
        coefficients: x,
        eliminated,
        gradient: gx,
        kkt_residual: kkt,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub coefficients: Vec<f64>,
    pub covariance: Matrix,
    pub log_likelihood: f64,
    pub max_abs_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub quasi_separation: bool,
    /// Negative log-likelihood at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub jitter: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Unpenalized maximum likelihood by damped Newton iterations.
pub fn fit_logistic_mle(design: &Design<'_>, settings: &SolverSettings) -> Result<MleFit> {
    settings.validate()?;
    if design.n_rows == 0 {
        return Err(Error::Domain("cannot fit on zero rows".into()));
    }
    let p = design.n_params();
    let mut beta = vec![0.0; p];
    let mut f = negative_log_likelihood(design, &beta);
    let mut trace = vec![f];
    let mut converged = false;
    let mut quasi_separation = false;
    let mut iterations = 0;
    let mut g = nll_gradient(design, &beta);

    while iterations < settings.max_iterations {
        if max_abs(&g) <= settings.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let h = nll_hessian(design, &beta);
        let chol =
            Cholesky::factor_with_jitter(&h, settings.ridge_jitter, settings.max_jitter_steps)?;
        let direction: Vec<f64> = chol.solve(&g).into_iter().map(|d| -d).collect();
        let slope: f64 = g.iter().zip(&direction).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = beta.iter().zip(&direction).map(|(b, d)| b + t * d).collect();
            let fc = negative_log_likelihood(design, &cand);
            if fc <= f + settings.armijo * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= settings.backtrack_factor;
        }
        let Some((cand, fc)) = accepted else {
            // no descent left at working precision
            break;
        };
        beta = cand;
        f = fc;
        trace.push(f);
        g = nll_gradient(design, &beta);
        if beta[1..].iter().any(|b| b.abs() > settings.separation_threshold) {
            quasi_separation = true;
            break;
        }
    }
    if max_abs(&g) <= settings.gradient_tol {
        converged = true;
    }
    // a fitted probability numerically at 0 or 1 also signals separation
    let extreme_fit =
        (0..design.n_rows).any(|i| design.linear_predictor(&beta, i).abs() > settings.separation_threshold);
    if extreme_fit || beta[1..].iter().any(|b| b.abs() > settings.separation_threshold) {
        quasi_separation = true;
    }

    let h = nll_hessian(design, &beta);
    let chol = Cholesky::factor_with_jitter(&h, settings.ridge_jitter, settings.max_jitter_steps)?;
    Ok(MleFit {
        covariance: chol.inverse(),
        jitter: chol.jitter,
        log_likelihood: -f,
        max_abs_gradient: max_abs(&g),
        coefficients: beta,
        iterations,
        converged,
        quasi_separation,
        objective_trace: trace,
    })
}
