//! Ridge-penalised logistic regression with cross-validated penalty.

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::rng::{self, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbClassifierSpec {
    /// Ridge penalties tried by cross-validation.
    pub penalties: Vec<f64>,
    pub cv_folds: usize,
    /// Probabilities are clipped to `[p_min, 1 - p_min]`.
    pub p_min: f64,
    pub max_iter: usize,
    /// Convergence threshold on `‖∇J‖₂ / n`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ProbClassifierSpec {
    fn default() -> Self {
        // 7 log-spaced values over [1e-3, 1e3]
        let penalties = (0..7).map(|i| 10f64.powi(i - 3)).collect();
        Self {
            penalties,
            cv_folds: 5,
            p_min: 0.01,
            max_iter: 100,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl ProbClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.penalties.is_empty() {
            return Err(Error::Config("empty penalty grid".into()));
        }
        if self.penalties.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Config("penalties must be finite and >= 0".into()));
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::Config(format!(
                "p_min must lie in (0, 0.5), got {}",
                self.p_min
            )));
        }
        Ok(())
    }
}

/// Fitted `Pr(label = 1 | x)` with clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedClassifier {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub penalty: f64,
    pub p_min: f64,
    /// False when IRLS hit the iteration cap; the best iterate is kept.
    pub converged: bool,
    /// Mean held-out log-loss per grid penalty (empty when CV was skipped).
    pub cv_loss: Vec<f64>,
}

impl FittedClassifier {
    /// Constant probability, clipped like a fitted model.
    pub fn constant(p: f64, p_min: f64) -> Self {
        let p = p.clamp(p_min, 1.0 - p_min);
        Self {
            intercept: (p / (1.0 - p)).ln(),
            coef: Vec::new(),
            penalty: f64::INFINITY,
            p_min,
            converged: true,
            cv_loss: Vec::new(),
        }
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x)).clamp(self.p_min, 1.0 - self.p_min)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_proba_row(r)).collect()
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

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Unpenalised negative log-likelihood `Σ log(1+e^η) − yη` and its gradient
/// with respect to `(intercept, coef)`.
pub fn log_loss_gradient(
    x: &Matrix,
    labels: &[u8],
    intercept: f64,
    coef: &[f64],
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (i, row) in x.rows().enumerate() {
        let eta = intercept + coef.iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
        let yi = f64::from(labels[i]);
        loss += softplus(eta) - yi * eta;
        let r = sigmoid(eta) - yi;
        grad[0] += r;
        for j in 0..d {
            grad[j + 1] += r * row[j];
        }
    }
    (loss, grad)
}

/// Objective `J = Σ log-loss + (penalty/2)‖coef‖²` and its gradient.
pub fn penalized_objective(
    x: &Matrix,
    labels: &[u8],
    penalty: f64,
    intercept: f64,
    coef: &[f64],
) -> (f64, Vec<f64>) {
    let (mut j, mut g) = log_loss_gradient(x, labels, intercept, coef);
    for (k, b) in coef.iter().enumerate() {
        j += 0.5 * penalty * b * b;
        g[k + 1] += penalty * b;
    }
    (j, g)
}

struct IrlsFit {
    intercept: f64,
    coef: Vec<f64>,
    converged: bool,
}

/// Damped Newton (IRLS) on the penalised objective.
fn irls(
    x: &Matrix,
    labels: &[u8],
    penalty: f64,
    start: Option<(f64, Vec<f64>)>,
    max_iter: usize,
    tol: f64,
) -> Result<IrlsFit> {
    let n = x.nrows();
    let d = x.ncols();
    let p = d + 1;
    let (mut b0, mut beta) = start.unwrap_or_else(|| {
        let mean = labels.iter().map(|&l| f64::from(l)).sum::<f64>() / n as f64;
        let m = mean.clamp(1e-6, 1.0 - 1e-6);
        ((m / (1.0 - m)).ln(), vec![0.0; d])
    });
    let (mut obj, mut grad) = penalized_objective(x, labels, penalty, b0, &beta);
    let gnorm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt() / n as f64;
    let mut converged = gnorm(&grad) <= tol;
    let mut iter = 0;
    while !converged && iter < max_iter {
        iter += 1;
        let mut hess = vec![0.0; p * p];
        let mut z = vec![0.0; p];
        for row in x.rows() {
            z[0] = 1.0;
            z[1..].copy_from_slice(row);
            let eta = b0 + beta.iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
            let pi = sigmoid(eta);
            let wgt = (pi * (1.0 - pi)).max(1e-12);
            for j in 0..p {
                let wz = wgt * z[j];
                for k in 0..=j {
                    hess[j * p + k] += wz * z[k];
                }
            }
        }
        for j in 1..p {
            hess[j * p + j] += penalty;
        }
        for j in 0..p {
            for k in 0..j {
                hess[k * p + j] = hess[j * p + k];
            }
        }
        let step = solve_spd(&hess, p, &grad)?.x;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let nb0 = b0 - t * step[0];
            let nbeta: Vec<f64> = beta
                .iter()
                .zip(&step[1..])
                .map(|(b, s)| b - t * s)
                .collect();
            let (nobj, ngrad) = penalized_objective(x, labels, penalty, nb0, &nbeta);
            if nobj <= obj + 1e-12 * obj.abs().max(1.0) {
                b0 = nb0;
                beta = nbeta;
                obj = nobj;
                grad = ngrad;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        converged = gnorm(&grad) <= tol;
        if !accepted {
            break;
        }
    }
    Ok(IrlsFit {
        intercept: b0,
        coef: beta,
        converged,
    })
}

fn clipped_log_loss(model: &FittedClassifier, x: &Matrix, labels: &[u8]) -> f64 {
    let n = labels.len() as f64;
    x.rows()
        .zip(labels)
        .map(|(r, &l)| {
            let p = model.predict_proba_row(r);
            if l == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Fits a ridge logistic regression, choosing the penalty by k-fold CV log-loss.
///
/// Folds are stratified by label. When the minority class has fewer rows than
/// `cv_folds` the fold count shrinks to that size; below two rows per class CV
/// is skipped and the middle grid penalty is used.
pub fn fit_logistic(
    x: &Matrix,
    labels: &[u8],
    spec: &ProbClassifierSpec,
) -> Result<FittedClassifier> {
    spec.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows, {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.iter().filter(|&&l| l == 0).count();
    if n1 + n0 != labels.len() {
        return Err(Error::Config("labels must be 0 or 1".into()));
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass);
    }

    // descending penalties so each fit warm-starts from a smoother solution
    let mut order: Vec<usize> = (0..spec.penalties.len()).collect();
    order.sort_by(|&a, &b| spec.penalties[b].total_cmp(&spec.penalties[a]));

    let k = spec.cv_folds.min(n1).min(n0);
    let mut cv_loss = Vec::new();
    let chosen = if k >= 2 && spec.penalties.len() > 1 {
        let mut fold_of = vec![0usize; labels.len()];
        for class in [0u8, 1u8] {
            let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let mut r = rng::stream(spec.seed, 0, Role::ClassifierCv, u64::from(class));
            rows.shuffle(&mut r);
            for (pos, &i) in rows.iter().enumerate() {
                fold_of[i] = pos % k;
            }
        }
        cv_loss = vec![0.0; spec.penalties.len()];
        for f in 0..k {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
            let xtr = x.select_rows(&train);
            let ltr: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
            let xte = x.select_rows(&test);
            let lte: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
            let mut warm = None;
            for &g in &order {
                let fit = irls(
                    &xtr,
                    &ltr,
                    spec.penalties[g],
                    warm.take(),
                    spec.max_iter,
                    spec.tol,
                )?;
                let model = FittedClassifier {
                    intercept: fit.intercept,
                    coef: fit.coef.clone(),
                    penalty: spec.penalties[g],
                    p_min: spec.p_min,
                    converged: fit.converged,
                    cv_loss: Vec::new(),
                };
                cv_loss[g] += clipped_log_loss(&model, &xte, &lte) / k as f64;
                warm = Some((fit.intercept, fit.coef));
            }
        }
        let mut best = 0;
        for g in 1..cv_loss.len() {
            if cv_loss[g] < cv_loss[best] {
                best = g;
            }
        }
        best
    } else {
        spec.penalties.len() / 2
    };

    let penalty = spec.penalties[chosen];
    let fit = irls(x, labels, penalty, None, spec.max_iter, spec.tol)?;
    if !fit.converged {
        warn!("logistic IRLS did not converge for penalty {penalty}");
    }
    Ok(FittedClassifier {
        intercept: fit.intercept,
        coef: fit.coef,
        penalty,
        p_min: spec.p_min,
        converged: fit.converged,
        cv_loss,
    })
}
