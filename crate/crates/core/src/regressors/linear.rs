use log::warn;

use super::{check_weighted_inputs, Predict};
use crate::data::Matrix;
use crate::error::Result;
use crate::linalg::solve_spd;

/// `y ≈ intercept + coefᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Diagonal jitter added because the normal equations were singular.
    pub jitter: f64,
}

impl Predict for LinearModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Minimises `Σ wᵢ (yᵢ − β₀ − βᵀxᵢ)² + ridge‖β‖²` with the intercept
/// unpenalised.
///
/// The intercept is profiled out by centring at the weighted means, which
/// leaves a `d x d` positive-semidefinite system. A singular system gets the
/// jitter described in [`solve_spd`] and a warning.
pub fn fit_weighted_linear(x: &Matrix, y: &[f64], w: &[f64], ridge: f64) -> Result<LinearModel> {
    let total = check_weighted_inputs(x, y, w)?;
    let d = x.ncols();
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for (i, row) in x.rows().enumerate() {
        ybar += w[i] * y[i];
        for (m, v) in xbar.iter_mut().zip(row) {
            *m += w[i] * v;
        }
    }
    ybar /= total;
    xbar.iter_mut().for_each(|m| *m /= total);

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for (i, row) in x.rows().enumerate() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            xc[j] = row[j] - xbar[j];
        }
        let yc = y[i] - ybar;
        for j in 0..d {
            let wx = wi * xc[j];
            rhs[j] += wx * yc;
            for k in 0..=j {
                gram[j * d + k] += wx * xc[k];
            }
        }
    }
    for j in 0..d {
        gram[j * d + j] += ridge;
        for k in 0..j {
            gram[k * d + j] = gram[j * d + k];
        }
    }
    if d == 0 {
        return Ok(LinearModel {
            intercept: ybar,
            coef: Vec::new(),
            jitter: 0.0,
        });
    }
    let sol = solve_spd(&gram, d, &rhs)?;
    if sol.jitter > 0.0 {
        warn!(
            "singular normal equations, added diagonal jitter {:e}",
            sol.jitter
        );
    }
    let intercept = ybar - xbar.iter().zip(&sol.x).map(|(m, b)| m * b).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coef: sol.x,
        jitter: sol.jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_two_points() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let m = fit_weighted_linear(&x, &[1.0, 3.0], &[1.0, 1.0], 0.0).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-14);
        assert!((m.coef[0] - 2.0).abs() < 1e-14);
        assert_eq!(m.jitter, 0.0);
    }

    #[test]
    fn doubling_weights_changes_nothing() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let y = [1.0, 2.5, 2.0, 7.0];
        let a = fit_weighted_linear(&x, &y, &[1.0; 4], 0.0).unwrap();
        let b = fit_weighted_linear(&x, &y, &[2.0; 4], 0.0).unwrap();
        assert!((a.intercept - b.intercept).abs() < 1e-14);
        assert!((a.coef[0] - b.coef[0]).abs() < 1e-14);
    }

    #[test]
    fn constant_column_triggers_jitter_flag() {
        let x = Matrix::new(3, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        let m = fit_weighted_linear(&x, &[0.0, 1.0, 2.0], &[1.0; 3], 0.0).unwrap();
        assert!(m.jitter > 0.0);
        assert!((m.coef[1] - 1.0).abs() < 1e-6);
        assert!((m.predict_row(&[1.0, 3.0]) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_weights_rejected() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(fit_weighted_linear(&x, &[1.0, 2.0], &[0.0, 0.0], 0.0).is_err());
        assert!(fit_weighted_linear(&x, &[1.0], &[1.0], 0.0).is_err());
    }
}
