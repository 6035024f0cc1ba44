//! Sample summaries used by the experiment runner.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample covariance and the standard error of that estimate,
/// from the fourth-order product moment.
pub fn covariance(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let mut c = 0.0;
    let mut c2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let p = (a - mx) * (b - my);
        c += p;
        c2 += p * p;
    }
    let biased = c / n;
    let var_of_product = (c2 / n - biased * biased).max(0.0);
    (c / (n - 1.0), (var_of_product / n).sqrt())
}

pub fn variance(x: &[f64]) -> (f64, f64) {
    covariance(x, x)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(values: &[Vec<f64>]) -> f64 {
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| values[i][j]);
    nalgebra::SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Ordinary least squares fit of `y = a + slope * x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// 95% confidence interval from the Student t quantile.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// `None` for fewer than three points or constant `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = (n - 2) as f64;
    let std_error = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).ok()?.inverse_cdf(0.975);
    Some(SlopeFit {
        slope,
        intercept,
        std_error,
        ci_low: slope - t * std_error,
        ci_high: slope + t * std_error,
        points: n,
    })
}
