//! Deterministic reductions and the regressions used by the experiments.

use num_complex::Complex64;
use serde::Serialize;

/// Pairwise (tree) summation in a fixed order: the result depends only on the
/// input sequence, never on how it was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard error of the slope (residual based).
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = pairwise_sum(&x.iter().map(|v| (v - mx) * (v - mx)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return None;
    }
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss = pairwise_sum(
            &x.iter()
                .zip(y)
                .map(|(a, b)| (b - intercept - slope * a).powi(2))
                .collect::<Vec<_>>(),
        );
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Delete-one-group jackknife standard error of a statistic.
pub fn jackknife_stderr(leave_out: &[f64]) -> f64 {
    let g = leave_out.len();
    if g < 2 {
        return 0.0;
    }
    let m = mean(leave_out);
    let ss = pairwise_sum(&leave_out.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>());
    ((g - 1) as f64 / g as f64 * ss).sqrt()
}

/// `count` points log-spaced over `[lo, hi]`, both ends included.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
