use serde::{Deserialize, Serialize};

/// Sample mean and standard error of the mean (unbiased variance). `(NaN, NaN)` when empty.
///
/// Sums are shifted by the first value, so a constant sample gives its value and SE 0 exactly.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let x0 = xs[0];
    let shift = xs.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    let m = x0 + shift;
    if n == 1 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - x0 - shift).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Weighted coefficient of determination.
    pub r2: f64,
}

/// Weighted least squares; `weights = None` gives ordinary least squares.
///
/// The slope SE is the residual-scaled one for unweighted fits and `1/sqrt(S_xx)` when the
/// weights are inverse variances.
pub fn linear_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let mx = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * (x[i] - mx) * (y[i] - my)).sum();
    let syy: f64 = (0..n).map(|i| w(i) * (y[i] - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = (0..n).map(|i| w(i) * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = match weights {
        Some(_) => (1.0 / sxx).sqrt(),
        None if n > 2 => (sse / (n - 2) as f64 / sxx).sqrt(),
        None => f64::NAN,
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        r2,
    })
}

/// "Decreasing within noise": every step is negative or within `2 SE` of zero, and the last
/// value is below half the first.
pub fn trend_decreasing(values: &[f64], step_se: &[f64]) -> bool {
    if values.len() < 2 || step_se.len() + 1 != values.len() {
        return false;
    }
    let steps_ok = values.windows(2).zip(step_se).all(|(w, se)| {
        let d = w[1] - w[0];
        d < 0.0 || d.abs() <= 2.0 * se
    });
    steps_ok && values[values.len() - 1] < 0.5 * values[0]
}
