//! Phase diagram of the complex chaos parameter and admissible barrier slopes.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::io::{fmt_f64, Table};

/// Seams closer than this to a defining equality are labelled [`Phase::Boundary`].
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[serde(rename = "L2_subcritical")]
    L2Subcritical,
    #[serde(rename = "subcritical_non_L2")]
    SubcriticalNonL2,
    Boundary,
    #[serde(rename = "phase_II_glassy")]
    PhaseIIGlassy,
    #[serde(rename = "phase_III")]
    PhaseIII,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::L2Subcritical => "L2_subcritical",
            Phase::SubcriticalNonL2 => "subcritical_non_L2",
            Phase::Boundary => "boundary",
            Phase::PhaseIIGlassy => "phase_II_glassy",
            Phase::PhaseIII => "phase_III",
        }
    }

    pub fn is_subcritical(&self) -> bool {
        matches!(self, Phase::L2Subcritical | Phase::SubcriticalNonL2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub phase: Phase,
    pub dim: usize,
}

fn check_dim(dim: usize) -> Result<f64> {
    if dim == 1 || dim == 2 {
        Ok(dim as f64)
    } else {
        Err(argument(format!("dimension must be 1 or 2, got {dim}")))
    }
}

/// Labels `(alpha, beta)`; every strict inequality must hold with margin [`BOUNDARY_TOL`].
pub fn classify(dim: usize, alpha: f64, beta: f64) -> Result<PhaseLabel> {
    let d = check_dim(dim)?;
    let (a, b) = (alpha.abs(), beta.abs());
    let r2 = a * a + b * b;
    let half = (d / 2.0).sqrt();
    let crit = (2.0 * d).sqrt();
    let tol = BOUNDARY_TOL;
    let phase = if r2 < d - tol {
        Phase::L2Subcritical
    } else if r2 > d + tol && a > half + tol && a < crit - tol && b < crit - a - tol {
        Phase::SubcriticalNonL2
    } else if a < half - tol && r2 > d + tol {
        Phase::PhaseIII
    } else if a + b > crit + tol && a > half + tol {
        Phase::PhaseIIGlassy
    } else {
        Phase::Boundary
    };
    Ok(PhaseLabel { phase, dim })
}

/// Feasible open interval for `lambda`: `sqrt(2d) < lambda < 2|alpha|` and
/// `d + (2|alpha| - lambda)^2 / 2 > alpha^2 + beta^2`.
///
/// Defined in the subcritical non-L2 region and on the seams around it where the interval
/// stays non-empty (e.g. `alpha = 1, beta = 0` in `d = 1`).
pub fn lambda_interval(dim: usize, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let label = classify(dim, alpha, beta)?;
    let refuse = |reason: String| Error::Phase {
        alpha,
        beta,
        dim,
        reason,
    };
    if !matches!(label.phase, Phase::SubcriticalNonL2 | Phase::Boundary) {
        return Err(refuse(format!(
            "a barrier slope exists only in the subcritical non-L2 region, got {}",
            label.phase.as_str()
        )));
    }
    let d = dim as f64;
    let a = alpha.abs();
    let excess = (alpha * alpha + beta * beta - d).max(0.0);
    let (lo, hi) = ((2.0 * d).sqrt(), 2.0 * a - (2.0 * excess).sqrt());
    if !(hi > lo + BOUNDARY_TOL) || !lambda_admissible(dim, alpha, beta, 0.5 * (lo + hi)) {
        return Err(refuse("the barrier constraints have no common solution".into()));
    }
    Ok((lo, hi))
}

/// Midpoint of [`lambda_interval`].
pub fn pick_lambda(dim: usize, alpha: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = lambda_interval(dim, alpha, beta)?;
    Ok(0.5 * (lo + hi))
}

/// Whether `lambda` satisfies both barrier constraints strictly.
pub fn lambda_admissible(dim: usize, alpha: f64, beta: f64, lambda: f64) -> bool {
    let d = dim as f64;
    let a = alpha.abs();
    lambda > (2.0 * d).sqrt() && lambda < 2.0 * a && d + (2.0 * a - lambda).powi(2) / 2.0 > alpha * alpha + beta * beta
}

/// Labels an `n x n` scan of `[lo, hi]^2`, rows ordered by alpha then beta.
pub fn phase_scan(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Table> {
    check_dim(dim)?;
    if n < 2 || !(hi > lo) {
        return Err(argument("phase scan needs n >= 2 and hi > lo"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut t = Table::new(["alpha", "beta", "label"]);
    for i in 0..n {
        let a = lo + step * i as f64;
        for j in 0..n {
            let b = lo + step * j as f64;
            let p = classify(dim, a, b)?;
            t.push(vec![fmt_f64(a), fmt_f64(b), p.phase.as_str().to_string()]);
        }
    }
    Ok(t)
}
