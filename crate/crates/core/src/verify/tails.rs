use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::chaos::{truncation_indicator, TestFunction, TruncationVariant};
use crate::error::{argument, Error, Result};
use crate::grid::Grid;
use crate::io::{fmt_f64, Table};
use crate::kernels::{KernelSpec, MidpointRule};
use crate::mollifier::MollifierSpec;
use crate::phase::{classify, lambda_admissible, Phase};
use crate::rng::map_replicas;
use crate::sampler::{Backend, FieldSampler, TiltMeans, TiltShift};

use super::stats::{linear_fit, mean_se, LinearFit};
use super::MomentEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub sigma: f64,
    pub u: f64,
    /// `P(N(0, sigma^2) > u)`.
    pub tail: f64,
    /// `2 exp(-u^2 / (2 sigma^2))`.
    pub bound: f64,
    /// `2 exp(-u^2 / sigma^2)`, the form without the factor 2 in the denominator.
    pub literal: f64,
    pub holds: bool,
    pub literal_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub all_hold: bool,
    /// `(sigma, u)` where the literal form fails.
    pub literal_violations: Vec<(f64, f64)>,
}

impl TailReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["sigma", "u", "tail", "bound", "literal", "holds", "literal_holds"]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.sigma),
                fmt_f64(r.u),
                fmt_f64(r.tail),
                fmt_f64(r.bound),
                fmt_f64(r.literal),
                r.holds.to_string(),
                r.literal_holds.to_string(),
            ]);
        }
        t
    }
}

/// Exact Gaussian tails against the `2 exp(-u^2/(2 sigma^2))` bound on a `(sigma, u/sigma)` table.
pub fn tail_bound_check(sigmas: &[f64], ratios: &[f64]) -> Result<TailReport> {
    if sigmas.iter().any(|&s| !(s > 0.0)) || ratios.iter().any(|&r| !(r >= 0.0)) {
        return Err(argument("tail table needs sigma > 0 and u >= 0"));
    }
    let mut rows = Vec::with_capacity(sigmas.len() * ratios.len());
    for &sigma in sigmas {
        for &ratio in ratios {
            let u = ratio * sigma;
            let tail = 0.5 * erfc(u / (sigma * std::f64::consts::SQRT_2));
            let bound = 2.0 * (-u * u / (2.0 * sigma * sigma)).exp();
            let literal = 2.0 * (-u * u / (sigma * sigma)).exp();
            rows.push(TailRow {
                sigma,
                u,
                tail,
                bound,
                literal,
                holds: tail <= bound,
                literal_holds: tail <= literal,
            });
        }
    }
    Ok(TailReport {
        all_hold: rows.iter().all(|r| r.holds),
        literal_violations: rows
            .iter()
            .filter(|r| !r.literal_holds)
            .map(|r| (r.sigma, r.u))
            .collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupProbReport {
    pub lambda: f64,
    /// `P(sup_{supp f} Y_k > lambda k)` per `k`.
    pub exceed: Vec<(usize, MomentEstimate)>,
    /// Fit of `log P` against `k` over the entries with `P > 0`.
    pub fit: Option<LinearFit>,
    /// Negative slope with `R^2 >= 0.9` on at least three points.
    pub decays: bool,
    /// `P[A_{q,lambda}(f)]` per `q`.
    pub event: Vec<(usize, MomentEstimate)>,
    /// Each step up in `q` is an increase, or a decrease within `4 SE`.
    pub increasing: bool,
}

impl SupProbReport {
    /// Columns `kind, level, p, se`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["kind", "level", "p", "se"]);
        for (name, rows) in [("sup_exceeds", &self.exceed), ("event", &self.event)] {
            for (k, e) in rows {
                t.push(vec![name.to_string(), k.to_string(), fmt_f64(e.re), fmt_f64(e.se_re)]);
            }
        }
        t
    }
}

fn indicator_estimate(id: &str, flags: impl Iterator<Item = bool>) -> MomentEstimate {
    let v: Vec<Option<Complex64>> = flags
        .map(|b| Some(Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    MomentEstimate::from_values(id, &v, None)
}

/// Barrier exceedance of `Y_k` on `supp f` and the truncation event probabilities.
#[allow(clippy::too_many_arguments)]
pub fn sup_field_prob(
    sampler: &FieldSampler,
    f: &TestFunction,
    lambda: f64,
    ks: &[usize],
    qs: &[usize],
    seed: u64,
    replicas: usize,
    workers: Option<usize>,
) -> Result<SupProbReport> {
    let d = sampler.grid().dim() as f64;
    if !(lambda > (2.0 * d).sqrt()) {
        return Err(argument(format!(
            "lambda = {lambda} must exceed sqrt(2d) = {}",
            (2.0 * d).sqrt()
        )));
    }
    let n_max = sampler.n_max();
    if ks.iter().chain(qs).any(|&k| k == 0 || k > n_max) {
        return Err(argument(format!("levels must lie in 1..={n_max}")));
    }
    let support = f.support();
    let rows = map_replicas(replicas, workers, |r| -> Result<(Vec<bool>, Vec<bool>)> {
        let s = sampler.sample(seed, r as u64);
        let exceed = ks
            .iter()
            .map(|&k| {
                let y = s.y(k);
                let bar = k as f64 * lambda;
                support.iter().any(|&i| y[i] > bar)
            })
            .collect();
        let event = qs
            .iter()
            .map(|&q| truncation_indicator(&s, q, lambda, support, TruncationVariant::Increments, "").map(|i| i.global))
            .collect::<Result<Vec<bool>>>()?;
        Ok((exceed, event))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let exceed: Vec<(usize, MomentEstimate)> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let id = format!("P(sup Y_{k} > {k} lambda)");
            (k, indicator_estimate(&id, rows.iter().map(|r| r.0[j])))
        })
        .collect();
    let event: Vec<(usize, MomentEstimate)> = qs
        .iter()
        .enumerate()
        .map(|(j, &q)| {
            let id = format!("P[A(q={q})]");
            (q, indicator_estimate(&id, rows.iter().map(|r| r.1[j])))
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = exceed
        .iter()
        .filter(|(_, e)| e.re > 0.0)
        .map(|(k, e)| (*k as f64, e.re.ln()))
        .unzip();
    let fit = if xs.len() >= 3 {
        linear_fit(&xs, &ys, None)
    } else {
        None
    };
    let decays = fit.is_some_and(|f| f.slope < 0.0 && f.r2 >= 0.9);
    let increasing = (1..qs.len()).all(|j| {
        let diff: Vec<f64> = rows
            .iter()
            .map(|r| f64::from(u8::from(r.1[j])) - f64::from(u8::from(r.1[j - 1])))
            .collect();
        let (m, se) = mean_se(&diff);
        m >= 0.0 || m.abs() <= 4.0 * se
    });
    Ok(SupProbReport {
        lambda,
        exceed,
        fit,
        decays,
        event,
        increasing,
    })
}

/// Inputs of [`tilted_event_prob`].
#[derive(Debug, Clone)]
pub struct TiltSetup<'a> {
    pub spec: &'a KernelSpec,
    pub theta: &'a MollifierSpec,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub q: usize,
    /// Mollification scale of both tilt points.
    pub eps: f64,
    /// Midpoint of the two tilt points.
    pub center: Vec<f64>,
    /// `|x - y|` values, at least four.
    pub separations: Vec<f64>,
    /// Defaults to `ceil(log 1/eps) + 2`.
    pub n_max: Option<usize>,
    pub seed: u64,
    pub replicas: usize,
    pub workers: Option<usize>,
    pub rule: MidpointRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltReport {
    /// `(|x - y|, P~[A_q(x, y)])`.
    pub estimates: Vec<(f64, MomentEstimate)>,
    /// Weighted fit of `log P~` against `log(|x - y| v eps)`; the slope is the decay exponent.
    pub fit: Option<LinearFit>,
    /// `(2 alpha - lambda)^2 / 2`.
    pub target: f64,
    /// Fitted exponent `>= target - 0.3`.
    pub passes: bool,
}

impl TiltReport {
    /// Columns `separation, p, se`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["separation", "p", "se"]);
        for (s, e) in &self.estimates {
            t.push(vec![fmt_f64(*s), fmt_f64(e.re), fmt_f64(e.se_re)]);
        }
        t
    }
}

/// `P~[A_q(x) and A_q(y)]` under the tilt by `alpha (X_eps(x) + X_eps(y))`, per separation,
/// and the fitted power of `|x - y| v eps`.
pub fn tilted_event_prob(setup: &TiltSetup<'_>) -> Result<TiltReport> {
    let dim = setup.spec.dim();
    if setup.alpha != 0.0 {
        let phase = classify(dim, setup.alpha, setup.beta)?.phase;
        if phase != Phase::SubcriticalNonL2 {
            return Err(Error::Phase {
                alpha: setup.alpha,
                beta: setup.beta,
                dim,
                reason: format!(
                    "tilted events are defined in the subcritical non-L2 region, got {}",
                    phase.as_str()
                ),
            });
        }
        if !lambda_admissible(dim, setup.alpha, setup.beta, setup.lambda) {
            return Err(argument(format!(
                "lambda = {} violates the barrier constraints",
                setup.lambda
            )));
        }
    }
    if setup.separations.len() < 4 {
        return Err(argument("the exponent fit needs at least four separations"));
    }
    if setup.center.len() != dim {
        return Err(argument("tilt center must match the field dimension"));
    }
    let n_max = setup.n_max.unwrap_or_else(|| setup.spec.levels_for(setup.eps));
    if setup.q > n_max {
        return Err(argument(format!("q = {} exceeds n_max = {n_max}", setup.q)));
    }
    let mut estimates = Vec::with_capacity(setup.separations.len());
    for &s in &setup.separations {
        if !(s > 0.0) {
            return Err(argument("separations must be positive"));
        }
        let mut x = setup.center.clone();
        let mut y = setup.center.clone();
        x[0] -= s / 2.0;
        y[0] += s / 2.0;
        let grid = Grid::scattered(setup.spec.domain().clone(), &[x.clone(), y.clone()], vec![1.0, 1.0])?;
        let sampler = FieldSampler::new(setup.spec, &grid, n_max, Backend::Dense)?;
        let tilt = TiltShift {
            x,
            y,
            eps: setup.eps,
            eps2: setup.eps,
            alpha: setup.alpha,
        };
        let means = TiltMeans::compute(&tilt, &sampler, setup.theta, &[], setup.rule)?;
        let flags = map_replicas(setup.replicas, setup.workers, |r| -> Result<bool> {
            let mut sample = sampler.sample(setup.seed, r as u64);
            means.apply(&mut sample)?;
            let ind = truncation_indicator(
                &sample,
                setup.q,
                setup.lambda,
                &[0, 1],
                TruncationVariant::Increments,
                "",
            )?;
            Ok(ind.global)
        })
        .into_iter()
        .collect::<Result<Vec<bool>>>()?;
        let id = format!("P~[A(q={})](s={})", setup.q, fmt_f64(s));
        estimates.push((s, indicator_estimate(&id, flags.into_iter())));
    }
    let r = setup.replicas as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (s, e) in &estimates {
        if e.re > 0.0 {
            // delta method: Var(log p) = (1 - p) / (p R), with 1 - p floored at 1/R
            let q = (1.0 - e.re).max(1.0 / r);
            xs.push(s.max(setup.eps).ln());
            ys.push(e.re.ln());
            ws.push(e.re * r / q);
        }
    }
    let fit = if xs.len() >= 4 {
        linear_fit(&xs, &ys, Some(&ws))
    } else {
        None
    };
    let target = (2.0 * setup.alpha - setup.lambda).powi(2) / 2.0;
    let passes = fit.is_some_and(|f| f.slope >= target - 0.3);
    Ok(TiltReport {
        estimates,
        fit,
        target,
        passes,
    })
}
