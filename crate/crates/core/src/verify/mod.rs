//! Oracles and Monte Carlo checks: moments with standard errors, Cauchy ladders,
//! kernel-estimate suprema, Gaussian tails and barrier-event probabilities.

mod kernel;
mod ladder;
mod stats;
mod tails;

#[cfg(test)]
mod tests;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    chaos_integral, truncated_chaos, truncation_indicator, ChaosInput, ChaosMode, ChaosParams, ChaosValue,
    TestFunction, VarianceTable,
};
use crate::error::{argument, Error, Result};
use crate::grid::Grid;
use crate::io::{fmt_f64, Table};
use crate::kernels::{KernelSpec, MidpointRule, MollifiedKernelTable};
use crate::mollifier::MollifierSpec;
use crate::phase::{classify, Phase};
use crate::rng::{map_replicas, Channel};
use crate::sampler::{FieldSample, FieldSampler};

pub use kernel::{kernel_estimate_check, EstimateGrid, EstimateKind, KernelEstimateReport, KernelEstimateStep};
pub use ladder::{cauchy_ladder, mollifier_independence, sobolev_ladder, LadderReport};
pub use stats::{linear_fit, mean_se, trend_decreasing, LinearFit};
pub use tails::{
    sup_field_prob, tail_bound_check, tilted_event_prob, SupProbReport, TailReport, TailRow, TiltReport, TiltSetup,
};

/// Monte Carlo estimate of a complex quantity, with an optional oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub id: String,
    /// Replicas that entered the estimate.
    pub replicas: usize,
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
    pub oracle_re: Option<f64>,
    pub oracle_im: Option<f64>,
    pub z_re: Option<f64>,
    pub z_im: Option<f64>,
    pub overflow_excluded: usize,
}

fn z_score(est: f64, oracle: f64, se: f64) -> f64 {
    if se > 0.0 {
        (est - oracle) / se
    } else if est == oracle {
        0.0
    } else {
        f64::INFINITY.copysign(est - oracle)
    }
}

impl MomentEstimate {
    /// Sample mean and unbiased standard error; `None` entries are overflow-flagged replicas.
    pub fn from_values(id: &str, values: &[Option<Complex64>], oracle: Option<Complex64>) -> Self {
        let kept: Vec<Complex64> = values.iter().flatten().copied().collect();
        let re: Vec<f64> = kept.iter().map(|v| v.re).collect();
        let im: Vec<f64> = kept.iter().map(|v| v.im).collect();
        let (m_re, se_re) = mean_se(&re);
        let (m_im, se_im) = mean_se(&im);
        Self {
            id: id.to_string(),
            replicas: kept.len(),
            re: m_re,
            im: m_im,
            se_re,
            se_im,
            oracle_re: oracle.map(|o| o.re),
            oracle_im: oracle.map(|o| o.im),
            z_re: oracle.map(|o| z_score(m_re, o.re, se_re)),
            z_im: oracle.map(|o| z_score(m_im, o.im, se_im)),
            overflow_excluded: values.len() - kept.len(),
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Largest absolute z-score; `None` without an oracle.
    pub fn max_abs_z(&self) -> Option<f64> {
        Some(self.z_re?.abs().max(self.z_im?.abs()))
    }

    /// `|z| <= limit` in both components.
    pub fn within(&self, limit: f64) -> bool {
        self.max_abs_z().is_some_and(|z| z <= limit)
    }
}

/// Shared inputs of the replica-based estimators.
#[derive(Debug, Clone, Copy)]
pub struct McSetup<'a> {
    pub sampler: &'a FieldSampler,
    pub theta: &'a MollifierSpec,
    pub f: &'a TestFunction,
    pub seed: u64,
    pub replicas: usize,
    /// `None` uses the ambient thread pool.
    pub workers: Option<usize>,
}

impl McSetup<'_> {
    fn grid(&self) -> &Grid {
        self.sampler.grid()
    }

    fn variances(&self, eps: &[f64], extra: &[&MollifierSpec]) -> Result<VarianceTable> {
        let mut t = VarianceTable::from_sampler(self.sampler, self.theta, eps)?;
        for th in extra {
            if th.name() != self.theta.name() {
                t.extend(self.sampler, th, eps)?;
            }
        }
        Ok(t)
    }

    /// Primary sample (and the secondary one for two-field chaos) mollified at every `eps`
    /// with every profile, all on the same underlying increments.
    fn draw(&self, replica: usize, eps: &[f64], thetas: &[&MollifierSpec], two_field: bool) -> Result<Draw> {
        let r = replica as u64;
        let mut primary = self.sampler.sample(self.seed, r);
        let mut secondary = two_field.then(|| self.sampler.sample_channel(self.seed, Channel::Secondary, r));
        for th in thetas {
            self.sampler.mollify(&mut primary, eps, th)?;
            if let Some(s) = secondary.as_mut() {
                self.sampler.mollify(s, eps, th)?;
            }
        }
        Ok(Draw { primary, secondary })
    }

    /// Runs `f` on every replica in a fixed order.
    fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        map_replicas(self.replicas, self.workers, f).into_iter().collect()
    }
}

struct Draw {
    primary: FieldSample,
    secondary: Option<FieldSample>,
}

impl Draw {
    fn chaos(&self, params: &ChaosParams, eps: f64, input: &ChaosInput<'_>) -> Result<ChaosValue> {
        if params.truncation.is_some() {
            truncated_chaos(&self.primary, self.secondary.as_ref(), params, eps, input)
        } else {
            chaos_integral(&self.primary, self.secondary.as_ref(), params, eps, input)
        }
    }
}

/// Quantity estimated by [`mc_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimand", rename_all = "kebab-case")]
pub enum Estimand {
    /// `E[M_eps(f)]`, oracle `int f`.
    Mean { eps: f64 },
    /// `E[M_eps(f) conj(M_eps'(f))]`.
    Cross { eps: f64, eps2: f64 },
    /// `E|M_eps(f) - M_eps'(f)|^2` on coupled samples.
    SquaredDiff { eps: f64, eps2: f64 },
    /// `P[A_{q,lambda}(f)]` from the truncation parameters.
    Event,
}

/// Result of [`mc_moment`] with the per-replica chaos values behind it.
#[derive(Debug, Clone)]
pub struct MomentRun {
    pub estimate: MomentEstimate,
    pub values: Vec<(usize, ChaosValue)>,
}

/// Runs `setup.replicas` seeded replicas and estimates `estimand`.
pub fn mc_moment(
    setup: &McSetup<'_>,
    params: &ChaosParams,
    estimand: Estimand,
    oracle: Option<Complex64>,
) -> Result<MomentRun> {
    let two = matches!(params.mode, ChaosMode::TwoField { .. });
    let eps: Vec<f64> = match estimand {
        Estimand::Mean { eps } => vec![eps],
        Estimand::Cross { eps, eps2 } | Estimand::SquaredDiff { eps, eps2 } => {
            if eps == eps2 {
                vec![eps]
            } else {
                vec![eps, eps2]
            }
        }
        Estimand::Event => {
            let t = params
                .truncation
                .ok_or_else(|| argument("event estimand needs truncation parameters"))?;
            let f = setup.f;
            let flags = setup.map(|r| {
                let s = setup.sampler.sample(setup.seed, r as u64);
                let ind = truncation_indicator(&s, t.q, t.lambda, f.support(), t.variant, setup.theta.name())?;
                Ok(Some(Complex64::new(if ind.global { 1.0 } else { 0.0 }, 0.0)))
            })?;
            let id = format!("P[A(q={}, lambda={})]", t.q, fmt_f64(t.lambda));
            return Ok(MomentRun {
                estimate: MomentEstimate::from_values(&id, &flags, oracle),
                values: Vec::new(),
            });
        }
    };
    let vt = setup.variances(&eps, &[])?;
    let input = ChaosInput {
        grid: setup.grid(),
        f: setup.f,
        variances: &vt,
        profile: setup.theta.name(),
    };
    let per = setup.map(|r| {
        let d = setup.draw(r, &eps, &[setup.theta], two)?;
        eps.iter()
            .map(|&e| d.chaos(params, e, &input))
            .collect::<Result<Vec<_>>>()
    })?;
    let at = |e: f64| eps.iter().position(|&x| x == e).expect("eps is on the list");
    let samples: Vec<Option<Complex64>> = per
        .iter()
        .map(|vals| {
            if vals.iter().any(|v| v.overflow) {
                return None;
            }
            Some(match estimand {
                Estimand::Mean { .. } => vals[0].value(),
                Estimand::Cross { eps: a, eps2: b } => vals[at(a)].value() * vals[at(b)].value().conj(),
                Estimand::SquaredDiff { eps: a, eps2: b } => {
                    Complex64::new((vals[at(a)].value() - vals[at(b)].value()).norm_sqr(), 0.0)
                }
                Estimand::Event => unreachable!("handled above"),
            })
        })
        .collect();
    let id = match estimand {
        Estimand::Mean { eps } => format!("E[M(eps={})]", fmt_f64(eps)),
        Estimand::Cross { eps, eps2 } => format!("E[M(eps={}) conj M(eps={})]", fmt_f64(eps), fmt_f64(eps2)),
        Estimand::SquaredDiff { eps, eps2 } => format!("E|M(eps={}) - M(eps={})|^2", fmt_f64(eps), fmt_f64(eps2)),
        Estimand::Event => unreachable!("handled above"),
    };
    let values = per
        .into_iter()
        .enumerate()
        .flat_map(|(r, vals)| vals.into_iter().map(move |v| (r, v)))
        .collect();
    Ok(MomentRun {
        estimate: MomentEstimate::from_values(&id, &samples, oracle),
        values,
    })
}

/// Per-replica chaos values as CSV: `replica, eps, re, im, truncated_flag, overflow_flag`.
pub fn chaos_table(values: &[(usize, ChaosValue)]) -> Table {
    let mut t = Table::new(["replica", "eps", "re", "im", "truncated_flag", "overflow_flag"]);
    for (r, v) in values {
        t.push(vec![
            r.to_string(),
            fmt_f64(v.eps),
            fmt_f64(v.re),
            fmt_f64(v.im),
            u8::from(v.truncated).to_string(),
            u8::from(v.overflow).to_string(),
        ]);
    }
    t
}

/// `sum_{x,y} exp(|gamma|^2 K_{eps,eps'}(x, y)) f(x) f(y) w(x) w(y)` with the continuum kernel.
#[allow(clippy::too_many_arguments)]
pub fn second_moment_oracle(
    spec: &KernelSpec,
    theta: &MollifierSpec,
    gamma: Complex64,
    eps: f64,
    eps2: f64,
    f: &TestFunction,
    grid: &Grid,
    rule: MidpointRule,
) -> Result<f64> {
    let (wide, narrow) = if eps >= eps2 { (eps, eps2) } else { (eps2, eps) };
    if !f.supported_in(grid, wide) {
        return Err(Error::Domain(format!("supp f is not inside D_eps for eps = {wide}")));
    }
    let g2 = gamma.norm_sqr();
    let w = grid.weights();
    let fv = f.values();
    if g2 == 0.0 {
        let s = f.integral(grid);
        return Ok(s * s);
    }
    let table = MollifiedKernelTable::compute(spec, theta, grid, wide, narrow, None, rule)?;
    let mut total = 0.0;
    for &i in f.support() {
        let mut row = 0.0;
        for &j in f.support() {
            let k = table
                .get(i, j)
                .ok_or_else(|| Error::Domain(format!("kernel entry ({i}, {j}) is undefined")))?;
            row += (g2 * k).exp() * fv[j] * w[j];
        }
        total += row * fv[i] * w[i];
    }
    Ok(total)
}

/// Checks that `(alpha, beta)` is subcritical and that truncation is on outside the L2 region.
pub(crate) fn require_subcritical(dim: usize, params: &ChaosParams) -> Result<Phase> {
    let (alpha, beta) = params.mode.alpha_beta();
    let phase = classify(dim, alpha, beta)?.phase;
    match phase {
        Phase::L2Subcritical => Ok(phase),
        Phase::SubcriticalNonL2 if params.truncation.is_some() => Ok(phase),
        Phase::SubcriticalNonL2 => Err(argument(
            "outside the L2 region the Cauchy ladder needs truncation parameters",
        )),
        other => Err(Error::Phase {
            alpha,
            beta,
            dim,
            reason: format!("the chaos is not subcritical here ({})", other.as_str()),
        }),
    }
}
