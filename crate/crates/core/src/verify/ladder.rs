use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chaos::{chaos_density, sobolev_diag, truncation_indicator, ChaosInput, ChaosMode, ChaosParams};
use crate::error::{argument, Result};
use crate::io::{fmt_f64, Table};
use crate::mollifier::MollifierSpec;

use super::stats::{mean_se, trend_decreasing};
use super::{require_subcritical, McSetup};

/// Pairwise quantities along an eps ladder with the trend verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub label: String,
    /// Strictly decreasing ladder.
    pub eps: Vec<f64>,
    /// `(eps, eps')` of each entry.
    pub pairs: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub se: Vec<f64>,
    /// SE of each consecutive difference, from the per-replica differences.
    pub step_se: Vec<f64>,
    pub overflow_excluded: usize,
    pub decreasing: bool,
}

impl LadderReport {
    fn from_replicas(label: String, eps: Vec<f64>, pairs: Vec<(f64, f64)>, rows: &[Option<Vec<f64>>]) -> Self {
        let kept: Vec<&Vec<f64>> = rows.iter().flatten().collect();
        let m = pairs.len();
        let column = |j: usize| kept.iter().map(|r| r[j]).collect::<Vec<f64>>();
        let (values, se): (Vec<f64>, Vec<f64>) = (0..m).map(|j| mean_se(&column(j))).unzip();
        let step_se = (1..m)
            .map(|j| {
                let d: Vec<f64> = kept.iter().map(|r| r[j] - r[j - 1]).collect();
                mean_se(&d).1
            })
            .collect::<Vec<_>>();
        let decreasing = trend_decreasing(&values, &step_se);
        Self {
            label,
            eps,
            pairs,
            values,
            se,
            step_se,
            overflow_excluded: rows.len() - kept.len(),
            decreasing,
        }
    }

    /// Columns `eps, eps_prime, value, se`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["eps", "eps_prime", "value", "se"]);
        for ((a, b), (v, s)) in self.pairs.iter().zip(self.values.iter().zip(&self.se)) {
            t.push(vec![fmt_f64(*a), fmt_f64(*b), fmt_f64(*v), fmt_f64(*s)]);
        }
        t
    }
}

fn check_ladder(eps: &[f64]) -> Result<()> {
    if eps.len() < 2 {
        return Err(argument("an eps ladder needs at least two entries"));
    }
    if !eps.windows(2).all(|w| w[1] < w[0]) || eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(argument("eps ladder must be strictly decreasing inside (0, 1]"));
    }
    Ok(())
}

fn gamma_label(params: &ChaosParams) -> String {
    let (a, b) = params.mode.alpha_beta();
    match params.mode {
        ChaosMode::Single { .. } => format!("gamma={}{:+}i", fmt_f64(a), b),
        ChaosMode::TwoField { .. } => format!("alpha={},beta={}", fmt_f64(a), fmt_f64(b)),
    }
}

/// `E|M_{eps,q}(f) - M_{eps',q}(f)|^2` for consecutive ladder entries on coupled samples.
pub fn cauchy_ladder(setup: &McSetup<'_>, params: &ChaosParams, eps: &[f64]) -> Result<LadderReport> {
    check_ladder(eps)?;
    require_subcritical(setup.grid().dim(), params)?;
    let two = matches!(params.mode, ChaosMode::TwoField { .. });
    let vt = setup.variances(eps, &[])?;
    let input = ChaosInput {
        grid: setup.grid(),
        f: setup.f,
        variances: &vt,
        profile: setup.theta.name(),
    };
    let rows = setup.map(|r| {
        let d = setup.draw(r, eps, &[setup.theta], two)?;
        let vals = eps
            .iter()
            .map(|&e| d.chaos(params, e, &input))
            .collect::<Result<Vec<_>>>()?;
        if vals.iter().any(|v| v.overflow) {
            return Ok(None);
        }
        Ok(Some(
            vals.windows(2)
                .map(|w| (w[0].value() - w[1].value()).norm_sqr())
                .collect::<Vec<f64>>(),
        ))
    })?;
    let pairs = eps.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(LadderReport::from_replicas(
        format!("cauchy {}", gamma_label(params)),
        eps.to_vec(),
        pairs,
        &rows,
    ))
}

/// `E|M^theta_eps(f) - M^theta'_eps(f)|^2` per ladder entry, both mollifiers applied to the same field.
pub fn mollifier_independence(
    setup: &McSetup<'_>,
    other: &MollifierSpec,
    params: &ChaosParams,
    eps: &[f64],
) -> Result<LadderReport> {
    check_ladder(eps)?;
    require_subcritical(setup.grid().dim(), params)?;
    let two = matches!(params.mode, ChaosMode::TwoField { .. });
    let vt = setup.variances(eps, &[other])?;
    let same = other.name() == setup.theta.name();
    let thetas: Vec<&MollifierSpec> = if same {
        vec![setup.theta]
    } else {
        vec![setup.theta, other]
    };
    let input = |profile| ChaosInput {
        grid: setup.grid(),
        f: setup.f,
        variances: &vt,
        profile,
    };
    let (ia, ib) = (input(setup.theta.name()), input(other.name()));
    let rows = setup.map(|r| {
        let d = setup.draw(r, eps, &thetas, two)?;
        let mut out = Vec::with_capacity(eps.len());
        for &e in eps {
            let a = d.chaos(params, e, &ia)?;
            let b = d.chaos(params, e, &ib)?;
            if a.overflow || b.overflow {
                return Ok(None);
            }
            out.push((a.value() - b.value()).norm_sqr());
        }
        Ok(Some(out))
    })?;
    let pairs = eps.iter().map(|&e| (e, e)).collect();
    Ok(LadderReport::from_replicas(
        format!(
            "mollifier {} vs {} {}",
            setup.theta.name(),
            other.name(),
            gamma_label(params)
        ),
        eps.to_vec(),
        pairs,
        &rows,
    ))
}

/// `E||(M_{eps,q} - M_{eps',q}) rho||^2_{H^-u}` for consecutive ladder entries, `rho = f`.
pub fn sobolev_ladder(setup: &McSetup<'_>, params: &ChaosParams, eps: &[f64], u: f64) -> Result<LadderReport> {
    check_ladder(eps)?;
    let dim = setup.grid().dim();
    if !(u > dim as f64 / 2.0) {
        return Err(argument(format!("Sobolev index u = {u} must exceed d/2")));
    }
    // u > d/2 keeps the zero mode, so outside the L2 region truncation is still required
    require_subcritical(dim, params)?;
    let two = matches!(params.mode, ChaosMode::TwoField { .. });
    let vt = setup.variances(eps, &[])?;
    let input = ChaosInput {
        grid: setup.grid(),
        f: setup.f,
        variances: &vt,
        profile: setup.theta.name(),
    };
    let grid = setup.grid();
    let rows = setup.map(|r| {
        let d = setup.draw(r, eps, &[setup.theta], two)?;
        let mask = match params.truncation {
            Some(t) => Some(truncation_indicator(
                &d.primary,
                t.q,
                t.lambda,
                setup.f.support(),
                t.variant,
                setup.theta.name(),
            )?),
            None => None,
        };
        let mut dens = Vec::with_capacity(eps.len());
        for &e in eps {
            let (mut v, overflow) = chaos_density(&d.primary, d.secondary.as_ref(), params, e, &input)?;
            if overflow {
                return Ok(None);
            }
            if let Some(m) = &mask {
                for (&i, &ok) in m.points.iter().zip(&m.per_point) {
                    if !ok {
                        v[i] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            dens.push(v);
        }
        let out = dens
            .windows(2)
            .map(|w| {
                let diff: Vec<Complex64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                sobolev_diag(&diff, u, grid)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Some(out))
    })?;
    let pairs = eps.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(LadderReport::from_replicas(
        format!("sobolev u={} {}", fmt_f64(u), gamma_label(params)),
        eps.to_vec(),
        pairs,
        &rows,
    ))
}
