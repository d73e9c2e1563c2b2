use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::io::{fmt_f64, Table};
use crate::kernels::{KernelSpec, MidpointRule, MollifiedCovariance};
use crate::mollifier::MollifierSpec;

/// Which kernel estimate to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    /// `|K_{eps,eps'}(x, y) - log 1/(|x - y| v eps v eps')|`.
    MollifiedLog,
    /// `|K_{n,eps,eps'}(x, y) - min(log 1/|x - y|, log 1/(eps v eps'), n)|`.
    PartialMin,
}

/// Parameter grid of a kernel-estimate check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateGrid {
    /// Refinement ladder; each step uses `eps' in {eps, eps/2}`.
    pub eps: Vec<f64>,
    /// Separations `|x - y|`, 0 allowed.
    pub distances: Vec<f64>,
    /// Levels `n` for [`EstimateKind::PartialMin`].
    pub levels: Vec<usize>,
    /// Subtract the logarithmic term (off only for degenerate constant kernels).
    pub log_term: bool,
}

impl EstimateGrid {
    /// The ladder with separations `0` and `e^{-j/2}`, `j = 0..=24`, and levels `1..=12`.
    pub fn standard(eps: Vec<f64>) -> Self {
        let mut distances = vec![0.0];
        distances.extend((0..=24).map(|j| (-(j as f64) / 2.0).exp()));
        Self {
            eps,
            distances,
            levels: (1..=12).collect(),
            log_term: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimateStep {
    pub eps: f64,
    pub sup: f64,
    pub at_distance: f64,
    pub at_level: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimateReport {
    pub kind: EstimateKind,
    pub steps: Vec<KernelEstimateStep>,
    /// Largest ratio between consecutive suprema, either direction.
    pub max_ratio: f64,
    /// `max_ratio <= 1.5`.
    pub stable: bool,
}

impl KernelEstimateReport {
    /// Columns `eps, sup, distance, level`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["eps", "sup", "distance", "level"]);
        for s in &self.steps {
            t.push(vec![
                fmt_f64(s.eps),
                fmt_f64(s.sup),
                fmt_f64(s.at_distance),
                s.at_level.map_or(String::new(), |n| n.to_string()),
            ]);
        }
        t
    }
}

fn log_inv(r: f64) -> f64 {
    if r > 0.0 {
        -r.ln()
    } else {
        f64::INFINITY
    }
}

/// Empirical suprema of a kernel estimate along a refinement ladder.
pub fn kernel_estimate_check(
    spec: &KernelSpec,
    theta: &MollifierSpec,
    kind: EstimateKind,
    grid: &EstimateGrid,
    rule: MidpointRule,
) -> Result<KernelEstimateReport> {
    if grid.eps.is_empty() || grid.distances.is_empty() {
        return Err(argument("kernel estimate check needs eps values and distances"));
    }
    if kind == EstimateKind::PartialMin && grid.levels.is_empty() {
        return Err(argument("partial-kernel estimate needs levels"));
    }
    let d = spec.dim();
    let disp = |r: f64| {
        let mut v = vec![0.0; d];
        v[0] = r;
        v
    };
    let mut steps = Vec::with_capacity(grid.eps.len());
    for &eps in &grid.eps {
        let mut best = KernelEstimateStep {
            eps,
            sup: f64::NEG_INFINITY,
            at_distance: f64::NAN,
            at_level: None,
        };
        for eps2 in [eps, eps / 2.0] {
            let levels: Vec<Option<usize>> = match kind {
                EstimateKind::MollifiedLog => vec![None],
                EstimateKind::PartialMin => grid.levels.iter().map(|&n| Some(n)).collect(),
            };
            for level in levels {
                let cov = MollifiedCovariance::new(spec, theta, Some(eps), Some(eps2), level, rule)?;
                for &r in &grid.distances {
                    let k = cov.eval(&disp(r));
                    let reference = if !grid.log_term {
                        0.0
                    } else {
                        match level {
                            None => log_inv(r.max(eps)),
                            Some(n) => log_inv(r).min(log_inv(eps)).min(n as f64),
                        }
                    };
                    let gap = (k - reference).abs();
                    if gap > best.sup {
                        best = KernelEstimateStep {
                            eps,
                            sup: gap,
                            at_distance: r,
                            at_level: level,
                        };
                    }
                }
            }
        }
        steps.push(best);
    }
    let max_ratio = steps
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].sup, w[1].sup);
            if a > 0.0 && b > 0.0 {
                (a / b).max(b / a)
            } else if a == b {
                1.0
            } else {
                f64::INFINITY
            }
        })
        .fold(1.0, f64::max);
    Ok(KernelEstimateReport {
        kind,
        steps,
        max_ratio,
        stable: max_ratio <= 1.5,
    })
}
