use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::grid::shrink_domain;
use crate::kernels::{MidpointRule, MollifiedCovariance};
use crate::mollifier::MollifierSpec;

use super::{FieldSample, FieldSampler};

/// Cameron–Martin tilt by `alpha (X_eps(x) + X_eps'(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltShift {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eps: f64,
    pub eps2: f64,
    pub alpha: f64,
}

/// Mean functions of a tilt on a sampler's grid.
///
/// `Y_n(z)` moves by `alpha (K_{n,eps}(z, x) + K_{n,eps'}(z, y))` and
/// `X_eta(z)` by `alpha (K_{eps,eta}(x, z) + K_{eps',eta}(y, z))`.
#[derive(Debug, Clone)]
pub struct TiltMeans {
    tilt: TiltShift,
    /// Indexed by level `0..=n_max`.
    y_means: Vec<Vec<f64>>,
    /// `(profile, eta, mean)`, NaN outside `D_eta`.
    x_means: Vec<(String, f64, Vec<f64>)>,
}

fn disp(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

impl TiltMeans {
    /// `etas` lists the mollified levels that will be present in tilted samples.
    pub fn compute(
        tilt: &TiltShift,
        sampler: &FieldSampler,
        theta: &MollifierSpec,
        etas: &[f64],
        rule: MidpointRule,
    ) -> Result<Self> {
        let spec = sampler.spec();
        let grid = sampler.grid();
        let d = spec.dim();
        if tilt.x.len() != d || tilt.y.len() != d {
            return Err(argument("tilt points must match the field dimension"));
        }
        if !shrink_domain(spec.domain(), tilt.eps).contains(&tilt.x)
            || !shrink_domain(spec.domain(), tilt.eps2).contains(&tilt.y)
        {
            return Err(Error::Consistency(format!(
                "tilt points {:?}, {:?} lie outside the shrunken domains, so their kernel entries are undefined",
                tilt.x, tilt.y
            )));
        }
        let n = grid.len();
        let n_max = sampler.n_max();
        let a = tilt.alpha;
        let mut y_means = Vec::with_capacity(n_max + 1);
        for k in 0..=n_max {
            let cx = MollifiedCovariance::new(spec, theta, Some(tilt.eps), None, Some(k), rule)?;
            let cy = MollifiedCovariance::new(spec, theta, Some(tilt.eps2), None, Some(k), rule)?;
            let m: Vec<f64> = (0..n)
                .map(|i| {
                    let z = grid.point(i);
                    a * (cx.eval(&disp(&tilt.x, z)) + cy.eval(&disp(&tilt.y, z)))
                })
                .collect();
            y_means.push(m);
        }
        let mut x_means = Vec::with_capacity(etas.len());
        for &eta in etas {
            let cx = MollifiedCovariance::new(spec, theta, Some(tilt.eps), Some(eta), None, rule)?;
            let cy = MollifiedCovariance::new(spec, theta, Some(tilt.eps2), Some(eta), None, rule)?;
            let inner = shrink_domain(spec.domain(), eta);
            let m: Vec<f64> = (0..n)
                .map(|i| {
                    let z = grid.point(i);
                    if inner.contains(z) {
                        a * (cx.eval(&disp(&tilt.x, z)) + cy.eval(&disp(&tilt.y, z)))
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            x_means.push((theta.name().to_string(), eta, m));
        }
        Ok(Self {
            tilt: tilt.clone(),
            y_means,
            x_means,
        })
    }

    pub fn y_mean(&self, n: usize) -> &[f64] {
        &self.y_means[n]
    }

    /// Shifts a sample in place; covariances are untouched.
    pub fn apply(&self, sample: &mut FieldSample) -> Result<()> {
        if sample.tilt.is_some() {
            return Err(Error::Consistency("sample is already tilted".into()));
        }
        if sample.n_max() + 1 != self.y_means.len() {
            return Err(Error::Consistency("tilt was computed for a different n_max".into()));
        }
        if self.tilt.alpha == 0.0 {
            sample.tilt = Some(self.tilt.clone());
            return Ok(());
        }
        for level in &mut sample.mollified {
            let (_, _, m) = self
                .x_means
                .iter()
                .find(|(p, e, _)| *p == level.profile && *e == level.field.eps)
                .ok_or_else(|| {
                    Error::Consistency(format!(
                        "no tilt mean for mollified level {} at eps = {}",
                        level.profile, level.field.eps
                    ))
                })?;
            for (i, v) in level.field.values.iter_mut().enumerate() {
                if level.field.inside[i] {
                    *v += m[i];
                }
            }
        }
        // shift increments by mean differences so that Y_n = sum Z_k still holds exactly
        for (k, z) in sample.increments.iter_mut().enumerate() {
            for (i, v) in z.iter_mut().enumerate() {
                let prev = if k == 0 { 0.0 } else { self.y_means[k - 1][i] };
                *v += self.y_means[k][i] - prev;
            }
        }
        sample.rebuild_partials();
        sample.base = None;
        sample.tilt = Some(self.tilt.clone());
        Ok(())
    }
}

/// Computes the tilt means for the levels present in `sample` and applies them.
pub fn apply_tilt(
    sample: &mut FieldSample,
    tilt: &TiltShift,
    sampler: &FieldSampler,
    theta: &MollifierSpec,
) -> Result<()> {
    let etas: Vec<f64> = sample.mollified.iter().map(|m| m.field.eps).collect();
    let means = TiltMeans::compute(tilt, sampler, theta, &etas, MidpointRule::default())?;
    means.apply(sample)
}
