//! Mollified complex chaos integrals, truncation events and the negative Sobolev diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::fft::{signed_freq, TorusFft};
use crate::grid::{shrink_domain, Grid};
use crate::mollifier::MollifiedField;
use crate::mollifier::MollifierSpec;
use crate::sampler::{FieldSample, FieldSampler};

/// Largest exponent real part before `exp` is reported as an overflow.
const EXP_LIMIT: f64 = 700.0;

/// Result of a Wick exponential: either a finite value or an explicit overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wick {
    Value(Complex64),
    Overflow,
}

/// `exp(u z - u^2 v / 2)` with the complex square of `u`.
pub fn wick_exp(u: Complex64, z: f64, v: f64) -> Result<Wick> {
    if !(v >= 0.0) {
        return Err(argument(format!("Wick variance must be >= 0, got {v}")));
    }
    let e = u * z - u * u * (v / 2.0);
    if e.re > EXP_LIMIT || !e.re.is_finite() {
        return Ok(Wick::Overflow);
    }
    Ok(Wick::Value(e.exp()))
}

/// A test function sampled on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    values: Vec<f64>,
    support: Vec<usize>,
}

fn bump1(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl TestFunction {
    pub fn from_values(name: &str, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(argument("test function values must be finite"));
        }
        let support = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
        Ok(Self {
            name: name.to_string(),
            values,
            support,
        })
    }

    /// Radial bump `exp(-1 / (1 - |x - c|^2 / R^2))`.
    pub fn bump(grid: &Grid, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != grid.dim() || !(radius > 0.0) {
            return Err(argument(
                "bump needs a center of the grid's dimension and a positive radius",
            ));
        }
        let values = (0..grid.len())
            .map(|i| bump1(crate::grid::distance(grid.point(i), center) / radius))
            .collect();
        Self::from_values("bump", values)
    }

    /// Product of one-dimensional bumps, one per axis.
    pub fn tensor_bump(grid: &Grid, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != grid.dim() || !(radius > 0.0) {
            return Err(argument(
                "bump needs a center of the grid's dimension and a positive radius",
            ));
        }
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i)
                    .iter()
                    .zip(center)
                    .map(|(x, c)| bump1((x - c) / radius))
                    .product()
            })
            .collect();
        Self::from_values("tensor-bump", values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid indices where `f != 0`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Quadrature of `f` with the grid weights.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.support.iter().map(|&i| self.values[i] * grid.weights()[i]).sum()
    }

    pub fn supported_in(&self, grid: &Grid, eps: f64) -> bool {
        let inner = shrink_domain(grid.domain(), eps);
        self.support.iter().all(|&i| inner.contains(grid.point(i)))
    }

    /// Smallest `q >= 1` with `supp f` inside `D_{e^{-q}}`.
    pub fn q0(&self, grid: &Grid) -> usize {
        let margin = self
            .support
            .iter()
            .map(|&i| grid.domain().margin(grid.point(i)))
            .fold(f64::INFINITY, f64::min);
        let mut q = ((2.0 / margin).ln().floor() + 1.0).max(1.0) as usize;
        while !self.supported_in(grid, (-(q as f64)).exp()) {
            q += 1;
        }
        while q > 1 && self.supported_in(grid, (-(q as f64 - 1.0)).exp()) {
            q -= 1;
        }
        q
    }

    pub fn linear_combination(&self, a: f64, other: &TestFunction, b: f64) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(argument("test functions live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_values("combination", values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ChaosMode {
    /// `exp(gamma X - gamma^2 K / 2)` with one field.
    Single { re: f64, im: f64 },
    /// `exp(alpha X + i beta Y' + (beta^2 - alpha^2) K / 2)` with an independent copy `Y'`.
    TwoField { alpha: f64, beta: f64 },
}

impl ChaosMode {
    pub fn single(gamma: Complex64) -> Self {
        ChaosMode::Single {
            re: gamma.re,
            im: gamma.im,
        }
    }

    /// `(alpha, beta)`; for a single field these are the real and imaginary parts of gamma.
    pub fn alpha_beta(&self) -> (f64, f64) {
        match *self {
            ChaosMode::Single { re, im } => (re, im),
            ChaosMode::TwoField { alpha, beta } => (alpha, beta),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ChaosMode::Single { .. } => "single",
            ChaosMode::TwoField { .. } => "two-field",
        }
    }
}

/// Which fields the barrier events look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationVariant {
    /// `Y_k(x) <= k lambda`.
    #[default]
    Increments,
    /// `X_{e^{-k}}(x) <= k lambda`.
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub q: usize,
    pub lambda: f64,
    #[serde(default)]
    pub variant: TruncationVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosParams {
    pub dim: usize,
    pub mode: ChaosMode,
    pub truncation: Option<Truncation>,
}

impl ChaosParams {
    pub fn new(dim: usize, mode: ChaosMode, truncation: Option<Truncation>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(argument(format!("dimension must be 1 or 2, got {dim}")));
        }
        if let Some(t) = truncation {
            let floor = (2.0 * dim as f64).sqrt();
            if !(t.lambda > floor) {
                return Err(argument(format!(
                    "lambda = {} must exceed sqrt(2d) = {floor}",
                    t.lambda
                )));
            }
            if t.q < 1 {
                return Err(argument("truncation level q must be >= 1"));
            }
        }
        Ok(Self { dim, mode, truncation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosValue {
    pub re: f64,
    pub im: f64,
    pub mode: String,
    pub eps: f64,
    pub truncated: bool,
    /// Whether the global barrier event held (always true without truncation).
    pub event: bool,
    pub overflow: bool,
    /// `<grid hash>/<seed>/<replica>` of the sample the value came from.
    pub manifest: String,
}

impl ChaosValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `K_eps(x)` per mollifier profile and scale; the grid fields are stationary so one value per entry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VarianceTable {
    entries: Vec<(String, f64, f64)>,
}

impl VarianceTable {
    /// Exact variances of the sampler's mollified fields.
    pub fn from_sampler(sampler: &FieldSampler, theta: &MollifierSpec, eps: &[f64]) -> Result<Self> {
        let mut t = Self::default();
        t.extend(sampler, theta, eps)?;
        Ok(t)
    }

    pub fn extend(&mut self, sampler: &FieldSampler, theta: &MollifierSpec, eps: &[f64]) -> Result<()> {
        for &e in eps {
            let v = sampler.mollified_variance(theta, e)?;
            self.entries.push((theta.name().to_string(), e, v));
        }
        Ok(())
    }

    pub fn insert(&mut self, profile: &str, eps: f64, var: f64) {
        self.entries.push((profile.to_string(), eps, var));
    }

    pub fn get(&self, profile: &str, eps: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(p, e, _)| p == profile && *e == eps)
            .map(|&(_, _, v)| v)
    }
}

/// Everything a chaos evaluation needs besides the sample.
#[derive(Debug, Clone, Copy)]
pub struct ChaosInput<'a> {
    pub grid: &'a Grid,
    pub f: &'a TestFunction,
    pub variances: &'a VarianceTable,
    pub profile: &'a str,
}

/// Per-point barrier indicators on the support plus their conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicator {
    pub points: Vec<usize>,
    pub per_point: Vec<bool>,
    pub global: bool,
}

/// `A_{q,lambda}(x) = [Y_k(x) <= k lambda for all k in q..=n_max]`, or the mollified variant.
pub fn truncation_indicator(
    sample: &FieldSample,
    q: usize,
    lambda: f64,
    points: &[usize],
    variant: TruncationVariant,
    profile: &str,
) -> Result<Indicator> {
    let n_max = sample.n_max();
    if q > n_max {
        return Err(argument(format!("q = {q} exceeds n_max = {n_max}")));
    }
    let mut per_point = vec![true; points.len()];
    match variant {
        TruncationVariant::Increments => {
            for k in q..=n_max {
                let y = sample.y(k);
                let bar = k as f64 * lambda;
                for (ok, &i) in per_point.iter_mut().zip(points) {
                    *ok = *ok && y[i] <= bar;
                }
            }
        }
        TruncationVariant::Mollified => {
            let mut seen = false;
            for k in q..=n_max {
                let Some(x) = sample.x_with(profile, (-(k as f64)).exp()) else {
                    break;
                };
                seen = true;
                let bar = k as f64 * lambda;
                for (ok, &i) in per_point.iter_mut().zip(points) {
                    let v = x
                        .get(i)
                        .ok_or_else(|| Error::Domain(format!("point {i} is outside D_eps for eps = e^-{k}")))?;
                    *ok = *ok && v <= bar;
                }
            }
            if !seen {
                return Err(Error::Consistency(format!(
                    "mollified truncation needs X at eps = e^-{q} in the sample"
                )));
            }
        }
    }
    let global = per_point.iter().all(|&b| b);
    Ok(Indicator {
        points: points.to_vec(),
        per_point,
        global,
    })
}

fn field_at<'s>(sample: &'s FieldSample, profile: &str, eps: f64, which: &str) -> Result<&'s MollifiedField> {
    sample.x_with(profile, eps).ok_or_else(|| {
        Error::Consistency(format!(
            "{which} sample has no mollified level {profile} at eps = {eps}"
        ))
    })
}

fn evaluate(
    sample: &FieldSample,
    second: Option<&FieldSample>,
    params: &ChaosParams,
    eps: f64,
    input: &ChaosInput<'_>,
    mask: Option<&[bool]>,
) -> Result<(Complex64, bool)> {
    let f = input.f;
    let x = field_at(sample, input.profile, eps, "primary")?;
    let k = input
        .variances
        .get(input.profile, eps)
        .ok_or_else(|| Error::Consistency(format!("no K_eps entry for {} at eps = {eps}", input.profile)))?;
    let y2 = match params.mode {
        ChaosMode::TwoField { .. } => {
            let s2 = second.ok_or_else(|| argument("two-field mode needs an independent second sample"))?;
            Some(field_at(s2, input.profile, eps, "secondary")?)
        }
        ChaosMode::Single { .. } => None,
    };
    let w = input.grid.weights();
    let mut total = Complex64::new(0.0, 0.0);
    let mut overflow = false;
    for (slot, &i) in f.support().iter().enumerate() {
        if mask.is_some_and(|m| !m[slot]) {
            continue;
        }
        let xv = x
            .get(i)
            .ok_or_else(|| argument(format!("test function is not supported in D_eps for eps = {eps}")))?;
        let term = match params.mode {
            ChaosMode::Single { re, im } => wick_exp(Complex64::new(re, im), xv, k)?,
            ChaosMode::TwoField { alpha, beta } => {
                let yv = y2
                    .and_then(|y| y.get(i))
                    .ok_or_else(|| argument(format!("test function is not supported in D_eps for eps = {eps}")))?;
                match (
                    wick_exp(Complex64::new(alpha, 0.0), xv, k)?,
                    wick_exp(Complex64::new(0.0, beta), yv, k)?,
                ) {
                    (Wick::Value(a), Wick::Value(b)) => Wick::Value(a * b),
                    _ => Wick::Overflow,
                }
            }
        };
        match term {
            Wick::Value(v) => total += v * (f.values()[i] * w[i]),
            Wick::Overflow => overflow = true,
        }
    }
    Ok((total, overflow))
}

fn manifest_id(sample: &FieldSample) -> String {
    format!("{}/{}/{}", sample.grid_hash, sample.seed, sample.replica)
}

/// `M_eps(f) = sum_x wick(gamma, X_eps(x), K_eps(x)) f(x) w(x)` (or the two-field form).
pub fn chaos_integral(
    sample: &FieldSample,
    second: Option<&FieldSample>,
    params: &ChaosParams,
    eps: f64,
    input: &ChaosInput<'_>,
) -> Result<ChaosValue> {
    let (v, overflow) = evaluate(sample, second, params, eps, input, None)?;
    Ok(ChaosValue {
        re: v.re,
        im: v.im,
        mode: params.mode.label().to_string(),
        eps,
        truncated: false,
        event: true,
        overflow,
        manifest: manifest_id(sample),
    })
}

/// Chaos integral with the integrand restricted to points where the barrier event holds.
pub fn truncated_chaos(
    sample: &FieldSample,
    second: Option<&FieldSample>,
    params: &ChaosParams,
    eps: f64,
    input: &ChaosInput<'_>,
) -> Result<ChaosValue> {
    let t = params
        .truncation
        .ok_or_else(|| argument("truncated chaos needs truncation parameters"))?;
    let ind = truncation_indicator(sample, t.q, t.lambda, input.f.support(), t.variant, input.profile)?;
    let (v, overflow) = evaluate(sample, second, params, eps, input, Some(&ind.per_point))?;
    Ok(ChaosValue {
        re: v.re,
        im: v.im,
        mode: params.mode.label().to_string(),
        eps,
        truncated: true,
        event: ind.global,
        overflow,
        manifest: manifest_id(sample),
    })
}

/// Grid density `wick(...) rho(x)` (zero where `rho` vanishes), input to [`sobolev_diag`].
/// Overflowing points are reported through the flag and contribute zero.
pub fn chaos_density(
    sample: &FieldSample,
    second: Option<&FieldSample>,
    params: &ChaosParams,
    eps: f64,
    input: &ChaosInput<'_>,
) -> Result<(Vec<Complex64>, bool)> {
    let n = input.grid.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let rho = input.f;
    let x = field_at(sample, input.profile, eps, "primary")?;
    let k = input
        .variances
        .get(input.profile, eps)
        .ok_or_else(|| Error::Consistency(format!("no K_eps entry for {} at eps = {eps}", input.profile)))?;
    let y2 = match params.mode {
        ChaosMode::TwoField { .. } => Some(field_at(
            second.ok_or_else(|| argument("two-field mode needs an independent second sample"))?,
            input.profile,
            eps,
            "secondary",
        )?),
        ChaosMode::Single { .. } => None,
    };
    let mut overflow = false;
    for &i in rho.support() {
        let xv = x
            .get(i)
            .ok_or_else(|| argument(format!("cutoff is not supported in D_eps for eps = {eps}")))?;
        let term = match params.mode {
            ChaosMode::Single { re, im } => wick_exp(Complex64::new(re, im), xv, k)?,
            ChaosMode::TwoField { alpha, beta } => {
                let yv = y2.and_then(|y| y.get(i)).unwrap_or(f64::NAN);
                match (
                    wick_exp(Complex64::new(alpha, 0.0), xv, k)?,
                    wick_exp(Complex64::new(0.0, beta), yv, k)?,
                ) {
                    (Wick::Value(a), Wick::Value(b)) => Wick::Value(a * b),
                    _ => Wick::Overflow,
                }
            }
        };
        match term {
            Wick::Value(v) => out[i] = v * rho.values()[i],
            Wick::Overflow => overflow = true,
        }
    }
    Ok((out, overflow))
}

/// `sum_xi |M^(xi)|^2 (1 + |xi|^2)^{-u} dxi` on the Fourier lattice of the periodized box.
pub fn sobolev_diag(density: &[Complex64], u: f64, grid: &Grid) -> Result<f64> {
    let d = grid.dim();
    if !(u > d as f64 / 2.0) {
        return Err(argument(format!(
            "Sobolev index u = {u} must exceed d/2 = {}",
            d as f64 / 2.0
        )));
    }
    let (cells, h) = grid
        .uniform_params()
        .ok_or_else(|| argument("Sobolev diagnostic needs a uniform grid"))?;
    if density.len() != grid.len() {
        return Err(argument("density length does not match the grid"));
    }
    let side = cells as f64 * h;
    let dxi = 2.0 * std::f64::consts::PI / side;
    let cell = h.powi(d as i32);
    let fft = TorusFft::new(cells, d);
    let mut buf: Vec<Complex64> = density.iter().map(|v| v * cell).collect();
    fft.forward(&mut buf);
    let mut total = 0.0;
    for (idx, c) in buf.iter().enumerate() {
        let kx = signed_freq(idx % cells, cells) as f64;
        let ky = if d == 2 {
            signed_freq(idx / cells, cells) as f64
        } else {
            0.0
        };
        let xi2 = (kx * kx + ky * ky) * dxi * dxi;
        total += c.norm_sqr() * (1.0 + xi2).powf(-u);
    }
    Ok(total * dxi.powi(d as i32))
}
