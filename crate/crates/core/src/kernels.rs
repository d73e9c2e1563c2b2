//! Decomposable log-correlated kernels `K = Q_0 + sum_k Q_k` and their mollified covariances.
//!
//! Every increment is a rescaling of one radial profile: with
//! `q(s) = int_0^1 kappa(e^t s) dt` we have `Q_k(r) = q(e^{t0 + k} r)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{argument, domain, Error, Result};
use crate::fft::TorusFft;
use crate::grid::{shrink_domain, BoxDomain, Grid, Layout};
use crate::io::{fmt_f64, write_json};
use crate::mollifier::MollifierSpec;
use crate::quad::GaussLegendre;

/// Smooth part `Q_0` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Q0Kind {
    Zero,
    Constant { c: f64 },
}

impl Q0Kind {
    pub fn value(&self) -> f64 {
        match *self {
            Q0Kind::Zero => 0.0,
            Q0Kind::Constant { c } => c,
        }
    }
}

/// A log-correlated covariance in decomposed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    dim: usize,
    t0: f64,
    q0: Q0Kind,
    /// `false` suppresses every `Q_k`, leaving the constant kernel `Q_0`.
    increments: bool,
    domain: BoxDomain,
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=2).contains(&dim) {
        return Err(argument(format!("dimension must be 1 or 2, got {dim}")));
    }
    Ok(())
}

impl KernelSpec {
    pub fn new(dim: usize, t0: f64, q0: Q0Kind, domain: BoxDomain) -> Result<Self> {
        check_dim(dim)?;
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(argument(format!("t0 must be finite and >= 0, got {t0}")));
        }
        if let Q0Kind::Constant { c } = q0 {
            if !c.is_finite() {
                return Err(argument("Q_0 constant must be finite"));
            }
        }
        if domain.dim() != dim {
            return Err(argument("kernel and domain dimensions differ"));
        }
        Ok(Self {
            dim,
            t0,
            q0,
            increments: true,
            domain,
        })
    }

    /// `t0 = 0`, `Q_0 = 0` on the unit cube.
    pub fn reference(dim: usize) -> Result<Self> {
        Self::new(dim, 0.0, Q0Kind::Zero, BoxDomain::unit(dim)?)
    }

    /// The degenerate kernel `K == c` (all increments suppressed).
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        let mut s = Self::new(dim, 0.0, Q0Kind::Constant { c }, BoxDomain::unit(dim)?)?;
        s.increments = false;
        Ok(s)
    }

    pub fn with_increments(mut self, on: bool) -> Self {
        self.increments = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn q0_kind(&self) -> Q0Kind {
        self.q0
    }

    pub fn q0(&self) -> f64 {
        self.q0.value()
    }

    pub fn has_increments(&self) -> bool {
        self.increments
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Support radius `e^{-(t0 + k)}` of `Q_k`.
    pub fn level_radius(&self, k: usize) -> f64 {
        (-(self.t0 + k as f64)).exp()
    }

    /// `Q_k(r)` for `k >= 1` from the cached profile.
    pub fn increment(&self, k: usize, r: f64) -> f64 {
        if !self.increments || k == 0 {
            return 0.0;
        }
        profile(self.dim, (self.t0 + k as f64).exp() * r)
    }

    /// `K_n(r) = Q_0 + sum_{k <= n} Q_k(r)`.
    pub fn partial(&self, n: usize, r: f64) -> f64 {
        let mut acc = self.q0();
        if !self.increments {
            return acc;
        }
        let mut scale = (self.t0 + 1.0).exp();
        for _ in 1..=n {
            let s = scale * r;
            if s >= 1.0 {
                break;
            }
            acc += profile(self.dim, s);
            scale *= std::f64::consts::E;
        }
        acc
    }

    /// `int_a^b K_n(|v|) dv` in d = 1, from the closed-form antiderivative of the profile.
    pub fn partial_integral_1d(&self, n: usize, a: f64, b: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut acc = self.q0() * (b - a);
        if !self.increments {
            return acc;
        }
        let near = if a.signum() != b.signum() {
            0.0
        } else {
            a.abs().min(b.abs())
        };
        let odd = |lam: f64, x: f64| x.signum() * profile_antiderivative_1d(lam * x.abs()) / lam;
        let mut lam = (self.t0 + 1.0).exp();
        for _ in 1..=n {
            if near * lam >= 1.0 {
                break;
            }
            acc += odd(lam, b) - odd(lam, a);
            lam *= std::f64::consts::E;
        }
        acc
    }

    /// Number of levels after which every `Q_k(r)` vanishes.
    pub fn levels_for(&self, r: f64) -> usize {
        ((1.0 / r).ln() - self.t0).ceil().max(0.0) as usize + 2
    }

    /// `K(r)` for `r > 0`.
    pub fn full(&self, r: f64) -> f64 {
        self.partial(self.levels_for(r), r)
    }

    /// `int_{R^d} Q_k`.
    pub fn level_mass(&self, k: usize) -> f64 {
        self.levels_mass(k, Some(k))
    }

    /// Total mass of levels `from..=to` (unbounded when `to` is `None`).
    pub fn levels_mass(&self, from: usize, to: Option<usize>) -> f64 {
        if !self.increments || to.is_some_and(|t| t < from) {
            return 0.0;
        }
        let d = self.dim as f64;
        let from = from.max(1) as f64;
        let head = (-d * (self.t0 + from)).exp();
        let tail = to.map_or(0.0, |t| (-d * (self.t0 + t as f64 + 1.0)).exp());
        kappa_mass(self.dim) * (head - tail) / d
    }
}

/// `int_{R^d} kappa(|x|) dx = |B| / 2^d`.
pub fn kappa_mass(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        PI / 4.0
    }
}

fn kappa_unchecked(dim: usize, r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else if dim == 1 {
        1.0 - r
    } else {
        (2.0 * r.acos() - 2.0 * r * (1.0 - r * r).sqrt()) / PI
    }
}

/// Normalized overlap volume `|B(0,1) ∩ B(2r e_1, 1)| / |B(0,1)|`.
pub fn kappa(r: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    if !(r >= 0.0) {
        return Err(argument(format!("kappa needs r >= 0, got {r}")));
    }
    Ok(kappa_unchecked(dim, r))
}

/// `q(s) = int_0^1 kappa(e^t s) dt`, by closed form (d = 1) or Gauss–Legendre (d = 2).
fn profile_exact(dim: usize, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let top = (-s.ln()).min(1.0);
    if dim == 1 {
        return top - s * (top.exp() - 1.0);
    }
    // t = top (1 - v^2) smooths the (1 - r)^{3/2} edge of kappa at t = top.
    GaussLegendre::order64().integrate(0.0, 1.0, |v| {
        let t = top * (1.0 - v * v);
        kappa_unchecked(2, t.exp() * s) * 2.0 * top * v
    })
}

/// `G(s) = int_0^s q(x) dx` for the d = 1 profile.
fn profile_antiderivative_1d(s: f64) -> f64 {
    const INV_E: f64 = 1.0 / std::f64::consts::E;
    if s <= INV_E {
        s - (std::f64::consts::E - 1.0) * s * s / 2.0
    } else {
        let s = s.min(1.0);
        -0.5 * INV_E - s * s.ln() + s * s / 2.0
    }
}

const PROFILE_BITS: u32 = 16;

fn profile_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 1usize << PROFILE_BITS;
        (0..=n).map(|i| profile_exact(2, i as f64 / n as f64)).collect()
    })
}

fn profile(dim: usize, s: f64) -> f64 {
    if dim == 1 || s <= 0.0 || s >= 1.0 {
        return profile_exact(dim, s);
    }
    let table = profile_table();
    let x = s * (1u64 << PROFILE_BITS) as f64;
    let i = x as usize;
    let f = x - i as f64;
    table[i] + f * (table[i + 1] - table[i])
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0) || r.is_infinite() {
        return Err(argument(format!("radius must be finite and >= 0, got {r}")));
    }
    Ok(())
}

/// `Q_n(r) = int_{t0+n}^{t0+n+1} kappa(e^t r) dt`, evaluated without the interpolation table.
pub fn q_n(spec: &KernelSpec, n: usize, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(argument("increment index n must be >= 1"));
    }
    check_r(r)?;
    if !spec.increments {
        return Ok(0.0);
    }
    Ok(profile_exact(spec.dim, (spec.t0 + n as f64).exp() * r))
}

/// `K_n(r)`.
pub fn k_partial(spec: &KernelSpec, n: usize, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(spec.partial(n, r))
}

/// `K(r)`; diverges on the diagonal, so `r = 0` is a domain error.
pub fn k_exact(spec: &KernelSpec, r: f64) -> Result<f64> {
    check_r(r)?;
    if r == 0.0 {
        return Err(domain("K diverges on the diagonal; use the mollified kernel"));
    }
    Ok(spec.full(r))
}

/// Tensor midpoint rule for the double convolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointRule {
    /// Nodes across the support of the narrower mollifier, per axis.
    pub nodes: usize,
    /// Levels whose support radius is at least `resolve` node spacings are summed on the nodes;
    /// finer levels enter through their mass times the overlap density of the two mollifiers.
    pub resolve: f64,
}

impl Default for MidpointRule {
    fn default() -> Self {
        Self {
            nodes: 32,
            resolve: 4.0,
        }
    }
}

impl MidpointRule {
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            resolve: self.resolve,
        }
    }

    pub fn id(&self) -> String {
        format!("midpoint-{}-resolve-{}", self.nodes, self.resolve)
    }
}

/// Precomputed quadrature for the stationary covariance
/// `E[(theta_a * Y)(x) (theta_b * Y)(y)]` as a function of `x - y`.
///
/// A side without a mollifier is a point evaluation.
#[derive(Debug, Clone)]
pub struct MollifiedCovariance {
    spec: KernelSpec,
    delta: f64,
    /// Lattice points per axis of the difference lattice; `u_m = (m - half) delta`.
    side: usize,
    half: f64,
    phi: Vec<f64>,
    resolved: usize,
    tail_mass: f64,
}

fn side_nodes(theta: &MollifierSpec, eps: Option<f64>, delta: f64) -> (usize, Vec<f64>) {
    let dim = theta.dim();
    let Some(eps) = eps else {
        return (1, vec![1.0]);
    };
    let n = ((2.0 * eps / delta) - 1e-9).ceil().max(1.0) as usize;
    let c = (n as f64 - 1.0) / 2.0;
    let coord = |i: usize| (i as f64 - c) * delta;
    let mut w = Vec::with_capacity(n.pow(dim as u32));
    if dim == 1 {
        for i in 0..n {
            w.push(theta.radial(coord(i).abs() / eps));
        }
    } else {
        for j in 0..n {
            for i in 0..n {
                w.push(theta.radial(coord(i).hypot(coord(j)) / eps));
            }
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    (n, w)
}

/// Full linear cross-correlation `phi[m] = sum_{i - j = m - (n2 - 1)} a[i] b[j]` on d-dim tensors.
fn cross_correlate(dim: usize, a: &[f64], n1: usize, b: &[f64], n2: usize) -> Vec<f64> {
    let side = n1 + n2 - 1;
    if dim == 1 {
        let mut out = vec![0.0; side];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[i + n2 - 1 - j] += ai * bj;
            }
        }
        return out;
    }
    let m = crate::fft::fast_size(side);
    let fft = TorusFft::new(m, 2);
    let embed = |src: &[f64], n: usize, flip: bool| {
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        for y in 0..n {
            for x in 0..n {
                let (tx, ty) = if flip { (n - 1 - x, n - 1 - y) } else { (x, y) };
                buf[tx + ty * m] = Complex64::new(src[x + y * n], 0.0);
            }
        }
        buf
    };
    let mut fa = embed(a, n1, false);
    let mut fb = embed(b, n2, true);
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    // inverse via conjugation
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| (x * y).conj()).collect();
    fft.forward(&mut prod);
    let scale = 1.0 / (m * m) as f64;
    let mut out = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            out[x + y * side] = prod[x + y * m].re * scale;
        }
    }
    out
}

impl MollifiedCovariance {
    /// `levels = None` uses the full kernel `K`; `Some(n)` uses `K_n`.
    pub fn new(
        spec: &KernelSpec,
        theta: &MollifierSpec,
        eps_a: Option<f64>,
        eps_b: Option<f64>,
        levels: Option<usize>,
        rule: MidpointRule,
    ) -> Result<Self> {
        if theta.dim() != spec.dim {
            return Err(argument("mollifier and kernel dimensions differ"));
        }
        for e in [eps_a, eps_b].into_iter().flatten() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(argument(format!("eps must lie in (0, 1], got {e}")));
            }
        }
        let narrow = match (eps_a, eps_b) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(argument("at least one side must be mollified")),
        };
        if rule.nodes < 2 {
            return Err(argument("midpoint rule needs at least two nodes"));
        }
        let delta = 2.0 * narrow / rule.nodes as f64;
        let (n1, wa) = side_nodes(theta, eps_a, delta);
        let (n2, wb) = side_nodes(theta, eps_b, delta);
        let phi = cross_correlate(spec.dim, &wa, n1, &wb, n2);
        let side = n1 + n2 - 1;
        let finest = (-(rule.resolve * delta).ln() - spec.t0).floor().max(0.0) as usize;
        let resolved = levels.map_or(finest, |n| n.min(finest));
        let tail_mass = spec.levels_mass(resolved + 1, levels);
        Ok(Self {
            spec: spec.clone(),
            delta,
            side,
            half: (side as f64 - 1.0) / 2.0,
            phi,
            resolved,
            tail_mass,
        })
    }

    /// Number of levels summed on the nodes.
    pub fn resolved_levels(&self) -> usize {
        self.resolved
    }

    /// Covariance at displacement `x - y`.
    pub fn eval(&self, disp: &[f64]) -> f64 {
        let spec = &self.spec;
        let mut main = 0.0;
        if spec.dim == 1 {
            // product integration: exact cell averages of K_n against the lattice weights
            let h = 0.5 * self.delta;
            for (m, &w) in self.phi.iter().enumerate() {
                if w != 0.0 {
                    let c = disp[0] - (m as f64 - self.half) * self.delta;
                    main += w * spec.partial_integral_1d(self.resolved, c - h, c + h) / self.delta;
                }
            }
        } else {
            for my in 0..self.side {
                let uy = disp[1] - (my as f64 - self.half) * self.delta;
                let row = &self.phi[my * self.side..(my + 1) * self.side];
                for (mx, &w) in row.iter().enumerate() {
                    if w != 0.0 {
                        let ux = disp[0] - (mx as f64 - self.half) * self.delta;
                        main += w * spec.partial(self.resolved, ux.hypot(uy));
                    }
                }
            }
        }
        if self.tail_mass > 0.0 {
            main += self.tail_mass * self.overlap_density(disp);
        }
        main
    }

    /// Density of the difference of the two mollifier variables at `disp`, interpolated on the lattice.
    fn overlap_density(&self, disp: &[f64]) -> f64 {
        let n = self.side;
        let coord = |x: f64| x / self.delta + self.half;
        let at = |ix: isize, iy: isize| -> f64 {
            if ix < 0 || iy < 0 || ix as usize >= n || iy as usize >= n {
                0.0
            } else {
                self.phi[ix as usize + iy as usize * n]
            }
        };
        let vol = self.delta.powi(self.spec.dim as i32);
        let gx = coord(disp[0]);
        let ix = gx.floor();
        let fx = gx - ix;
        let ix = ix as isize;
        if self.spec.dim == 1 {
            return ((1.0 - fx) * at(ix, 0) + fx * at(ix + 1, 0)) / vol;
        }
        let gy = coord(disp[1]);
        let iy = gy.floor();
        let fy = gy - iy;
        let iy = iy as isize;
        let lo = (1.0 - fx) * at(ix, iy) + fx * at(ix + 1, iy);
        let hi = (1.0 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1);
        ((1.0 - fy) * lo + fy * hi) / vol
    }
}

fn check_pair(eps: f64, eps2: f64) -> Result<()> {
    if !(eps2 > 0.0 && eps2 <= eps && eps <= 1.0) {
        return Err(argument(format!(
            "need 0 < eps' <= eps <= 1, got eps = {eps}, eps' = {eps2}"
        )));
    }
    Ok(())
}

/// `K_{eps,eps'}(x, y) = ∬ theta_eps(x - z1) theta_eps'(y - z2) K(z1, z2)`.
pub fn k_mollified(
    spec: &KernelSpec,
    theta: &MollifierSpec,
    eps: f64,
    eps2: f64,
    x: &[f64],
    y: &[f64],
    rule: MidpointRule,
) -> Result<f64> {
    check_pair(eps, eps2)?;
    if x.len() != spec.dim || y.len() != spec.dim {
        return Err(argument("point dimension does not match the kernel"));
    }
    if !shrink_domain(&spec.domain, eps).contains(x) {
        return Err(domain(format!("x = {x:?} is outside D_eps for eps = {eps}")));
    }
    if !shrink_domain(&spec.domain, eps2).contains(y) {
        return Err(domain(format!("y = {y:?} is outside D_eps for eps = {eps2}")));
    }
    let cov = MollifiedCovariance::new(spec, theta, Some(eps), Some(eps2), None, rule)?;
    let disp: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(cov.eval(&disp))
}

/// Covariance values on a grid, defined for `x_i` in `D_eps` and `x_j` in `D_eps'`.
#[derive(Debug, Clone)]
pub struct MollifiedKernelTable {
    pub eps: f64,
    pub eps2: f64,
    /// `Some(n)` when built from `K_n` rather than `K`.
    pub levels: Option<usize>,
    pub rule: MidpointRule,
    pub grid_hash: String,
    n: usize,
    values: Vec<f64>,
    spec: KernelSpec,
}

/// JSON sidecar describing an exported table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSidecar {
    pub d: usize,
    pub t0: f64,
    pub q0_kind: Q0Kind,
    pub eps: f64,
    pub eps_prime: f64,
    pub levels: Option<usize>,
    pub quadrature: String,
    pub grid_hash: String,
}

impl MollifiedKernelTable {
    pub fn compute(
        spec: &KernelSpec,
        theta: &MollifierSpec,
        grid: &Grid,
        eps: f64,
        eps2: f64,
        levels: Option<usize>,
        rule: MidpointRule,
    ) -> Result<Self> {
        check_pair(eps, eps2)?;
        if grid.dim() != spec.dim {
            return Err(argument("grid and kernel dimensions differ"));
        }
        let cov = MollifiedCovariance::new(spec, theta, Some(eps), Some(eps2), levels, rule)?;
        let n = grid.len();
        let rows = grid.interior(eps);
        let cols = grid.interior(eps2);
        let mut values = vec![f64::NAN; n * n];
        let lattice = matches!(grid.layout(), Layout::Uniform { .. });
        let mut cache: HashMap<[isize; 2], f64> = HashMap::new();
        for &i in &rows {
            for &j in &cols {
                let disp: Vec<f64> = grid.point(i).iter().zip(grid.point(j)).map(|(a, b)| a - b).collect();
                let v = if lattice {
                    let [ax, ay] = grid.lattice_index(i).expect("uniform");
                    let [bx, by] = grid.lattice_index(j).expect("uniform");
                    let dx = (ax as isize - bx as isize).abs();
                    let dy = (ay as isize - by as isize).abs();
                    let key = [dx.min(dy), dx.max(dy)];
                    *cache.entry(key).or_insert_with(|| cov.eval(&disp))
                } else {
                    cov.eval(&disp)
                };
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("non-finite covariance at ({i}, {j})")));
                }
                values[i * n + j] = v;
            }
        }
        Ok(Self {
            eps,
            eps2,
            levels,
            rule,
            grid_hash: grid.hash(),
            n,
            values,
            spec: spec.clone(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.n + j];
        (!v.is_nan()).then_some(v)
    }

    /// Defined entries as `(i, j, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(move |(k, &v)| (k / self.n, k % self.n, v))
    }

    pub fn sidecar(&self) -> TableSidecar {
        TableSidecar {
            d: self.spec.dim,
            t0: self.spec.t0,
            q0_kind: self.spec.q0,
            eps: self.eps,
            eps_prime: self.eps2,
            levels: self.levels,
            quadrature: self.rule.id(),
            grid_hash: self.grid_hash.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(["x_index", "y_index", "value"])?;
        for (i, j, v) in self.entries() {
            w.write_record([i.to_string(), j.to_string(), fmt_f64(v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn export(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        write_json(&dir.join(format!("{stem}.json")), &self.sidecar())
    }
}

/// Which Gram matrix `pd_check` assembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramLevel {
    Increment(usize),
    Partial(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdReport {
    pub min_eigenvalue: f64,
    pub trace: f64,
    /// Minimum real part of the DFT of `kappa(|x|)` sampled on a periodized lattice.
    pub fourier_min: f64,
}

impl PdReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.min_eigenvalue >= -rel_tol * self.trace.abs() && self.fourier_min >= -rel_tol
    }
}

/// Gram matrix `[K(x_i, x_j)]` of the chosen level on the grid.
pub fn gram_matrix(spec: &KernelSpec, grid: &Grid, level: GramLevel) -> Result<DMatrix<f64>> {
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let r = grid.distance(i, j);
            let v = match level {
                GramLevel::Increment(k) => spec.increment(k, r),
                GramLevel::Partial(k) => spec.partial(k, r),
            };
            if !v.is_finite() {
                return Err(Error::Numeric(format!("kernel value at ({i}, {j}) is not finite")));
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Minimum eigenvalue of the Gram matrix plus the spectrum minimum of sampled `kappa`.
pub fn pd_check(spec: &KernelSpec, grid: &Grid, level: GramLevel) -> Result<PdReport> {
    if grid.len() < 2 {
        return Err(argument("pd_check needs at least two grid points"));
    }
    let gram = gram_matrix(spec, grid, level)?;
    let trace = gram.trace();
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let side = grid.uniform_params().map_or(grid.len(), |(c, _)| c);
    Ok(PdReport {
        min_eigenvalue,
        trace,
        fourier_min: kappa_spectrum_min(spec.dim, side),
    })
}

/// Samples `kappa(|x|)` on an `n^d` torus of side 4 (support fits without wrap-around) and
/// returns the smallest real part of its DFT.
pub fn kappa_spectrum_min(dim: usize, n: usize) -> f64 {
    let fft = TorusFft::new(n, dim);
    let step = 4.0 / n as f64;
    let wrap = |j: usize| crate::fft::signed_freq(j, n) as f64 * step;
    let mut buf: Vec<Complex64> = (0..fft.len())
        .map(|idx| {
            let r = if dim == 1 {
                wrap(idx).abs()
            } else {
                wrap(idx % n).hypot(wrap(idx / n))
            };
            Complex64::new(kappa_unchecked(dim, r), 0.0)
        })
        .collect();
    fft.forward(&mut buf);
    buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn ref1() -> KernelSpec {
        KernelSpec::reference(1).unwrap()
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(0.0, 1).unwrap(), 1.0);
        assert_eq!(kappa(1.5, 2).unwrap(), 0.0);
        assert!((kappa(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(kappa(-0.1, 1).is_err());
        assert!(kappa(0.1, 3).is_err());
    }

    #[test]
    fn kappa_d2_matches_disc_overlap() {
        // Oracle: midpoint count of the lens |B(0,1) ∩ B((1,0),1)| on a 2000^2 lattice.
        let n = 2000;
        let h = 2.0 / n as f64;
        let mut hits = 0usize;
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -1.0 + (j as f64 + 0.5) * h;
                if x * x + y * y < 1.0 && (x - 1.0) * (x - 1.0) + y * y < 1.0 {
                    hits += 1;
                }
            }
        }
        let oracle = hits as f64 * h * h / PI;
        let v = kappa(0.5, 2).unwrap();
        assert!((v - oracle).abs() < 1e-4, "{v} vs {oracle}");
        assert!((v - 0.39100).abs() < 1e-5);
    }

    #[test]
    fn q_n_examples() {
        let s = ref1();
        assert_eq!(q_n(&s, 3, 0.0).unwrap(), 1.0);
        assert_eq!(q_n(&s, 3, 0.1).unwrap(), 0.0);
        assert!((q_n(&s, 1, (-2.0f64).exp()).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
        assert!(q_n(&s, 0, 0.1).is_err());
    }

    #[test]
    fn q_n_d1_closed_form_matches_quadrature() {
        let s = ref1();
        for &r in &[0.001, 0.01, 0.05, 0.1, 0.2, 0.3] {
            for n in 1..4 {
                let brute = GaussLegendre::order64()
                    .integrate_composite(n as f64, n as f64 + 1.0, 64, |t| kappa_unchecked(1, t.exp() * r));
                assert!((q_n(&s, n, r).unwrap() - brute).abs() < 1e-6, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn d2_table_agrees_with_direct_quadrature() {
        for i in 0..2000 {
            let s = (i as f64 + 0.37) / 2000.0;
            let a = profile(2, s);
            let b = profile_exact(2, s);
            assert!((a - b).abs() < 1e-9, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn d2_profile_against_brute_force() {
        // composite GL on the raw t-integral, many panels to swamp the edge singularity
        for &s in &[0.05f64, 0.2, 0.36, 0.5, 0.9] {
            let top = (-s.ln()).min(1.0);
            let brute = GaussLegendre::new(20).integrate_composite(0.0, top, 2000, |t| kappa_unchecked(2, t.exp() * s));
            assert!((profile_exact(2, s) - brute).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn k_partial_examples() {
        let s = ref1();
        assert_eq!(k_partial(&s, 5, 0.0).unwrap(), 5.0);
        assert_eq!(k_partial(&s, 0, 0.3).unwrap(), 0.0);
        let r = (-3.0f64).exp();
        let expect = 1.0 + (-2.0f64).exp();
        assert!((k_partial(&s, 10, r).unwrap() - expect).abs() < 1e-12);
        let by_levels: f64 = (1..=10).map(|n| q_n(&s, n, r).unwrap()).sum();
        assert!((by_levels - expect).abs() < 1e-12);
    }

    #[test]
    fn k_exact_examples() {
        let s = ref1();
        assert!((k_exact(&s, (-3.0f64).exp()).unwrap() - 1.135_335_283_236_612_7).abs() < 1e-12);
        assert_eq!(k_exact(&s, 1.0).unwrap(), 0.0);
        assert!(matches!(k_exact(&s, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn k_exact_closed_form_d1() {
        let s = ref1();
        for i in 1..=200 {
            let r = i as f64 / 200.0 / E;
            let closed = (1.0 / r).ln() - 2.0 + E * r;
            assert!((k_exact(&s, r).unwrap() - closed).abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn k_exact_d2_offset_converges() {
        // The offset K(r) - log(1/r) approaches its diagonal limit at rate O(r):
        // c(r) = c2 + (4e/pi) r + O(r^2), from the slope of kappa at 0 in d = 2.
        let s = KernelSpec::reference(2).unwrap();
        let off = |t: f64| k_exact(&s, (-t).exp()).unwrap() - t;
        let slope = 4.0 * E / PI;
        let c4 = off(4.0) - slope * (-4.0f64).exp();
        let c8 = off(8.0) - slope * (-8.0f64).exp();
        assert!((c4 - c8).abs() < 0.01, "{c4} vs {c8}");
        let c12 = off(12.0) - slope * (-12.0f64).exp();
        assert!((c8 - c12).abs() < 1e-4);
    }

    #[test]
    fn level_masses_sum() {
        for dim in [1, 2] {
            let s = KernelSpec::reference(dim).unwrap();
            let parts: f64 = (1..60).map(|k| s.level_mass(k)).sum();
            assert!((parts - s.levels_mass(1, None)).abs() < 1e-15);
        }
        // d = 1: int_0^infinity-level sum = 2 int_0^{1/e} K(r) dr
        let s = ref1();
        let direct = 2.0 * GaussLegendre::order64().integrate_composite(0.0, 1.0 / E, 40, |r| s.full(r));
        assert!((direct - 1.0 / E).abs() < 1e-4, "{direct}");
    }

    #[test]
    fn constant_kernel_mollifies_to_constant() {
        let s = KernelSpec::constant(1, 0.7).unwrap();
        let th = MollifierSpec::standard(1).unwrap();
        let v = k_mollified(&s, &th, 0.1, 0.05, &[0.4], &[0.55], MidpointRule::default()).unwrap();
        assert!((v - 0.7).abs() < 1e-14);
    }

    #[test]
    fn k_mollified_argument_errors() {
        let s = ref1();
        let th = MollifierSpec::standard(1).unwrap();
        let r = MidpointRule::default();
        assert!(matches!(
            k_mollified(&s, &th, 0.05, 0.1, &[0.5], &[0.5], r),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            k_mollified(&s, &th, 0.1, 0.1, &[0.1], &[0.5], r),
            Err(Error::Domain(_))
        ));
    }

    /// Independent oracle for x = y, eps = eps': int rho(u) K(|u|) du with rho the density of the
    /// difference of two theta_eps variables, using K's d = 1 closed form.
    fn diagonal_oracle(eps: f64) -> f64 {
        let th = MollifierSpec::standard(1).unwrap();
        let gl = GaussLegendre::new(40);
        let rho = |u: f64| {
            gl.integrate_composite(-eps + u, eps, 16, |a| {
                th.radial_eps(eps, a.abs()) * th.radial_eps(eps, (a - u).abs())
            })
        };
        let k = |u: f64| (1.0 / u).ln() - 2.0 + E * u;
        // geometric panels toward the log singularity
        let mut total = 0.0;
        let mut hi = 2.0 * eps;
        for _ in 0..60 {
            let lo = hi / 2.0;
            total += gl.integrate(lo, hi, |u| rho(u) * k(u));
            hi = lo;
        }
        2.0 * total
    }

    #[test]
    fn k_mollified_diagonal_matches_oracle() {
        let s = ref1();
        let th = MollifierSpec::standard(1).unwrap();
        for eps in [1.0 / 32.0, 1.0 / 128.0] {
            let oracle = diagonal_oracle(eps);
            let v = k_mollified(&s, &th, eps, eps, &[0.5], &[0.5], MidpointRule::default()).unwrap();
            assert!((v - oracle).abs() < 1e-3, "eps={eps}: {v} vs {oracle}");
            let fine = k_mollified(&s, &th, eps, eps, &[0.5], &[0.5], MidpointRule::default().refined()).unwrap();
            assert!((fine - oracle).abs() < (v - oracle).abs().max(1e-6));
        }
    }

    #[test]
    fn k_mollified_far_apart_reduces_to_k() {
        // separation well beyond both supports: K is smooth there so the mollified value is close
        let s = ref1();
        let th = MollifierSpec::standard(1).unwrap();
        let mut last = f64::INFINITY;
        for k in 3..=8 {
            let eps = 2f64.powi(-k);
            let v = k_mollified(&s, &th, eps, eps, &[0.45], &[0.55], MidpointRule::default()).unwrap();
            let err = (v - s.full(0.1)).abs();
            assert!(err < last, "k={k}");
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn single_side_matches_direct_convolution() {
        let s = ref1();
        let th = MollifierSpec::standard(1).unwrap();
        let eps = 0.05;
        let cov = MollifiedCovariance::new(&s, &th, Some(eps), None, Some(3), MidpointRule::default()).unwrap();
        let gl = GaussLegendre::new(40);
        for &d in &[0.0, 0.02, 0.07] {
            let direct = gl.integrate_composite(-eps, eps, 200, |a| {
                th.radial_eps(eps, a.abs()) * s.partial(3, (d - a).abs())
            });
            assert!((cov.eval(&[d]) - direct).abs() < 1e-3, "d={d}");
        }
    }

    #[test]
    fn table_export_and_symmetry() {
        let s = ref1();
        let th = MollifierSpec::standard(1).unwrap();
        let g = Grid::uniform(BoxDomain::unit(1).unwrap(), 64).unwrap();
        let t =
            MollifiedKernelTable::compute(&s, &th, &g, 1.0 / 16.0, 1.0 / 16.0, None, MidpointRule::default()).unwrap();
        let inside = g.interior(1.0 / 16.0);
        for &i in &inside {
            assert!(t.get(i, i).unwrap().is_finite());
            for &j in &inside {
                assert_eq!(t.get(i, j), t.get(j, i));
            }
        }
        assert!(t.get(0, 0).is_none());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x_index,y_index,value\r\n"));
        assert_eq!(text.lines().count(), 1 + inside.len() * inside.len());
        let side = serde_json::to_value(t.sidecar()).unwrap();
        assert_eq!(side["d"], 1);
        assert_eq!(side["grid_hash"], g.hash());
    }

    #[test]
    fn d1_cell_integrals_match_quadrature() {
        let s = ref1();
        let gl = GaussLegendre::order64();
        for (a, b) in [(-0.3, 0.2), (0.01, 0.05), (-0.2, -0.001), (0.0, 1.0)] {
            // split at the kinks of K_4 so composite GL converges
            let mut cuts = vec![a, b];
            for k in 1..=4 {
                let r = s.level_radius(k);
                for c in [r, -r, r / E, -r / E, 0.0] {
                    if c > a && c < b {
                        cuts.push(c);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            let direct: f64 = cuts
                .windows(2)
                .map(|w| gl.integrate_composite(w[0], w[1], 8, |v| s.partial(4, v.abs())))
                .sum();
            assert!((s.partial_integral_1d(4, a, b) - direct).abs() < 1e-12, "[{a}, {b}]");
        }
    }

    #[test]
    fn pd_examples() {
        assert!(kappa_spectrum_min(1, 256) >= -1e-8);
        let c = KernelSpec::constant(1, 2.0).unwrap();
        let small = Grid::uniform(BoxDomain::unit(1).unwrap(), 16).unwrap();
        let rep = pd_check(&c, &small, GramLevel::Partial(3)).unwrap();
        assert!(rep.min_eigenvalue >= -1e-10 * rep.trace);
        let g64 = Grid::uniform(BoxDomain::unit(1).unwrap(), 64).unwrap();
        let rep = pd_check(&ref1(), &g64, GramLevel::Increment(3)).unwrap();
        assert!(rep.passes(1e-8), "{rep:?}");
    }

    #[test]
    fn kappa_spectrum_d2_nonnegative() {
        assert!(kappa_spectrum_min(2, 64) >= -1e-8);
    }
}
