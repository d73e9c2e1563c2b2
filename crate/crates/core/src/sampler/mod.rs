//! Joint Gaussian samples of increments `Z_k`, partial sums `Y_n` and mollified fields `X_eps`.
//!
//! Mollified fields are convolutions of `Y_N + W` where `N` is the finest level whose lattice
//! covariance still fits under the continuum mass, and `W` is independent white noise that carries
//! the remaining (sub-grid) mass. This keeps `Cov(X_eps, X_eps')` close to the continuum
//! `K_{eps,eps'}` on grids where the finest levels are not resolved.

mod factor;
mod tilt;

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::grid::{Grid, Layout};
use crate::io::write_json;
use crate::kernels::{gram_matrix, GramLevel, KernelSpec};
use crate::mollifier::{convolve_with, grid_stencil, MollifiedField, MollifierSpec, Stencil};
use crate::rng::{replica_rng, Channel};

use factor::{dense_factor, Circulant, LevelFactor};
pub use tilt::{apply_tilt, TiltMeans, TiltShift};

/// How increment covariances are factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense below 512 points in d = 1 (48^2 in d = 2), circulant above on uniform grids.
    #[default]
    Auto,
    Dense,
    Circulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Last level included in the base of the mollified fields.
    pub base_level: usize,
    /// Per-point variance of the white residual.
    pub variance: f64,
}

/// Factorized increment covariances on a grid, reused across replicas.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    spec: KernelSpec,
    grid: Grid,
    n_max: usize,
    levels: Vec<LevelFactor>,
    residual: Option<Residual>,
}

fn is_white(spec: &KernelSpec, k: usize, grid: &Grid) -> bool {
    let radius = spec.level_radius(k);
    match grid.uniform_params() {
        Some((_, h)) => radius <= h,
        None => {
            let n = grid.len();
            (0..n).all(|i| (0..i).all(|j| grid.distance(i, j) >= radius))
        }
    }
}

impl FieldSampler {
    pub fn new(spec: &KernelSpec, grid: &Grid, n_max: usize, backend: Backend) -> Result<Self> {
        if n_max < 1 {
            return Err(argument("n_max must be >= 1"));
        }
        if spec.dim() != grid.dim() {
            return Err(argument("kernel and grid dimensions differ"));
        }
        let uniform = matches!(grid.layout(), Layout::Uniform { .. });
        let use_circulant = match backend {
            Backend::Dense => false,
            Backend::Circulant => {
                if !uniform {
                    return Err(argument("circulant backend needs a uniform grid"));
                }
                true
            }
            Backend::Auto => uniform && grid.len() > if grid.dim() == 1 { 512 } else { 48 * 48 },
        };
        let mut levels = Vec::with_capacity(n_max);
        for k in 1..=n_max {
            let f = if !spec.has_increments() {
                LevelFactor::Zero
            } else if is_white(spec, k, grid) {
                LevelFactor::White
            } else if use_circulant {
                LevelFactor::Circulant(Circulant::new(spec, k, grid)?)
            } else {
                LevelFactor::Dense(dense_factor(gram_matrix(spec, grid, GramLevel::Increment(k))?, k)?)
            };
            levels.push(f);
        }
        let residual = if uniform {
            Some(residual_for(spec, grid, n_max))
        } else {
            None
        };
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            n_max,
            levels,
            residual,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn residual(&self) -> Option<Residual> {
        self.residual
    }

    /// Factorization kind per level, for manifests.
    pub fn level_kinds(&self) -> Vec<&'static str> {
        self.levels.iter().map(LevelFactor::kind).collect()
    }

    /// One replica of the primary field.
    pub fn sample(&self, seed: u64, replica: u64) -> FieldSample {
        self.sample_channel(seed, Channel::Primary, replica)
    }

    /// One replica from a given stream family (the secondary channel gives an independent field).
    pub fn sample_channel(&self, seed: u64, channel: Channel, replica: u64) -> FieldSample {
        let mut rng = replica_rng(seed, channel, replica);
        let n = self.grid.len();
        let c = self.spec.q0();
        let z0 = if c > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            vec![c.sqrt() * g; n]
        } else {
            vec![0.0; n]
        };
        let mut increments = Vec::with_capacity(self.n_max + 1);
        increments.push(z0);
        for f in &self.levels {
            let mut z = vec![0.0; n];
            f.draw(&mut rng, &mut z);
            increments.push(z);
        }
        let mut s = FieldSample {
            seed,
            replica,
            channel,
            grid_hash: self.grid.hash(),
            increments,
            partial: Vec::new(),
            base: None,
            mollified: Vec::new(),
            tilt: None,
        };
        s.rebuild_partials();
        s
    }

    fn residual_rng(&self, sample: &FieldSample) -> ChaCha8Rng {
        let lane = match sample.channel {
            Channel::Secondary => 1,
            _ => 0,
        };
        replica_rng(sample.seed, Channel::Residual, 2 * sample.replica + lane)
    }

    /// Adds `X_eps` for each `eps` to the sample, using mollifier `theta`.
    pub fn mollify(&self, sample: &mut FieldSample, eps: &[f64], theta: &MollifierSpec) -> Result<()> {
        if sample.tilt.is_some() {
            return Err(Error::Consistency("mollify before applying a tilt".into()));
        }
        let residual = self
            .residual
            .ok_or_else(|| argument("mollified fields need a uniform grid"))?;
        if let Some(&emin) = eps.iter().min_by(|a, b| a.total_cmp(b)) {
            let need = self.spec.levels_for(emin);
            if self.n_max < need {
                return Err(argument(format!(
                    "n_max = {} is below ceil(log(1/eps)) + 2 = {need} for eps = {emin}",
                    self.n_max
                )));
            }
        }
        let stencils = eps
            .iter()
            .map(|&e| grid_stencil(theta, e, &self.grid))
            .collect::<Result<Vec<_>>>()?;
        if sample.base.is_none() {
            let mut base = sample.partial[residual.base_level].clone();
            if residual.variance > 0.0 {
                let sd = residual.variance.sqrt();
                let mut rng = self.residual_rng(sample);
                for b in base.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *b += sd * g;
                }
            }
            sample.base = Some(base);
        }
        let base = sample.base.as_ref().expect("base set above");
        for st in &stencils {
            let field = convolve_with(base, st, &self.grid);
            sample.mollified.push(MollifiedLevel {
                profile: theta.name().to_string(),
                field,
            });
        }
        Ok(())
    }

    /// Exact covariance of `X_eps(x_i)` and `X'_eps'(x_j)` on this grid, as a function of the
    /// lattice lag `i - j`.
    pub fn mollified_covariance(
        &self,
        theta: &MollifierSpec,
        eps: f64,
        theta2: &MollifierSpec,
        eps2: f64,
        lag: [isize; 2],
    ) -> Result<f64> {
        let residual = self
            .residual
            .ok_or_else(|| argument("mollified fields need a uniform grid"))?;
        let a = grid_stencil(theta, eps, &self.grid)?;
        let b = grid_stencil(theta2, eps2, &self.grid)?;
        Ok(stencil_covariance(&self.spec, &a, &b, lag, residual))
    }

    /// `K_eps(x) = Var X_eps(x)`, the same at every interior point.
    pub fn mollified_variance(&self, theta: &MollifierSpec, eps: f64) -> Result<f64> {
        self.mollified_covariance(theta, eps, theta, eps, [0, 0])
    }
}

fn stencil_covariance(spec: &KernelSpec, a: &Stencil, b: &Stencil, lag: [isize; 2], res: Residual) -> f64 {
    let h = a.spacing;
    let mut total = 0.0;
    for (oa, wa) in a.offsets.iter().zip(&a.weights) {
        let mut inner = 0.0;
        for (ob, wb) in b.offsets.iter().zip(&b.weights) {
            let dx = lag[0] + oa[0] - ob[0];
            let dy = lag[1] + oa[1] - ob[1];
            let r = h * ((dx * dx + dy * dy) as f64).sqrt();
            let mut c = spec.partial(res.base_level, r);
            if dx == 0 && dy == 0 {
                c += res.variance;
            }
            inner += wb * c;
        }
        total += wa * inner;
    }
    total
}

/// Mass matching for the sub-grid residual: the lattice covariance of `Y_N + W` must carry the
/// continuum mass of all increments.
fn residual_for(spec: &KernelSpec, grid: &Grid, n_max: usize) -> Residual {
    let (_, h) = grid.uniform_params().expect("uniform");
    let dim = grid.dim();
    let cell = h.powi(dim as i32);
    let total = spec.levels_mass(1, None);
    let reach = (spec.level_radius(1) / h).ceil() as isize + 1;
    let lattice_mass = |n: usize| -> f64 {
        let mut acc = 0.0;
        let ys = if dim == 1 { 0..=0 } else { -reach..=reach };
        for jy in ys {
            for jx in -reach..=reach {
                let r = h * ((jx * jx + jy * jy) as f64).sqrt();
                acc += spec.partial(n, r) - spec.q0();
            }
        }
        acc * cell
    };
    let mut best = Residual {
        base_level: 0,
        variance: total / cell,
    };
    for n in 1..=n_max {
        let v = (total - lattice_mass(n)) / cell;
        if v < 0.0 {
            break;
        }
        best = Residual {
            base_level: n,
            variance: v,
        };
    }
    best
}

/// A mollified field tagged with the mollifier profile that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifiedLevel {
    pub profile: String,
    pub field: MollifiedField,
}

/// One joint realization on a grid.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub seed: u64,
    pub replica: u64,
    pub channel: Channel,
    pub grid_hash: String,
    /// `Z_0` (the `Q_0` part, constant in space) through `Z_{n_max}`.
    increments: Vec<Vec<f64>>,
    /// `Y_0` through `Y_{n_max}`.
    partial: Vec<Vec<f64>>,
    base: Option<Vec<f64>>,
    mollified: Vec<MollifiedLevel>,
    tilt: Option<TiltShift>,
}

/// Provenance record written next to exported sample arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub replica: u64,
    pub grid_hash: String,
    pub eps: Vec<f64>,
    pub n_max: usize,
    pub tilt: Option<TiltShift>,
    /// Array order in the binary file (little-endian f64, one array after another).
    pub arrays: Vec<String>,
}

impl FieldSample {
    /// Builds a sample from explicit increments (`Z_0..Z_n`), mainly for tests.
    pub fn from_increments(increments: Vec<Vec<f64>>) -> Result<Self> {
        if increments.is_empty() || increments.iter().any(|z| z.len() != increments[0].len()) {
            return Err(argument("increments must be non-empty and of equal length"));
        }
        let mut s = Self {
            seed: 0,
            replica: 0,
            channel: Channel::Primary,
            grid_hash: String::new(),
            increments,
            partial: Vec::new(),
            base: None,
            mollified: Vec::new(),
            tilt: None,
        };
        s.rebuild_partials();
        Ok(s)
    }

    fn rebuild_partials(&mut self) {
        let mut acc = self.increments[0].clone();
        self.partial.clear();
        self.partial.push(acc.clone());
        for z in &self.increments[1..] {
            for (a, b) in acc.iter_mut().zip(z) {
                *a += b;
            }
            self.partial.push(acc.clone());
        }
    }

    pub fn n_max(&self) -> usize {
        self.increments.len() - 1
    }

    pub fn len(&self) -> usize {
        self.increments[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Z_k`, with `k = 0` the smooth part.
    pub fn z(&self, k: usize) -> &[f64] {
        &self.increments[k]
    }

    /// `Y_n`.
    pub fn y(&self, n: usize) -> &[f64] {
        &self.partial[n]
    }

    /// Mutable partial sum, for synthetic samples in tests and the event checks.
    pub fn y_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.partial[n]
    }

    /// The first mollified field at `eps`, whatever its profile.
    pub fn x(&self, eps: f64) -> Option<&MollifiedField> {
        self.mollified.iter().find(|m| m.field.eps == eps).map(|m| &m.field)
    }

    pub fn x_with(&self, profile: &str, eps: f64) -> Option<&MollifiedField> {
        self.mollified
            .iter()
            .find(|m| m.profile == profile && m.field.eps == eps)
            .map(|m| &m.field)
    }

    /// Inserts a mollified field directly (synthetic samples).
    pub fn push_mollified(&mut self, profile: &str, field: MollifiedField) {
        self.mollified.push(MollifiedLevel {
            profile: profile.to_string(),
            field,
        });
    }

    pub fn mollified(&self) -> &[MollifiedLevel] {
        &self.mollified
    }

    pub fn tilt(&self) -> Option<&TiltShift> {
        self.tilt.as_ref()
    }

    pub fn manifest(&self) -> SampleManifest {
        let mut arrays: Vec<String> = (0..=self.n_max()).map(|k| format!("Y_{k}")).collect();
        arrays.extend(
            self.mollified
                .iter()
                .map(|m| format!("X[{}]_{}", m.profile, m.field.eps)),
        );
        SampleManifest {
            seed: self.seed,
            replica: self.replica,
            grid_hash: self.grid_hash.clone(),
            eps: self.mollified.iter().map(|m| m.field.eps).collect(),
            n_max: self.n_max(),
            tilt: self.tilt.clone(),
            arrays,
        }
    }

    /// Writes `<stem>.bin` (arrays in manifest order, NaN outside `D_eps`) and `<stem>.json`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut bytes = Vec::new();
        let arrays = self
            .partial
            .iter()
            .chain(self.mollified.iter().map(|m| &m.field.values));
        for a in arrays {
            for v in a {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        write_json(&dir.join(format!("{stem}.json")), &self.manifest())
    }
}

/// Streams `replicas` samples for a master seed, in replica order.
pub fn sample_increments(
    spec: &KernelSpec,
    grid: &Grid,
    n_max: usize,
    seed: u64,
    replicas: u64,
) -> Result<impl Iterator<Item = FieldSample>> {
    let sampler = FieldSampler::new(spec, grid, n_max, Backend::Auto)?;
    Ok((0..replicas).map(move |r| sampler.sample(seed, r)))
}

/// Free-function form of [`FieldSampler::mollify`].
pub fn sample_mollified(
    sampler: &FieldSampler,
    sample: &mut FieldSample,
    eps: &[f64],
    theta: &MollifierSpec,
) -> Result<()> {
    sampler.mollify(sample, eps, theta)
}
