use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft::{fast_size, TorusFft};
use crate::grid::Grid;
use crate::kernels::KernelSpec;

/// Square root of one increment's covariance on the grid.
#[derive(Debug, Clone)]
pub(crate) enum LevelFactor {
    /// The increment vanishes identically (kernel without increments).
    Zero,
    /// Grid points are farther apart than the support: the Gram matrix is the identity.
    White,
    /// Transposed lower Cholesky factor, so that row `i` of `L` is a contiguous column.
    Dense(DMatrix<f64>),
    Circulant(Circulant),
}

#[derive(Debug, Clone)]
pub(crate) struct Circulant {
    fft: TorusFft,
    cells: usize,
    dim: usize,
    /// `sqrt(lambda_j / M^d)` for the embedded eigenvalues.
    scale: Vec<f64>,
}

const JITTER_ESCALATIONS: usize = 3;

/// Transposed Cholesky factor with diagonal jitter `1e-10 trace / N`, escalated tenfold on failure.
pub(crate) fn dense_factor(gram: DMatrix<f64>, level: usize) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    if let Some(c) = Cholesky::new(gram.clone()) {
        return Ok(c.unpack().transpose());
    }
    let base = 1e-10 * gram.trace() / n as f64;
    let mut jitter = base;
    for _ in 0..JITTER_ESCALATIONS {
        let mut g = gram.clone();
        for i in 0..n {
            g[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(g) {
            return Ok(c.unpack().transpose());
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization {
        level,
        escalations: JITTER_ESCALATIONS,
    })
}

impl Circulant {
    /// Exact embedding of `Q_k` on a uniform grid: the torus is large enough that the
    /// support never wraps onto itself, so the circulant is the sampled positive definite function.
    pub(crate) fn new(spec: &KernelSpec, k: usize, grid: &Grid) -> Result<Self> {
        let (cells, h) = grid.uniform_params().expect("circulant backend needs a uniform grid");
        let dim = grid.dim();
        let reach = (spec.level_radius(k) / h).ceil() as usize;
        let m = fast_size((cells + reach + 1).max(2 * reach + 2));
        let fft = TorusFft::new(m, dim);
        let wrap = |j: usize| j.min(m - j) as f64 * h;
        let mut buf: Vec<Complex64> = (0..fft.len())
            .map(|idx| {
                let r = if dim == 1 {
                    wrap(idx)
                } else {
                    wrap(idx % m).hypot(wrap(idx / m))
                };
                Complex64::new(spec.increment(k, r), 0.0)
            })
            .collect();
        fft.forward(&mut buf);
        let top = buf.iter().map(|c| c.re).fold(0.0, f64::max);
        let low = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if low < -1e-8 * top {
            return Err(Error::Numeric(format!(
                "circulant embedding of level {k} has eigenvalue {low:e} (max {top:e})"
            )));
        }
        let norm = fft.len() as f64;
        let scale = buf.iter().map(|c| (c.re.max(0.0) / norm).sqrt()).collect();
        Ok(Self { fft, cells, dim, scale })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        self.fft.forward(&mut buf);
        let m = self.fft.side();
        if self.dim == 1 {
            for (o, c) in out.iter_mut().zip(&buf) {
                *o = c.re;
            }
        } else {
            for iy in 0..self.cells {
                for ix in 0..self.cells {
                    out[ix + iy * self.cells] = buf[ix + iy * m].re;
                }
            }
        }
    }
}

impl LevelFactor {
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            LevelFactor::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            LevelFactor::White => out.iter_mut().for_each(|o| *o = rng.sample(StandardNormal)),
            LevelFactor::Dense(lt) => {
                let n = out.len();
                let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = lt.column(i).iter().zip(&xi[..=i]).map(|(a, b)| a * b).sum();
                }
            }
            LevelFactor::Circulant(c) => c.draw(rng, out),
        }
    }

    pub(crate) fn kind(&self) -> &'static str {
        match self {
            LevelFactor::Zero => "zero",
            LevelFactor::White => "white",
            LevelFactor::Dense(_) => "dense",
            LevelFactor::Circulant(_) => "circulant",
        }
    }
}
