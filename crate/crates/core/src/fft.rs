//! Forward FFTs on square d-dimensional tori (d = 1, 2).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// A planned forward transform on an `n^d` periodic lattice stored row-major (axis 0 fastest).
#[derive(Clone)]
pub struct TorusFft {
    n: usize,
    dim: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusFft")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl TorusFft {
    pub fn new(n: usize, dim: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(n);
        Self { n, dim, plan }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn side(&self) -> usize {
        self.n
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len());
        self.plan.process(buf);
        if self.dim == 2 {
            transpose(buf, self.n);
            self.plan.process(buf);
            transpose(buf, self.n);
        }
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed frequency index of bin `j` on a torus of side `n`.
pub fn signed_freq(j: usize, n: usize) -> isize {
    if j <= n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

/// Smallest `m >= target` of the form `2^a 3^b 5^c`.
pub fn fast_size(target: usize) -> usize {
    let mut m = target.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_transforms_to_constant() {
        let f = TorusFft::new(8, 2);
        let mut buf = vec![Complex64::new(0.0, 0.0); 64];
        buf[0] = Complex64::new(1.0, 0.0);
        f.forward(&mut buf);
        assert!(buf.iter().all(|c| (c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15));
    }

    #[test]
    fn plane_wave_2d_hits_single_bin() {
        let n = 16;
        let f = TorusFft::new(n, 2);
        let mut buf: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (x, y) = (idx % n, idx / n);
                let ph = 2.0 * std::f64::consts::PI * (3.0 * x as f64 + 5.0 * y as f64) / n as f64;
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        f.forward(&mut buf);
        let peak = 3 + 5 * n;
        for (i, c) in buf.iter().enumerate() {
            let expect = if i == peak { (n * n) as f64 } else { 0.0 };
            assert!((c.norm() - expect).abs() < 1e-9, "bin {i}");
        }
    }

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(1), 1);
        assert_eq!(fast_size(7), 8);
        assert_eq!(fast_size(31), 32);
        assert_eq!(fast_size(121), 125);
        assert_eq!(signed_freq(5, 8), -3);
    }
}
