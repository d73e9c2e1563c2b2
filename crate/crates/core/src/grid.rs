//! Box domains, shrunken interiors and evaluation grids.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{argument, Result};

/// Axis-aligned box in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || !(1..=2).contains(&lo.len()) {
            return Err(argument(format!(
                "box corners must both have dimension 1 or 2 (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(argument("box must satisfy lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.side(a)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(a, &x)| x >= self.lo[a] && x <= self.hi[a])
    }

    /// Distance from an interior point to the complement of the box.
    pub fn margin(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(a, &x)| (x - self.lo[a]).min(self.hi[a] - x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// The interior `D_eps = { x : dist(x, D^c) > 2 eps }` of a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkenDomain {
    pub eps: f64,
    /// `None` when the margin swallows the box.
    pub inner: Option<BoxDomain>,
}

impl ShrunkenDomain {
    pub fn is_empty(&self) -> bool {
        self.inner.is_none()
    }

    /// Strict membership: points at margin exactly `2 eps` are excluded.
    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.inner {
            None => false,
            Some(b) => p.iter().enumerate().all(|(a, &x)| x > b.lo[a] && x < b.hi[a]),
        }
    }
}

/// Inner box at margin `2 eps`. An empty interior is reported through the result, not as an error.
pub fn shrink_domain(domain: &BoxDomain, eps: f64) -> ShrunkenDomain {
    let m = 2.0 * eps;
    let lo: Vec<f64> = domain.lo.iter().map(|x| x + m).collect();
    let hi: Vec<f64> = domain.hi.iter().map(|x| x - m).collect();
    let inner = if lo.iter().zip(&hi).all(|(a, b)| a < b) {
        Some(BoxDomain { lo, hi })
    } else {
        None
    };
    ShrunkenDomain { eps, inner }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// Cell-centred lattice with `cells` points per axis and square cells of side `spacing`.
    Uniform { cells: usize, spacing: f64 },
    /// Arbitrary point set.
    Scattered,
}

/// Ordered evaluation points with quadrature weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    domain: BoxDomain,
    layout: Layout,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Cell-centred grid with `cells` points per axis on a cube-shaped domain.
    pub fn uniform(domain: BoxDomain, cells: usize) -> Result<Self> {
        if cells < 1 {
            return Err(argument("grid needs at least one cell per axis"));
        }
        let d = domain.dim();
        let side = domain.side(0);
        if (1..d).any(|a| (domain.side(a) - side).abs() > 1e-12 * side) {
            return Err(argument("uniform grids require a cube-shaped domain"));
        }
        let h = side / cells as f64;
        let n = cells.pow(d as u32);
        let mut coords = Vec::with_capacity(n * d);
        for idx in 0..n {
            let mut rem = idx;
            for a in 0..d {
                let i = rem % cells;
                rem /= cells;
                coords.push(domain.lo[a] + (i as f64 + 0.5) * h);
            }
        }
        let weights = vec![h.powi(d as i32); n];
        Ok(Self {
            domain,
            layout: Layout::Uniform { cells, spacing: h },
            coords,
            weights,
        })
    }

    /// Arbitrary points (given as one slice per point) with explicit weights.
    pub fn scattered(domain: BoxDomain, points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let d = domain.dim();
        if points.is_empty() || points.len() != weights.len() {
            return Err(argument("scattered grid needs matching non-empty points and weights"));
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d || !domain.contains(p) {
                return Err(argument(format!("point {p:?} is not inside the {d}-d domain")));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            domain,
            layout: Layout::Scattered,
            coords,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Spacing and cells-per-axis of a uniform grid.
    pub fn uniform_params(&self) -> Option<(usize, f64)> {
        match self.layout {
            Layout::Uniform { cells, spacing } => Some((cells, spacing)),
            Layout::Scattered => None,
        }
    }

    /// Lattice coordinates of point `i` on a uniform grid.
    pub fn lattice_index(&self, i: usize) -> Option<[usize; 2]> {
        let (cells, _) = self.uniform_params()?;
        Some(if self.dim() == 1 {
            [i, 0]
        } else {
            [i % cells, i / cells]
        })
    }

    /// Flat index of lattice coordinates, if in range.
    pub fn flat_index(&self, ix: isize, iy: isize) -> Option<usize> {
        let (cells, _) = self.uniform_params()?;
        let c = cells as isize;
        if ix < 0 || ix >= c {
            return None;
        }
        if self.dim() == 1 {
            return (iy == 0).then_some(ix as usize);
        }
        if iy < 0 || iy >= c {
            return None;
        }
        Some((ix + iy * c) as usize)
    }

    /// Indices of grid points inside `D_eps`.
    pub fn interior(&self, eps: f64) -> Vec<usize> {
        let shrunk = shrink_domain(&self.domain, eps);
        (0..self.len()).filter(|&i| shrunk.contains(self.point(i))).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j))
    }

    /// Short content hash identifying the grid in manifests.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.layout).unwrap_or_default());
        h.update(serde_json::to_vec(&self.domain).unwrap_or_default());
        for x in &self.coords {
            h.update(x.to_le_bytes());
        }
        for w in &self.weights {
            h.update(w.to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_unit_interval() {
        let d = BoxDomain::unit(1).unwrap();
        let s = shrink_domain(&d, 0.1);
        let inner = s.inner.unwrap();
        assert!((inner.lo()[0] - 0.2).abs() < 1e-15);
        assert!((inner.hi()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shrink_too_far_is_flagged_empty() {
        let d = BoxDomain::unit(1).unwrap();
        assert!(shrink_domain(&d, 0.3).is_empty());
    }

    #[test]
    fn shrink_unit_square() {
        let d = BoxDomain::unit(2).unwrap();
        let inner = shrink_domain(&d, 0.05).inner.unwrap();
        for a in 0..2 {
            assert!((inner.lo()[a] - 0.1).abs() < 1e-15);
            assert!((inner.hi()[a] - 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn shrunken_domains_are_nested() {
        let d = BoxDomain::unit(2).unwrap();
        let small = shrink_domain(&d, 0.01);
        let large = shrink_domain(&d, 0.2);
        let p = [0.45, 0.55];
        assert!(large.contains(&p) && small.contains(&p));
        assert!(small.contains(&[0.05, 0.5]) && !large.contains(&[0.05, 0.5]));
    }

    #[test]
    fn uniform_grid_layout() {
        let g = Grid::uniform(BoxDomain::unit(2).unwrap(), 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.point(5), &[0.375, 0.375]);
        assert_eq!(g.lattice_index(6), Some([2, 1]));
        assert_eq!(g.flat_index(2, 1), Some(6));
        assert_eq!(g.flat_index(4, 1), None);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hash_distinguishes_grids() {
        let a = Grid::uniform(BoxDomain::unit(1).unwrap(), 64).unwrap();
        let b = Grid::uniform(BoxDomain::unit(1).unwrap(), 65).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }
}
