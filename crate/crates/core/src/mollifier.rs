//! Smooth bumps, their rescalings and discrete convolution on uniform grids.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::grid::{shrink_domain, Grid};
use crate::io::fmt_f64;
use crate::quad::GaussLegendre;

/// Radial profile of a mollifier, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// `exp(-1 / (1 - |x|^2))` on the open unit ball.
    StandardBump,
    /// `(1 - |x|^2)^2` on the unit ball; only C^1 but a clearly distinct shape.
    QuadraticBump,
    /// Piecewise-linear radial table `(r, value)`, zero beyond the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    fn raw(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::StandardBump => (-1.0 / (1.0 - r * r)).exp(),
            Profile::QuadraticBump => {
                let t = 1.0 - r * r;
                t * t
            }
            Profile::Table { radii, values } => {
                let last = radii.len() - 1;
                if r >= radii[last] {
                    return 0.0;
                }
                let k = radii.partition_point(|&x| x <= r).max(1) - 1;
                let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Profile::StandardBump => "standard-bump",
            Profile::QuadraticBump => "quadratic-bump",
            Profile::Table { .. } => "table",
        }
    }
}

/// A normalized, radially symmetric mollifier `theta` with `int theta = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    dim: usize,
    profile: Profile,
    norm: f64,
}

impl MollifierSpec {
    pub fn new(dim: usize, profile: Profile) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(argument(format!("mollifier dimension must be 1 or 2, got {dim}")));
        }
        if let Profile::Table { radii, values } = &profile {
            validate_table(radii, values)?;
        }
        let surface = if dim == 1 { 2.0 } else { 2.0 * PI };
        let rule = GaussLegendre::order64();
        let mass = surface * rule.integrate_composite(0.0, 1.0, 32, |r| profile.raw(r) * r.powi(dim as i32 - 1));
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numeric("mollifier profile has no positive mass".into()));
        }
        Ok(Self {
            dim,
            profile,
            norm: 1.0 / mass,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, Profile::StandardBump)
    }

    pub fn quadratic(dim: usize) -> Result<Self> {
        Self::new(dim, Profile::QuadraticBump)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn name(&self) -> &'static str {
        self.profile.name()
    }

    /// Normalization constant `c_d` such that `c_d * profile` integrates to one.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// `theta` as a function of the radius `|x|`.
    pub fn radial(&self, r: f64) -> f64 {
        self.norm * self.profile.raw(r)
    }

    /// `theta_eps` as a function of the radius.
    pub fn radial_eps(&self, eps: f64, r: f64) -> f64 {
        self.radial(r / eps) / eps.powi(self.dim as i32)
    }

    /// Sampled, renormalized weights of `theta_eps` on a lattice with spacing `h`.
    pub fn stencil(&self, eps: f64, h: f64) -> Result<Stencil> {
        check_eps(eps)?;
        if h > eps / 4.0 {
            return Err(Error::Resolution { spacing: h, eps });
        }
        let reach = (eps / h).ceil() as isize;
        let ys: Vec<isize> = if self.dim == 1 {
            vec![0]
        } else {
            (-reach..=reach).collect()
        };
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for &oy in &ys {
            for ox in -reach..=reach {
                let r = h * ((ox * ox + oy * oy) as f64).sqrt();
                let w = self.profile.raw(r / eps);
                if w > 0.0 {
                    offsets.push([ox, oy]);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Stencil {
            eps,
            spacing: h,
            offsets,
            weights,
        })
    }

    /// Writes the discrete profile of `theta_eps` at spacing `h` as `(offset, weight)` rows.
    /// In two dimensions the offset column holds the Euclidean distance of the cell.
    pub fn write_profile_csv<W: Write>(&self, eps: f64, h: f64, out: W) -> Result<()> {
        let stencil = self.stencil(eps, h)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["offset", "weight"])?;
        for (o, wt) in stencil.offsets.iter().zip(&stencil.weights) {
            let off = if self.dim == 1 {
                o[0] as f64 * h
            } else {
                h * ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt()
            };
            w.write_record([fmt_f64(off), fmt_f64(*wt)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate_table(radii: &[f64], values: &[f64]) -> Result<()> {
    if radii.len() < 2 || radii.len() != values.len() {
        return Err(argument("profile table needs at least two (radius, value) rows"));
    }
    if radii[0] != 0.0 || radii[radii.len() - 1] > 1.0 {
        return Err(argument("profile table radii must start at 0 and end at most at 1"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(argument("profile table radii must be strictly increasing"));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(argument("profile table values must be finite and non-negative"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(argument(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// `theta_eps(x) = eps^{-d} theta(x / eps)`.
pub fn theta_eps(spec: &MollifierSpec, eps: f64, x: &[f64]) -> Result<f64> {
    check_eps(eps)?;
    if x.len() != spec.dim {
        return Err(argument("point dimension does not match the mollifier"));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(spec.radial_eps(eps, r))
}

/// Discrete convolution weights on a lattice; weights are non-negative and sum to one.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub eps: f64,
    pub spacing: f64,
    pub offsets: Vec<[isize; 2]>,
    pub weights: Vec<f64>,
}

impl Stencil {
    /// `sum_a w_a (g * f)`-style pair sum: `sum_{a,b} w_a v_b k(|a - b| h)`.
    pub fn pair_sum<F: Fn(f64) -> f64>(&self, other: &Stencil, shift: [isize; 2], k: F) -> f64 {
        let h = self.spacing;
        let mut total = 0.0;
        for (oa, wa) in self.offsets.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (ob, wb) in other.offsets.iter().zip(&other.weights) {
                let dx = (oa[0] - ob[0] - shift[0]) as f64;
                let dy = (oa[1] - ob[1] - shift[1]) as f64;
                inner += wb * k(h * (dx * dx + dy * dy).sqrt());
            }
            total += wa * inner;
        }
        total
    }
}

/// A mollified field on the interior `D_eps` of a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifiedField {
    pub eps: f64,
    pub values: Vec<f64>,
    pub inside: Vec<bool>,
}

impl MollifiedField {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.inside[i].then(|| self.values[i])
    }
}

/// Convolves grid values with `theta_eps`; the output is defined on grid points of `D_eps` only.
pub fn convolve_grid(field: &[f64], spec: &MollifierSpec, eps: f64, grid: &Grid) -> Result<MollifiedField> {
    let stencil = grid_stencil(spec, eps, grid)?;
    if field.len() != grid.len() {
        return Err(argument("field length does not match the grid"));
    }
    Ok(convolve_with(field, &stencil, grid))
}

pub(crate) fn grid_stencil(spec: &MollifierSpec, eps: f64, grid: &Grid) -> Result<Stencil> {
    if spec.dim() != grid.dim() {
        return Err(argument("mollifier and grid dimensions differ"));
    }
    let (_, h) = grid
        .uniform_params()
        .ok_or_else(|| argument("convolution needs a uniform grid"))?;
    spec.stencil(eps, h)
}

pub(crate) fn convolve_with(field: &[f64], stencil: &Stencil, grid: &Grid) -> MollifiedField {
    let shrunk = shrink_domain(grid.domain(), stencil.eps);
    let n = grid.len();
    let mut values = vec![f64::NAN; n];
    let mut inside = vec![false; n];
    for i in 0..n {
        if !shrunk.contains(grid.point(i)) {
            continue;
        }
        let [ix, iy] = grid.lattice_index(i).expect("uniform grid");
        let mut acc = 0.0;
        for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
            // Interior points keep the whole stencil inside the grid.
            let j = grid
                .flat_index(ix as isize + o[0], iy as isize + o[1])
                .expect("stencil stays inside the grid on D_eps");
            acc += w * field[j];
        }
        values[i] = acc;
        inside[i] = true;
    }
    MollifiedField {
        eps: stencil.eps,
        values,
        inside,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;

    fn unit_grid(cells: usize) -> Grid {
        Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap()
    }

    #[test]
    fn d1_normalization_constant() {
        // Frozen from adaptive quadrature of exp(-1/(1-x^2)) on [-1, 1]: 0.443993816168...
        let c1 = MollifierSpec::standard(1).unwrap().normalization();
        assert!((c1 - 1.0 / 0.443_993_816_168_079_4).abs() < 1e-9, "c1 = {c1}");
        assert!((c1 - 2.25228).abs() < 1e-5);
    }

    #[test]
    fn zero_outside_support() {
        let spec = MollifierSpec::standard(2).unwrap();
        let eps = 0.1;
        let v = theta_eps(&spec, eps, &[0.12 * 0.6, 0.12 * 0.8]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn theta_eps_rejects_bad_eps() {
        let spec = MollifierSpec::standard(1).unwrap();
        assert!(theta_eps(&spec, 0.0, &[0.0]).is_err());
        assert!(theta_eps(&spec, 1.5, &[0.0]).is_err());
    }

    #[test]
    fn grid_integral_of_theta_eps_is_one() {
        let spec = MollifierSpec::standard(1).unwrap();
        let h = 1.0 / 4096.0;
        let s: f64 = (-2048..2048)
            .map(|i| theta_eps(&spec, 0.25, &[(i as f64 + 0.5) * h]).unwrap() * h)
            .sum();
        assert!((s - 1.0).abs() < 1e-6);
        let st = spec.stencil(0.25, h).unwrap();
        let ws: f64 = st.weights.iter().sum();
        assert!((ws - 1.0).abs() < 1e-14);
    }

    #[test]
    fn d2_mass_is_one() {
        let spec = MollifierSpec::standard(2).unwrap();
        let h = 1.0 / 400.0;
        let mut s = 0.0;
        for i in -200..200 {
            for j in -200..200 {
                let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                s += theta_eps(&spec, 0.5, &x).unwrap() * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn under_resolved_eps_is_rejected() {
        let g = unit_grid(64);
        let spec = MollifierSpec::standard(1).unwrap();
        let f = vec![1.0; 64];
        let err = convolve_grid(&f, &spec, 1.0 / 32.0, &g).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn constant_field_is_preserved() {
        let g = unit_grid(256);
        let spec = MollifierSpec::standard(1).unwrap();
        let f = vec![3.5; 256];
        let m = convolve_grid(&f, &spec, 1.0 / 16.0, &g).unwrap();
        for i in 0..256 {
            if let Some(v) = m.get(i) {
                assert!((v - 3.5).abs() < 1e-13);
            }
        }
        // only points of D_eps are populated
        assert!(m.get(0).is_none());
        assert!(m.get(128).is_some());
    }

    #[test]
    fn linear_field_is_preserved() {
        let g = unit_grid(256);
        let spec = MollifierSpec::standard(1).unwrap();
        let f: Vec<f64> = (0..256).map(|i| g.point(i)[0]).collect();
        let m = convolve_grid(&f, &spec, 1.0 / 16.0, &g).unwrap();
        for (i, fi) in f.iter().enumerate() {
            if let Some(v) = m.get(i) {
                assert!((v - fi).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sine_matches_dense_quadrature() {
        let cells = 256;
        let g = unit_grid(cells);
        let spec = MollifierSpec::standard(1).unwrap();
        let eps = 1.0 / 16.0;
        let f: Vec<f64> = (0..cells).map(|i| (2.0 * PI * g.point(i)[0]).sin()).collect();
        let m = convolve_grid(&f, &spec, eps, &g).unwrap();
        // Oracle: midpoint quadrature of the continuous convolution at 4x the grid resolution.
        let fine = 4 * 2 * (eps * cells as f64) as usize;
        let dz = 2.0 * eps / fine as f64;
        let mut worst: f64 = 0.0;
        for i in 0..cells {
            let Some(v) = m.get(i) else { continue };
            let x = g.point(i)[0];
            let exact: f64 = (0..fine)
                .map(|k| {
                    let z = -eps + (k as f64 + 0.5) * dz;
                    spec.radial_eps(eps, z.abs()) * (2.0 * PI * (x - z)).sin() * dz
                })
                .sum();
            worst = worst.max((v - exact).abs());
        }
        assert!(worst < 1e-6, "sup error {worst}");
    }

    #[test]
    fn distinct_profiles_converge_on_smooth_fields() {
        let cells = 1024;
        let g = unit_grid(cells);
        let a = MollifierSpec::standard(1).unwrap();
        let b = MollifierSpec::quadratic(1).unwrap();
        let f: Vec<f64> = (0..cells).map(|i| (3.0 * g.point(i)[0]).cos()).collect();
        let mut last = f64::INFINITY;
        for k in 3..=7 {
            let eps = 2f64.powi(-k);
            let fa = convolve_grid(&f, &a, eps, &g).unwrap();
            let fb = convolve_grid(&f, &b, eps, &g).unwrap();
            let sup = (0..cells)
                .filter_map(|i| Some((fa.get(i)? - fb.get(i)?).abs()))
                .fold(0.0, f64::max);
            assert!(sup < last);
            last = sup;
        }
    }

    #[test]
    fn table_profile_normalizes() {
        let spec = MollifierSpec::new(
            1,
            Profile::Table {
                radii: vec![0.0, 0.5, 1.0],
                values: vec![1.0, 1.0, 0.0],
            },
        )
        .unwrap();
        // mass of the raw profile = 2 * (0.5 + 0.25) = 1.5
        assert!((spec.normalization() - 1.0 / 1.5).abs() < 1e-6);
        assert!(MollifierSpec::new(
            1,
            Profile::Table {
                radii: vec![0.1, 1.0],
                values: vec![1.0, 0.0]
            }
        )
        .is_err());
    }

    #[test]
    fn profile_csv_has_header_and_rows() {
        let spec = MollifierSpec::standard(1).unwrap();
        let mut buf = Vec::new();
        spec.write_profile_csv(0.1, 0.01, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("offset,weight"));
        assert_eq!(lines.count(), 19);
    }
}
