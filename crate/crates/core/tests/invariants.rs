//! Cross-module invariants exercised through the public API.

use std::sync::OnceLock;

use gmc_core::{
    chaos_integral, convolve_grid, k_partial, map_replicas, q_n, replica_rng, shrink_domain, theta_eps,
    truncated_chaos, Backend, BoxDomain, Channel, ChaosInput, ChaosMode, ChaosParams, FieldSampler, Grid, KernelSpec,
    MollifierSpec, TestFunction, TiltShift, Truncation, TruncationVariant, VarianceTable,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

const EPS: f64 = 1.0 / 16.0;

struct Fixture {
    grid: Grid,
    theta: MollifierSpec,
    sampler: FieldSampler,
    f: TestFunction,
    g: TestFunction,
    variances: VarianceTable,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = KernelSpec::reference(1).unwrap();
        let grid = Grid::uniform(BoxDomain::unit(1).unwrap(), 128).unwrap();
        let theta = MollifierSpec::standard(1).unwrap();
        let sampler = FieldSampler::new(&spec, &grid, 8, Backend::Auto).unwrap();
        let f = TestFunction::bump(&grid, &[0.5], 0.2).unwrap();
        let g = TestFunction::bump(&grid, &[0.4], 0.1).unwrap();
        let variances = VarianceTable::from_sampler(&sampler, &theta, &[EPS]).unwrap();
        Fixture {
            grid,
            theta,
            sampler,
            f,
            g,
            variances,
        }
    })
}

/// Lipschitz constant of the base profile: `1 - r` in d = 1, the disc overlap in d = 2.
fn kappa_lip(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        4.0 / std::f64::consts::PI
    }
}

proptest! {
    #[test]
    fn increments_bounded_supported_lipschitz(
        dim in 1usize..=2,
        n in 1usize..10,
        r in 0.0f64..0.5,
        dr in -0.01f64..0.01,
    ) {
        let s = KernelSpec::reference(dim).unwrap();
        let q = q_n(&s, n, r).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        if r >= s.level_radius(n) {
            prop_assert_eq!(q, 0.0);
        }
        let r2 = (r + dr).max(0.0);
        let lip = kappa_lip(dim) * (s.t0() + n as f64 + 1.0).exp();
        prop_assert!((q - q_n(&s, n, r2).unwrap()).abs() <= lip * (r - r2).abs() + 1e-12);
    }

    #[test]
    fn partial_kernel_diagonal_counts_levels(dim in 1usize..=2, m in 0usize..12, extra in 0usize..12) {
        let s = KernelSpec::reference(dim).unwrap();
        let n = m + extra;
        let diff = k_partial(&s, n, 0.0).unwrap() - k_partial(&s, m, 0.0).unwrap();
        prop_assert!((diff - extra as f64).abs() < 1e-9, "{diff} vs {extra}");
    }

    #[test]
    fn mollifier_nonnegative_and_supported(
        quadratic in any::<bool>(),
        eps in 0.01f64..1.0,
        x in -1.5f64..1.5,
    ) {
        let spec = if quadratic { MollifierSpec::quadratic(1) } else { MollifierSpec::standard(1) }.unwrap();
        let v = theta_eps(&spec, eps, &[x]).unwrap();
        prop_assert!(v >= 0.0);
        if x.abs() >= eps {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn shrunken_domains_nest(dim in 1usize..=2, e1 in 0.0f64..0.5, e2 in 0.0f64..0.5, p in prop::collection::vec(0.0f64..1.0, 2)) {
        let (small, large) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let dom = BoxDomain::unit(dim).unwrap();
        let pt = &p[..dim];
        if shrink_domain(&dom, large).contains(pt) {
            prop_assert!(shrink_domain(&dom, small).contains(pt));
        }
    }

    #[test]
    fn stencil_weights_form_a_partition(quadratic in any::<bool>(), k in 3i32..7) {
        let spec = if quadratic { MollifierSpec::quadratic(1) } else { MollifierSpec::standard(1) }.unwrap();
        let st = spec.stencil(2f64.powi(-k), 1.0 / 512.0).unwrap();
        prop_assert!(st.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((st.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn convolution_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let fx = fixture();
        let mut rng = replica_rng(seed, Channel::Primary, 0);
        let u: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..fx.grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let cu = convolve_grid(&u, &fx.theta, EPS, &fx.grid).unwrap();
        let cv = convolve_grid(&v, &fx.theta, EPS, &fx.grid).unwrap();
        let cw = convolve_grid(&w, &fx.theta, EPS, &fx.grid).unwrap();
        for i in 0..fx.grid.len() {
            match (cu.get(i), cv.get(i), cw.get(i)) {
                (Some(p), Some(q), Some(r)) => prop_assert!((a * p + b * q - r).abs() < 1e-12),
                (None, None, None) => {}
                _ => prop_assert!(false, "D_eps membership differs at {i}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_sums_telescope_exactly(seed in any::<u64>(), replica in 0u64..1000, m in 0usize..8) {
        let fx = fixture();
        let s = fx.sampler.sample(seed, replica);
        for n in m..=s.n_max() {
            let mut acc = s.y(m).to_vec();
            for k in m + 1..=n {
                for (a, z) in acc.iter_mut().zip(s.z(k)) {
                    *a += z;
                }
            }
            prop_assert_eq!(&acc[..], s.y(n));
        }
    }

    #[test]
    fn chaos_is_linear_and_conjugation_equivariant(
        seed in any::<u64>(),
        re in 0.1f64..1.2,
        im in -0.6f64..0.6,
        a in -2.0f64..2.0,
    ) {
        let fx = fixture();
        let mut s = fx.sampler.sample(seed, 0);
        fx.sampler.mollify(&mut s, &[EPS], &fx.theta).unwrap();
        let h = fx.f.linear_combination(1.0, &fx.g, a).unwrap();
        let input = |f| ChaosInput { grid: &fx.grid, f, variances: &fx.variances, profile: fx.theta.name() };
        let gamma = Complex64::new(re, im);
        let p = ChaosParams::new(1, ChaosMode::single(gamma), None).unwrap();
        let pc = ChaosParams::new(1, ChaosMode::single(gamma.conj()), None).unwrap();
        let mf = chaos_integral(&s, None, &p, EPS, &input(&fx.f)).unwrap().value();
        let mg = chaos_integral(&s, None, &p, EPS, &input(&fx.g)).unwrap().value();
        let mh = chaos_integral(&s, None, &p, EPS, &input(&h)).unwrap().value();
        prop_assert!((mf + a * mg - mh).norm() <= 1e-12 * (1.0 + mh.norm()));
        let conj = chaos_integral(&s, None, &pc, EPS, &input(&fx.f)).unwrap().value();
        prop_assert!((conj - mf.conj()).norm() <= 1e-12 * (1.0 + mf.norm()));
    }

    #[test]
    fn truncation_agrees_with_full_chaos_on_the_event(seed in any::<u64>(), q in 1usize..=8, lambda in 1.42f64..3.0) {
        let fx = fixture();
        let mut s = fx.sampler.sample(seed, 0);
        fx.sampler.mollify(&mut s, &[EPS], &fx.theta).unwrap();
        let input = ChaosInput { grid: &fx.grid, f: &fx.f, variances: &fx.variances, profile: fx.theta.name() };
        let trunc = Truncation { q, lambda, variant: TruncationVariant::Increments };
        let p = ChaosParams::new(1, ChaosMode::single(Complex64::new(1.1, 0.25)), Some(trunc)).unwrap();
        let full = chaos_integral(&s, None, &p, EPS, &input).unwrap();
        let tr = truncated_chaos(&s, None, &p, EPS, &input).unwrap();
        if tr.event {
            prop_assert_eq!(tr.value(), full.value());
        }
        if tr.value() == Complex64::new(0.0, 0.0) {
            prop_assert!(!tr.event);
        }
    }

    #[test]
    fn zero_tilt_leaves_samples_unchanged(seed in any::<u64>(), x in 0.3f64..0.7, y in 0.3f64..0.7) {
        let fx = fixture();
        let mut s = fx.sampler.sample(seed, 0);
        fx.sampler.mollify(&mut s, &[EPS], &fx.theta).unwrap();
        let before = s.clone();
        let tilt = TiltShift { x: vec![x], y: vec![y], eps: EPS, eps2: EPS, alpha: 0.0 };
        gmc_core::apply_tilt(&mut s, &tilt, &fx.sampler, &fx.theta).unwrap();
        for n in 0..=s.n_max() {
            prop_assert_eq!(s.y(n), before.y(n));
        }
        let (a, b) = (s.x(EPS).unwrap(), before.x(EPS).unwrap());
        for i in 0..fx.grid.len() {
            prop_assert_eq!(a.get(i), b.get(i));
        }
    }
}

#[test]
fn replica_maps_ignore_worker_count() {
    let fx = fixture();
    let draw = |r: usize| {
        let mut s = fx.sampler.sample(7, r as u64);
        fx.sampler.mollify(&mut s, &[EPS], &fx.theta).unwrap();
        s.x(EPS).unwrap().values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    let one = map_replicas(64, Some(1), draw);
    for w in [2, 3, 8] {
        assert_eq!(map_replicas(64, Some(w), draw), one, "workers = {w}");
    }
}
