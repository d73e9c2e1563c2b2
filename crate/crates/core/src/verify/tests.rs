use num_complex::Complex64;
use proptest::prelude::*;

use super::kernel::EstimateGrid;
use super::*;
use crate::chaos::{ChaosMode, ChaosParams, TestFunction, Truncation, TruncationVariant};
use crate::grid::{BoxDomain, Grid};
use crate::kernels::{KernelSpec, MidpointRule};
use crate::mollifier::MollifierSpec;
use crate::sampler::{Backend, FieldSampler};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Fixture {
    spec: KernelSpec,
    grid: Grid,
    theta: MollifierSpec,
    f: TestFunction,
    sampler: FieldSampler,
}

fn fixture(spec: KernelSpec, cells: usize, n_max: usize) -> Fixture {
    let grid = Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let f = TestFunction::bump(&grid, &[0.5], 0.2).unwrap();
    let sampler = FieldSampler::new(&spec, &grid, n_max, Backend::Auto).unwrap();
    Fixture {
        spec,
        grid,
        theta,
        f,
        sampler,
    }
}

impl Fixture {
    fn setup(&self, seed: u64, replicas: usize) -> McSetup<'_> {
        McSetup {
            sampler: &self.sampler,
            theta: &self.theta,
            f: &self.f,
            seed,
            replicas,
            workers: None,
        }
    }
}

fn single(g: Complex64) -> ChaosParams {
    ChaosParams::new(1, ChaosMode::single(g), None).unwrap()
}

#[test]
fn z_scores_follow_the_definition() {
    let vals: Vec<Option<Complex64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| Some(c(x, -x))).collect();
    let e = MomentEstimate::from_values("t", &vals, Some(c(2.0, -2.0)));
    let se = (5.0f64 / 12.0).sqrt();
    assert!((e.se_re - se).abs() < 1e-15 && (e.se_im - se).abs() < 1e-15);
    assert!((e.z_re.unwrap() - 0.5 / se).abs() < 1e-12);
    assert!((e.z_im.unwrap() + 0.5 / se).abs() < 1e-12);
    let with_overflow = MomentEstimate::from_values("t", &[Some(c(1.0, 0.0)), None], None);
    assert_eq!(with_overflow.overflow_excluded, 1);
    assert_eq!(with_overflow.replicas, 1);
}

#[test]
fn oracle_at_gamma_zero_is_squared_integral() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let v = second_moment_oracle(
        &fx.spec,
        &fx.theta,
        c(0.0, 0.0),
        1.0 / 32.0,
        1.0 / 32.0,
        &fx.f,
        &fx.grid,
        MidpointRule::default(),
    )
    .unwrap();
    let i = fx.f.integral(&fx.grid);
    assert_eq!(v, i * i);
}

#[test]
fn oracle_with_zero_kernel_is_squared_integral() {
    let spec = KernelSpec::constant(1, 0.0).unwrap();
    let fx = fixture(spec, 128, 6);
    let v = second_moment_oracle(
        &fx.spec,
        &fx.theta,
        c(0.8, 0.3),
        1.0 / 16.0,
        1.0 / 32.0,
        &fx.f,
        &fx.grid,
        MidpointRule::default(),
    )
    .unwrap();
    let i = fx.f.integral(&fx.grid);
    assert!((v - i * i).abs() < 1e-14 * i * i);
}

#[test]
fn oracle_rejects_wide_mollifier() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let r = second_moment_oracle(
        &fx.spec,
        &fx.theta,
        c(0.8, 0.0),
        0.2,
        0.2,
        &fx.f,
        &fx.grid,
        MidpointRule::default(),
    );
    assert!(r.is_err());
}

#[test]
fn mean_identity_small_run() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let setup = fx.setup(11, 2000);
    let oracle = c(fx.f.integral(&fx.grid), 0.0);
    for g in [c(0.5, 0.0), c(0.5, 0.5)] {
        let run = mc_moment(&setup, &single(g), Estimand::Mean { eps: 1.0 / 32.0 }, Some(oracle)).unwrap();
        assert!(run.estimate.within(4.0), "{:?}", run.estimate);
        assert_eq!(run.values.len(), 2000);
    }
}

#[test]
fn cross_moment_matches_oracle_small_run() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let eps = 1.0 / 16.0;
    let g = c(0.8, 0.0);
    let oracle = second_moment_oracle(
        &fx.spec,
        &fx.theta,
        g,
        eps,
        eps,
        &fx.f,
        &fx.grid,
        MidpointRule::default(),
    )
    .unwrap();
    let run = mc_moment(
        &fx.setup(5, 3000),
        &single(g),
        Estimand::Cross { eps, eps2: eps },
        Some(c(oracle, 0.0)),
    )
    .unwrap();
    assert!(run.estimate.within(4.0), "{:?} vs {oracle}", run.estimate);
}

#[test]
fn sure_event_has_probability_one() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let p = ChaosParams::new(
        1,
        ChaosMode::single(c(1.1, 0.25)),
        Some(Truncation {
            q: 2,
            lambda: 1e3,
            variant: TruncationVariant::Increments,
        }),
    )
    .unwrap();
    let e = mc_moment(&fx.setup(3, 200), &p, Estimand::Event, None)
        .unwrap()
        .estimate;
    assert_eq!((e.re, e.se_re), (1.0, 0.0));
}

#[test]
fn squared_difference_vanishes_at_gamma_zero() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let e = mc_moment(
        &fx.setup(3, 100),
        &single(c(0.0, 0.0)),
        Estimand::SquaredDiff {
            eps: 1.0 / 8.0,
            eps2: 1.0 / 32.0,
        },
        Some(c(0.0, 0.0)),
    )
    .unwrap()
    .estimate;
    assert_eq!(e.re, 0.0);
    assert!(e.within(0.0));
}

#[test]
fn ladder_at_gamma_zero_is_zero() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let r = cauchy_ladder(
        &fx.setup(1, 50),
        &single(c(0.0, 0.0)),
        &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
    )
    .unwrap();
    assert_eq!(r.values, vec![0.0, 0.0]);
    assert_eq!(r.table().rows.len(), 2);
}

#[test]
fn ladder_preconditions() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let s = fx.setup(1, 10);
    let ladder = [1.0 / 8.0, 1.0 / 16.0];
    // glassy phase
    assert!(matches!(
        cauchy_ladder(&s, &single(c(1.2, 0.5)), &ladder),
        Err(Error::Phase { .. })
    ));
    // non-L2 without truncation
    assert!(cauchy_ladder(&s, &single(c(1.1, 0.25)), &ladder).is_err());
    // ladder must decrease
    assert!(cauchy_ladder(&s, &single(c(0.5, 0.0)), &[1.0 / 16.0, 1.0 / 8.0]).is_err());
}

#[test]
fn same_mollifier_gives_zero_distance() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let r = mollifier_independence(
        &fx.setup(2, 30),
        &fx.theta,
        &single(c(0.8, 0.0)),
        &[1.0 / 8.0, 1.0 / 16.0],
    )
    .unwrap();
    assert!(r.values.iter().all(|&v| v == 0.0));
}

#[test]
fn constant_field_is_mollifier_independent() {
    let fx = fixture(KernelSpec::constant(1, 0.7).unwrap(), 128, 6);
    let other = MollifierSpec::quadratic(1).unwrap();
    let r = mollifier_independence(&fx.setup(2, 30), &other, &single(c(0.8, 0.0)), &[1.0 / 8.0, 1.0 / 16.0]).unwrap();
    assert!(r.values.iter().all(|&v| v < 1e-8), "{:?}", r.values);
}

#[test]
fn constant_kernel_estimate_is_the_constant() {
    let spec = KernelSpec::constant(1, 0.7).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let mut grid = EstimateGrid::standard(vec![1.0 / 8.0, 1.0 / 16.0]);
    grid.log_term = false;
    let r = kernel_estimate_check(
        &spec,
        &theta,
        EstimateKind::MollifiedLog,
        &grid,
        MidpointRule::default(),
    )
    .unwrap();
    for s in &r.steps {
        assert!((s.sup - 0.7).abs() < 1e-12, "{s:?}");
    }
    assert!(r.stable);
}

#[test]
fn partial_kernel_estimate_is_bounded_on_the_diagonal() {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let grid = EstimateGrid {
        eps: vec![1.0 / 16.0],
        distances: vec![0.0],
        levels: vec![4, 8, 12, 16],
        log_term: true,
    };
    let r = kernel_estimate_check(&spec, &theta, EstimateKind::PartialMin, &grid, MidpointRule::default()).unwrap();
    assert!(r.steps[0].sup < 3.0, "{:?}", r.steps);
}

#[test]
fn tail_examples() {
    let r = tail_bound_check(&[1.0], &[0.0, 3.0]).unwrap();
    assert_eq!(r.rows[0].tail, 0.5);
    assert_eq!(r.rows[0].bound, 2.0);
    let row = r.rows[1];
    assert!((row.tail - 0.001_349_898).abs() < 1e-8);
    assert!((row.bound - 0.022_218_0).abs() < 1e-6);
    assert!((row.literal - 0.000_246_8).abs() < 1e-6);
    assert!(row.holds && !row.literal_holds);
    assert_eq!(r.literal_violations, vec![(1.0, 3.0)]);
    assert!(tail_bound_check(&[0.0], &[1.0]).is_err());
}

#[test]
fn huge_barrier_is_never_exceeded() {
    let fx = fixture(KernelSpec::reference(1).unwrap(), 128, 6);
    let r = sup_field_prob(&fx.sampler, &fx.f, 10.0, &[5], &[2, 4], 9, 500, None).unwrap();
    assert_eq!(r.exceed[0].1.re, 0.0);
    assert!(r.event.iter().all(|(_, e)| e.re == 1.0));
    assert!(sup_field_prob(&fx.sampler, &fx.f, 1.4, &[5], &[2], 9, 10, None).is_err());
}

fn tilt_setup<'a>(spec: &'a KernelSpec, theta: &'a MollifierSpec, alpha: f64, lambda: f64) -> TiltSetup<'a> {
    TiltSetup {
        spec,
        theta,
        alpha,
        beta: 0.25,
        lambda,
        q: 2,
        eps: (-6.0f64).exp(),
        center: vec![0.5],
        separations: (2..=5).map(|k| (-(k as f64)).exp()).collect(),
        n_max: None,
        seed: 4,
        replicas: 400,
        workers: None,
        rule: MidpointRule::default(),
    }
}

#[test]
fn zero_tilt_is_the_untilted_event() {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let t = tilt_setup(&spec, &theta, 0.0, 1.44);
    let r = tilted_event_prob(&t).unwrap();
    for (s, e) in &r.estimates {
        let grid = Grid::scattered(
            spec.domain().clone(),
            &[vec![0.5 - s / 2.0], vec![0.5 + s / 2.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let sampler = FieldSampler::new(&spec, &grid, spec.levels_for(t.eps), Backend::Dense).unwrap();
        let hits = (0..t.replicas)
            .filter(|&r| {
                let smp = sampler.sample(t.seed, r as u64);
                crate::chaos::truncation_indicator(&smp, 2, 1.44, &[0, 1], TruncationVariant::Increments, "")
                    .unwrap()
                    .global
            })
            .count();
        assert_eq!(e.re, hits as f64 / t.replicas as f64);
    }
}

#[test]
fn tilt_preconditions() {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    // L2 region
    let mut t = tilt_setup(&spec, &theta, 0.6, 1.44);
    t.beta = 0.1;
    assert!(matches!(tilted_event_prob(&t), Err(Error::Phase { .. })));
    // lambda above 2 alpha
    let t = tilt_setup(&spec, &theta, 1.1, 2.3);
    assert!(tilted_event_prob(&t).is_err());
    let mut t = tilt_setup(&spec, &theta, 1.1, 1.44);
    t.separations.truncate(3);
    assert!(tilted_event_prob(&t).is_err());
}

#[test]
fn tilted_event_decays_with_separation() {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let lambda = crate::phase::pick_lambda(1, 1.1, 0.25).unwrap();
    let r = tilted_event_prob(&tilt_setup(&spec, &theta, 1.1, lambda)).unwrap();
    let ps: Vec<f64> = r.estimates.iter().map(|(_, e)| e.re).collect();
    assert!(ps.windows(2).all(|w| w[1] <= w[0] + 0.05), "{ps:?}");
    assert!(r.fit.is_some());
}

proptest! {
    #[test]
    fn corrected_tail_bound_always_holds(sigma in 0.01f64..10.0, ratio in 0.0f64..8.0) {
        let r = tail_bound_check(&[sigma], &[ratio]).unwrap();
        prop_assert!(r.all_hold);
    }

    #[test]
    fn fit_recovers_any_line(a in -5.0f64..5.0, b in -3.0f64..3.0) {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let f = linear_fit(&x, &y, None).unwrap();
        prop_assert!((f.slope - b).abs() < 1e-10 && (f.intercept - a).abs() < 1e-10);
    }

    #[test]
    fn z_score_sign_matches_bias(shift in -3.0f64..3.0) {
        let vals: Vec<Option<Complex64>> = (0..20).map(|i| Some(c(i as f64 * 0.1, 0.0))).collect();
        let mean = 0.95;
        let e = MomentEstimate::from_values("p", &vals, Some(c(mean + shift, 0.0)));
        prop_assert!(e.z_re.unwrap() * shift <= 0.0);
    }
}
