use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gmc_core::{
    chaos_integral, k_mollified, BoxDomain, ChaosInput, ChaosMode, ChaosParams, FieldSampler, Grid, KernelSpec,
    MidpointRule, MollifierSpec, TestFunction, VarianceTable,
};
use num_complex::Complex64;

fn kernels(c: &mut Criterion) {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    c.bench_function("k_exact_1d", |b| {
        b.iter(|| gmc_core::k_exact(&spec, black_box(0.013)).unwrap())
    });
    c.bench_function("k_mollified_1d", |b| {
        b.iter(|| {
            k_mollified(
                &spec,
                &theta,
                0.0625,
                0.03125,
                &[0.5],
                &[black_box(0.52)],
                MidpointRule::default(),
            )
            .unwrap()
        })
    });
}

fn sampler(c: &mut Criterion) {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let mut g = c.benchmark_group("sampler");
    for (cells, n_max) in [(128, 6), (512, 7), (16384, 10)] {
        let grid = Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap();
        let s = FieldSampler::new(&spec, &grid, n_max, gmc_core::Backend::Auto).unwrap();
        g.bench_function(format!("sample_{cells}"), |b| {
            let mut r = 0u64;
            b.iter(|| {
                r += 1;
                s.sample(1, r)
            })
        });
        if cells <= 512 {
            g.bench_function(format!("sample_mollify_{cells}"), |b| {
                let mut r = 0u64;
                b.iter(|| {
                    r += 1;
                    let mut x = s.sample(1, r);
                    s.mollify(&mut x, &[0.125, 0.0625, 0.03125], &theta).unwrap();
                    x
                })
            });
        }
    }
    g.finish();
}

fn chaos(c: &mut Criterion) {
    let spec = KernelSpec::reference(1).unwrap();
    let theta = MollifierSpec::standard(1).unwrap();
    let grid = Grid::uniform(BoxDomain::unit(1).unwrap(), 512).unwrap();
    let f = TestFunction::bump(&grid, &[0.5], 0.2).unwrap();
    let s = FieldSampler::new(&spec, &grid, 7, gmc_core::Backend::Auto).unwrap();
    let eps = [0.03125];
    let vt = VarianceTable::from_sampler(&s, &theta, &eps).unwrap();
    let input = ChaosInput {
        grid: &grid,
        f: &f,
        variances: &vt,
        profile: theta.name(),
    };
    let params = ChaosParams::new(1, ChaosMode::single(Complex64::new(1.1, 0.25)), None).unwrap();
    c.bench_function("chaos_integral_512", |b| {
        b.iter_batched(
            || {
                let mut x = s.sample(1, 7);
                s.mollify(&mut x, &eps, &theta).unwrap();
                x
            },
            |x| chaos_integral(&x, None, &params, eps[0], &input).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, kernels, sampler, chaos);
criterion_main!(benches);
