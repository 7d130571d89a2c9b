use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ordnorm::solver::{binary_search_solve, guaranteed_horizon, guaranteed_run};
use ordnorm::testkit::exact_opt;
use ordnorm::NormApprox;
use ordnorm_bench::instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("binary_search_solve");
    group.sample_size(10);
    for (n, d) in [(2, 3), (4, 5), (6, 8)] {
        let inst = instance(n, d, 3);
        group.bench_with_input(
            BenchmarkId::new("n_d", format!("{n}x{d}")),
            &inst,
            |b, inst| b.iter(|| binary_search_solve(inst, 0.1, 0, 1.0).unwrap()),
        );
    }
    group.finish();
}

fn guaranteed(c: &mut Criterion) {
    let inst = instance(6, 4, 5);
    let opt = exact_opt(&inst).unwrap().opt_value;
    let approx = NormApprox::new(inst.weights().clone(), 0.2).unwrap();
    let horizon = guaranteed_horizon(6, 4, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("guaranteed_run_gamma_2opt", |b| {
        b.iter(|| guaranteed_run(&inst, &approx, horizon, 2.0 * opt, &mut rng, None).unwrap())
    });
}

criterion_group!(benches, end_to_end, guaranteed);
criterion_main!(benches);
