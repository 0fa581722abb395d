use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use folnerlab_bench::*;
use folnerlab_core::{ball, build_castle, covering_number, growth_profile, CastleOptions, CoverBudget, FolnerFamily};

fn exact_cover(c: &mut Criterion) {
    let mut g = c.benchmark_group("covering_number");
    for half in [2, 5, 10] {
        let a = z_interval(half);
        g.bench_with_input(BenchmarkId::new("z_interval", half), &a, |b, a| {
            b.iter(|| covering_number(black_box(a), &CoverBudget::default()).unwrap())
        });
    }
    for half in [1, 2] {
        let a = z2_box(half);
        g.bench_with_input(BenchmarkId::new("z2_box", half), &a, |b, a| {
            b.iter(|| covering_number(black_box(a), &CoverBudget::default()).unwrap())
        });
    }
    g.finish();
}

fn greedy_cover(c: &mut Criterion) {
    let mut g = c.benchmark_group("greedy_cover");
    g.sample_size(10);
    let greedy_only = CoverBudget {
        max_universe: 1,
        ..CoverBudget::default()
    };
    for l in [4, 9] {
        let a = heis_member(l);
        g.bench_with_input(BenchmarkId::new("heisenberg_sqrt", l), &a, |b, a| {
            b.iter(|| covering_number(black_box(a), &greedy_only).unwrap())
        });
    }
    g.finish();
}

fn balls(c: &mut Criterion) {
    let gens = heis_gens();
    let mut g = c.benchmark_group("ball");
    for r in [4, 8, 12] {
        g.bench_with_input(BenchmarkId::new("heis1", r), &r, |b, &r| b.iter(|| ball(&gens, r).unwrap()));
    }
    g.bench_function("heis1_growth_12", |b| b.iter(|| growth_profile(&gens, 12).unwrap()));
    g.finish();
}

fn castles(c: &mut Criterion) {
    let window = z_window(120);
    let family = FolnerFamily::zm_box(1).unwrap();
    let opts = CastleOptions::default();
    let mut g = c.benchmark_group("castle");
    g.sample_size(10);
    g.bench_function("z_strong_n3_r120", |b| {
        b.iter(|| build_castle(&window, &family, 3, 0, true, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, exact_cover, greedy_cover, balls, castles);
criterion_main!(benches);
