use criterion::{black_box, criterion_group, criterion_main, Criterion};

use cfa_bench::{benchmark, fixtures};
use cfa_core::plan::plan_cfa;
use cfa_core::{emit_kernel, simulate, BusModel, CfaLayout, LayoutContext};

fn layout(c: &mut Criterion) {
    let mut g = c.benchmark_group("layout");
    for f in fixtures() {
        g.bench_function(&f.name, |b| b.iter(|| CfaLayout::build(black_box(&f.spec)).unwrap()));
    }
    g.finish();
}

fn plan_interior(c: &mut Criterion) {
    let mut g = c.benchmark_group("plan_cfa");
    for f in fixtures() {
        g.bench_function(&f.name, |b| b.iter(|| plan_cfa(&f.spec, &f.layout, black_box(&f.interior))));
    }
    g.finish();
}

fn simulate_space(c: &mut Criterion) {
    let model = BusModel::default();
    let f = benchmark("jacobi2d5p", &[32, 32, 32]);
    let mut g = c.benchmark_group("simulate");
    for ctx in [LayoutContext::Cfa(f.layout.clone()), LayoutContext::Original, LayoutContext::Bbox] {
        let plans = ctx.plan_all(&f.spec);
        g.bench_function(ctx.kind().as_str(), |b| b.iter(|| simulate(&model, black_box(&plans))));
    }
    g.finish();
}

fn emit(c: &mut Criterion) {
    let f = benchmark("jacobi2d5p", &[16, 16, 16]);
    c.bench_function("emit/jacobi2d5p_16", |b| b.iter(|| emit_kernel("jacobi2d5p", black_box(&f.spec)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = layout, plan_interior, simulate_space, emit
}
criterion_main!(benches);
