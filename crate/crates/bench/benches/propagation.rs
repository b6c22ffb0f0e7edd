use criterion::{black_box, criterion_group, criterion_main, Criterion};
use singlet_core::dynamics::Propagator;
use singlet_core::{compile, effective_rates, figure3_preset, integrate, lindblad_rhs, InitialState, IntegrateOptions, C64};

fn rhs(c: &mut Criterion) {
    let params = figure3_preset(1.0);
    let model = compile(&params).unwrap();
    let rho = InitialState::Mixture4.build(params.d_t, params.d_c).unwrap();
    let flat: Vec<C64> = rho.as_slice().to_vec();
    let mut prop = Propagator::new(&model);
    let mut out = vec![C64::new(0.0, 0.0); flat.len()];
    c.bench_function("rhs_sparse", |b| b.iter(|| prop.rhs_into(black_box(0.3), black_box(&flat), &mut out)));
    c.bench_function("rhs_dense", |b| b.iter(|| lindblad_rhs(&model, black_box(&rho), 0.3).unwrap()));
}

fn propagate(c: &mut Criterion) {
    let params = figure3_preset(1.0);
    let model = compile(&params).unwrap();
    let rho = InitialState::Mixture4.build(params.d_t, params.d_c).unwrap();
    let options = IntegrateOptions { sample_interval: 5.0, ..IntegrateOptions::fast() };
    let mut group = c.benchmark_group("integrate");
    group.sample_size(10);
    group.bench_function("t20", |b| b.iter(|| integrate(&model, &rho, 20.0, &options).unwrap()));
    group.finish();
}

fn rates(c: &mut Criterion) {
    let params = figure3_preset(1.0);
    c.bench_function("effective_rates", |b| b.iter(|| effective_rates(black_box(&params)).unwrap()));
}

criterion_group!(benches, rhs, propagate, rates);
criterion_main!(benches);
