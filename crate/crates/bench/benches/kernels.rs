use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nrm_core::master::{all_rows, solve_master, RowSets};
use nrm_core::model::gen_hub_spoke;
use nrm_core::subproblem::{row_subproblem, SearchOptions};
use nrm_core::{value_iteration, Approximation, Baseline, Instance, RidgeBasis, SimOptions};

fn exact(c: &mut Criterion) {
    let toy = Instance::toy2leg();
    c.bench_function("value_iteration/toy2leg", |b| b.iter(|| value_iteration(black_box(&toy)).unwrap()));
    let hs = gen_hub_spoke(2, 20, 3, 1).unwrap();
    c.bench_function("value_iteration/hub_spoke_4x3", |b| b.iter(|| value_iteration(black_box(&hs)).unwrap()));
}

fn masters(c: &mut Criterion) {
    let toy = Instance::toy2leg();
    let bases = vec![RidgeBasis::uniform(toy.capacities())];
    let full = all_rows(&toy);
    let initial = RowSets::initial(&toy);
    c.bench_function("master/toy2leg_all_rows_k1", |b| {
        b.iter(|| solve_master(&toy, &Baseline::Zero, &bases, black_box(&full)).unwrap())
    });
    c.bench_function("master/toy2leg_initial_rows_k1", |b| {
        b.iter(|| solve_master(&toy, &Baseline::Zero, &bases, black_box(&initial)).unwrap())
    });
}

fn subproblems(c: &mut Criterion) {
    let hs = gen_hub_spoke(2, 20, 3, 1).unwrap();
    let bases = vec![RidgeBasis::uniform(hs.capacities())];
    let sol = solve_master(&hs, &Baseline::Zero, &bases, &RowSets::initial(&hs)).unwrap();
    let approx: Approximation = sol.approx;
    let exact = SearchOptions::default();
    let local = SearchOptions::local(7);
    c.bench_function("row_subproblem/exact_hub_spoke", |b| {
        b.iter(|| row_subproblem(&hs, &approx, black_box(10), &exact).unwrap())
    });
    c.bench_function("row_subproblem/local_hub_spoke", |b| {
        b.iter(|| row_subproblem(&hs, &approx, black_box(10), &local).unwrap())
    });
    let opts = SimOptions { n_min: 2_000, n_max: 2_000, ..SimOptions::default() };
    c.bench_function("simulate/hub_spoke_2000", |b| {
        b.iter(|| nrm_core::simulate::simulate_with(&hs, &approx, &opts, black_box(3)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = exact, masters, subproblems
}
criterion_main!(benches);
