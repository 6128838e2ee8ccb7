use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fepanel::dgp::{simulate_panel, DgpSpec};
use fepanel::{build_lagged_design, ccm_sigma, fe_fit, hpj_fit, LagSpec, PanelDataset};

fn design(n: usize, t: usize) -> PanelDataset {
    let raw = simulate_panel(&DgpSpec::ar1(0.8), n, t, 1).unwrap();
    build_lagged_design(&raw.dataset, &LagSpec::ar1()).unwrap()
}

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimators");
    for (n, t) in [(50, 12), (200, 24), (1000, 48)] {
        let ds = design(n, t);
        let label = format!("n{n}_T{t}");
        group.bench_with_input(BenchmarkId::new("fe", &label), &ds, |b, ds| {
            b.iter(|| fe_fit(black_box(ds)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("hpj", &label), &ds, |b, ds| {
            b.iter(|| hpj_fit(black_box(ds)).unwrap())
        });
        let fit = fe_fit(&ds).unwrap();
        group.bench_with_input(BenchmarkId::new("ccm", &label), &ds, |b, ds| {
            b.iter(|| ccm_sigma(black_box(ds), &fit.beta_hat, &fit.a_hat).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_panel");
    for spec in [
        "ar1:0.8",
        "ar2x:0.4,0.4,0.5,0.5",
        "rcar1:u0,0.9",
        "expar:0.8,1",
    ] {
        let parsed: DgpSpec = spec.parse().unwrap();
        group.bench_function(spec, |b| {
            b.iter(|| simulate_panel(black_box(&parsed), 200, 24, 7).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estimators, simulation);
criterion_main!(benches);
