use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mfbounds_core::lp::{build_dual_lp, BuildOptions};
use mfbounds_core::market::synthesize_quotes;
use mfbounds_core::mesh::GradedMeshParams;
use mfbounds_core::oracle::envelope::{iterated_envelope_value, GridFunction};
use mfbounds_core::payoffs::PayoffKind;
use mfbounds_core::problem::{InitialHistory, ProblemSpec, Side, StateDomain, TimeGrid};
use mfbounds_core::{Execution, Mesh, ValidatedSpec};

fn gamma_instance(n: usize) -> (ValidatedSpec, Mesh) {
    let mesh = GradedMeshParams {
        center: 100.0,
        dense_lo: 70.0,
        dense_hi: 130.0,
        dense_step: 1.0,
        coarse_step: 10.0,
        tail_lo: 1.0,
        cap: 10_000.0,
    }
    .build()
    .unwrap();
    let times: Vec<f64> = (1..=n).map(|k| k as f64 / 240.0).collect();
    let strikes: Vec<f64> = (0..7).map(|i| 70.0 + 10.0 * i as f64).collect();
    let quotes = synthesize_quotes(100.0, 0.2, &[(n, times[n - 1])], &strikes, 0.0).unwrap();
    let spec = ProblemSpec {
        time_grid: TimeGrid::from_monitoring(&times, 1).unwrap(),
        domain: StateDomain::positive(),
        history: InitialHistory {
            values: vec![100.0],
        },
        objectives: vec![PayoffKind::GammaLeg.into(); n],
        constraints: quotes.blocks(n).unwrap(),
        side: Side::Upper,
    }
    .validate(Some(&mesh))
    .unwrap();
    (spec, mesh)
}

fn bench(c: &mut Criterion) {
    let (spec, mesh) = gamma_instance(10);
    let mut group = c.benchmark_group("gamma_n10");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = BuildOptions {
            execution: exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("build_lp", format!("{exec:?}")), &opts, |b, o| {
            b.iter(|| build_dual_lp(&spec, &mesh, o).unwrap())
        });
        let h: Vec<GridFunction> = (1..=spec.horizon())
            .map(|k| {
                let v = spec.objective(k).sample_grid(&mesh, 1).unwrap();
                GridFunction::new(&mesh, 1, v).unwrap()
            })
            .collect();
        group.bench_with_input(BenchmarkId::new("envelope_sweep", format!("{exec:?}")), &exec, |b, e| {
            b.iter(|| iterated_envelope_value(&h, &mesh, spec.history(), *e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
