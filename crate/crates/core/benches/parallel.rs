//! Sequential against rayon execution on the hot paths. Without the
//! `parallel` feature both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pbc_core::cdf::{ensemble_to_cdf_with, Provenance};
use pbc_core::climatology::observed_thresholds_with;
use pbc_core::griddata::{generate_synthetic_world, BiasProfile, SynthConfig, SyntheticWorld};
use pbc_core::pipeline::{prepare_replay, replay_prepared, PipelineConfig, ReplayInputs, ScoringSettings};
use pbc_core::projection::project_to_cdf_with;
use pbc_core::{CalendarDate, Exec, GridSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn world(n_lat: usize, n_lon: usize) -> SyntheticWorld {
    let mut cfg = SynthConfig::new(
        7,
        GridSpec::patch(60.0, 0.0, n_lat, n_lon).unwrap(),
        23,
        BiasProfile::constant(1.0),
    );
    cfg.members = 11;
    cfg.hindcast_members = 5;
    generate_synthetic_world(&cfg).unwrap()
}

fn kernels(c: &mut Criterion) {
    let w = world(20, 40);
    let dates = w.forecasts.target_dates().to_vec();
    let thr = observed_thresholds_with(Exec::Sequential, &w.observations, &dates, 5, 20).unwrap();
    let raw = ensemble_to_cdf_with(Exec::Sequential, &w.forecasts, &thr).unwrap();
    // push every CDF off the feasible set so projection has work to do
    let noisy = raw
        .with_values(
            Provenance::Custom,
            raw.values()
                .iter()
                .enumerate()
                .map(|(i, v)| v + if i % 2 == 0 { 0.3 } else { -0.3 })
                .collect(),
        )
        .unwrap();

    let mut g = c.benchmark_group("kernels");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("observed_thresholds", name), &exec, |b, &e| {
            b.iter(|| observed_thresholds_with(e, &w.observations, black_box(&dates), 5, 20).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("ensemble_to_cdf", name), &exec, |b, &e| {
            b.iter(|| ensemble_to_cdf_with(e, black_box(&w.forecasts), &thr).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("project_to_cdf", name), &exec, |b, &e| {
            b.iter(|| project_to_cdf_with(e, black_box(&noisy)))
        });
    }
    g.finish();
}

fn replay(c: &mut Criterion) {
    let inputs = ReplayInputs::from_world(&world(6, 10));
    let cfg = PipelineConfig {
        start: Some(CalendarDate::ymd(2022, 3, 1)),
        end: Some(CalendarDate::ymd(2022, 4, 30)),
        scoring: ScoringSettings {
            bootstrap_replicates: 100,
            ..ScoringSettings::default()
        },
        ..PipelineConfig::default()
    };
    let prep = prepare_replay(Exec::Sequential, &inputs, &cfg).unwrap();
    let mut g = c.benchmark_group("replay");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("date_loop", name), &exec, |b, &e| {
            b.iter(|| replay_prepared(e, black_box(&prep)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, replay);
criterion_main!(benches);
