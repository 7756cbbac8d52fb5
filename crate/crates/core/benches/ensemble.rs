//! Path ensembles through the rayon map and the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use levy_emm::girsanov::density_process;
use levy_emm::emm::GirsanovKernelH2;
use levy_emm::kernel::Kernel;
use levy_emm::levy::{LevyMeasure, LevyTriplet, TruncationFunction};
use levy_emm::par::{map_paths_parallel, map_paths_sequential};
use levy_emm::sim::{moving_average, LevySimulator, SimConfig, SmallJumpMode};

fn ensemble(c: &mut Criterion) {
    let triplet = LevyTriplet::new(
        0.0,
        LevyMeasure::discrete(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap(),
        0.0,
        TruncationFunction::inside(0.5).unwrap(),
        true,
    )
    .unwrap();
    let kernel = Kernel::gamma(1.5).unwrap();
    let alpha = GirsanovKernelH2::new(&triplet, 0.5).unwrap();
    let cfg = SimConfig {
        horizon: 1.0,
        past: 2.0,
        dt: 0.01,
        eps_jump: 0.5,
        n_paths: 256,
        seed: 1,
        small_jump_mode: SmallJumpMode::DriftOnly,
    };
    let sim = LevySimulator::new(&triplet, &cfg).unwrap();
    let path = |_: u64, rng: &mut levy_emm::par::PathRng| {
        let ma = moving_average(&kernel, &sim.simulate(rng)).unwrap();
        density_process(&alpha, &ma).map(|d| d.terminal()).unwrap_or(f64::NAN)
    };

    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for n in [64usize, 256] {
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_paths_sequential(n, 7, path)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(map_paths_parallel(n, 7, path)))
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
