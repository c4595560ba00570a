//! Parallel vs sequential on the two hot loops: the cascade over a base grid
//! and the curvature stencil. With the `parallel` feature both run once on the
//! default rayon pool and once on a one-thread pool; without it only the
//! sequential fallback is measured.

use criterion::{criterion_group, criterion_main, Criterion};
use hodgelab::bundle::{build_frame, curvature};
use hodgelab::family::{FamilyScenario, FamilyStencil};
use hodgelab::finsler::{run_cascade, BaseGrid};
use hodgelab::par;
use hodgelab::C64;
use std::sync::Arc;

fn cascade(scn: &FamilyScenario, grid: &BaseGrid) {
    run_cascade(scn, grid, 1).unwrap();
}

fn stencil(scn: &FamilyScenario) {
    let st = Arc::new(FamilyStencil::new(scn, 1e-2).unwrap());
    let frame = build_frame(st, 0, 1, false).unwrap();
    curvature(&frame, C64::new(1.0, 0.0)).unwrap();
}

fn modes() -> Vec<(&'static str, Option<usize>)> {
    if par::is_parallel() {
        vec![("parallel", None), ("one-thread", Some(1))]
    } else {
        vec![("sequential", None)]
    }
}

fn run_in(threads: Option<usize>, f: impl FnOnce() + Send) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f);
        return;
    }
    let _ = threads;
    f();
}

fn bench(c: &mut Criterion) {
    let cy = FamilyScenario::from_catalog("elliptic-cy", 16).unwrap();
    let grid = BaseGrid::default_for(&cy, 9).unwrap();
    let neg = FamilyScenario::from_catalog("elliptic-neg-d1", 12).unwrap();

    let mut g = c.benchmark_group("cascade 9x9, N=16");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| b.iter(|| run_in(threads, || cascade(&cy, &grid))));
    }
    g.finish();

    let mut g = c.benchmark_group("curvature stencil, N=12");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| b.iter(|| run_in(threads, || stencil(&neg))));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
