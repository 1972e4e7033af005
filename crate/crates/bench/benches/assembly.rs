use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bemtrans::assembly::{assemble_boundary_operator, AssemblyOptions, OperatorKind};
use bemtrans::C64;
use bemtrans_bench::sphere_space;

fn dense_operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    let opts = AssemblyOptions::default();
    for s in [1u32, 2, 3] {
        let space = sphere_space(s);
        for kind in [OperatorKind::V, OperatorKind::K, OperatorKind::D] {
            g.bench_with_input(BenchmarkId::new(kind.label(), space.dof_count()), &space, |b, sp| {
                b.iter(|| assemble_boundary_operator(kind, C64::new(2.0, 0.0), sp, sp, &opts).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, dense_operators);
criterion_main!(benches);
