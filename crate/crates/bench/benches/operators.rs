use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sg_bench::{fixture, vector};
use sg_core::{PrecondKind, Preconditioner, TruncationSet};

fn tmatvec(c: &mut Criterion) {
    let p = fixture(4, 4, 10);
    let op = &p.operator;
    let nb = op.num_blocks();
    let v = vector(op.global_dim());
    let mut w = vec![0.0; v.len()];
    let mut group = c.benchmark_group("tmatvec");
    for lt in [0, 1, 2, 4, 8] {
        let trunc = TruncationSet::standard(4, lt, op.num_coeffs()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(lt), &trunc, |b, t| {
            b.iter(|| op.tmatvec(0..nb, 0..nb, t, black_box(&v), &mut w).unwrap())
        });
    }
    group.finish();
}

fn preconditioners(c: &mut Criterion) {
    let p = fixture(3, 3, 8);
    let op = &p.operator;
    let r = vector(op.global_dim());
    let mut v = vec![0.0; r.len()];
    let mut group = c.benchmark_group("apply");
    group.sample_size(20);
    for kind in PrecondKind::ALL {
        let m = Preconditioner::full(op, kind).unwrap();
        group.bench_function(kind.label(), |b| b.iter(|| m.apply(black_box(&r), &mut v).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, tmatvec, preconditioners);
criterion_main!(benches);
