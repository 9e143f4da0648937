use criterion::{criterion_group, criterion_main, Criterion};
use fsvi::scg::FnObjective;
use fsvi::{scg_maximise, ScgOptions};
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

fn bench_scg(c: &mut Criterion) {
    let n = 20;
    let b = DMatrix::from_fn(n, n, |i, j| ((i * 13 + j * 7) % 11) as f64 / 11.0 - 0.5);
    let a = &b * b.transpose() + DMatrix::identity(n, n);
    let a2 = a.clone();
    let obj = FnObjective {
        value: move |x: &DVector<f64>| -0.5 * x.dot(&(&a * x)) + x.sum(),
        gradient: move |x: &DVector<f64>| -(&a2 * x) + DVector::from_element(x.len(), 1.0),
    };
    let opts = ScgOptions::with_iters(200);
    c.bench_function("scg_quadratic_20d", |bch| {
        bch.iter(|| scg_maximise(&obj, black_box(DVector::zeros(n)), &opts).unwrap())
    });
}

criterion_group!(benches, bench_scg);
criterion_main!(benches);
