use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plasmashell::scattering::phase_derivative_terms;
use plasmashell::{
    entropy_raw, find_resonance, phase_shift_derivative, riccati_j, riccati_y, Polarization,
    ShellParams,
};

fn riccati(c: &mut Criterion) {
    let mut group = c.benchmark_group("riccati");
    for ell in [1u32, 10, 60] {
        group.bench_with_input(BenchmarkId::new("j_and_y", ell), &ell, |b, &ell| {
            b.iter(|| {
                let j = riccati_j(ell, black_box(2.5)).unwrap();
                let y = riccati_y(ell, black_box(2.5)).unwrap();
                j.value * y.derivative
            })
        });
    }
    group.finish();
}

fn phases(c: &mut Criterion) {
    let p = ShellParams::new(0.05, 1.0).unwrap();
    c.bench_function("phase_derivative/tm_l4", |b| {
        b.iter(|| phase_shift_derivative(Polarization::Tm, 4, black_box(0.3328), &p).unwrap())
    });
    c.bench_function("phase_derivative/terms_to_40", |b| {
        b.iter(|| phase_derivative_terms(black_box(1.7), &p, 40).unwrap())
    });
    c.bench_function("find_resonance/l7", |b| {
        b.iter(|| find_resonance(black_box(7), &p, None).unwrap())
    });
}

fn entropy(c: &mut Criterion) {
    let mut group = c.benchmark_group("entropy_raw");
    group.sample_size(10);
    for (omega, t) in [(5.0, 0.1), (0.05, 0.0105), (0.001, 2e-4)] {
        let p = ShellParams::new(omega, 1.0).unwrap();
        group.bench_function(format!("omega={omega},T={t}"), |b| {
            b.iter(|| entropy_raw(black_box(t), &p, 1e-8).unwrap().s_raw)
        });
    }
    group.finish();
}

criterion_group!(benches, riccati, phases, entropy);
criterion_main!(benches);
