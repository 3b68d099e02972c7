use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use nvcavity_bench::{offsets, resolvent_params, two_spin_params};
use nvcavity_core::cumulant::{exact_oracle, integrate_to_steady, HierarchyConfig, MomentState};
use nvcavity_core::maser::{emission_spectrum, PumpedParams};
use nvcavity_core::oscillator::{transmission_map, OscillatorSet};
use nvcavity_core::resolvent::{level_shift, transmission_gcc, CouplingDensity};
use nvcavity_core::units::{hz, mhz};
use nvcavity_core::ThermalBath;

fn oscillator(c: &mut Criterion) {
    let p = resolvent_params();
    let set = OscillatorSet::resonant(&p, mhz(10.92));
    let probe = offsets(p.omega_c, 30.0, 121);
    let tuning = offsets(p.omega_c, 30.0, 41);
    c.bench_function("transmission_map 121x41", |b| {
        b.iter(|| transmission_map(&set, &p, black_box(&probe), &tuning).unwrap())
    });
}

fn resolvent(c: &mut Criterion) {
    let p = resolvent_params();
    let d = CouplingDensity::q_gaussian(1.389, mhz(12.54), p.omega_c, p.coupling_weight()).unwrap();
    c.bench_function("level_shift q-Gaussian", |b| {
        b.iter(|| level_shift(&d, black_box(p.omega_c + mhz(3.0)), p.gamma_hom).unwrap())
    });
    let probe = offsets(p.omega_c, 30.0, 201);
    c.bench_function("transmission_gcc 201 points", |b| {
        b.iter(|| transmission_gcc(&d, &p, black_box(&probe), p.omega_c).unwrap())
    });
}

fn cumulant(c: &mut Criterion) {
    let p = two_spin_params();
    let bath = ThermalBath::new(0.05).unwrap();
    let init = MomentState::thermal(0.0, 0.0);
    c.bench_function("hierarchy steady state", |b| {
        b.iter(|| integrate_to_steady(&HierarchyConfig::default(), &p, p.omega_c, bath, black_box(p.omega_c), &init).unwrap())
    });
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("exact oracle N=2 cutoff 5", |b| {
        b.iter(|| exact_oracle(2, 5, &p, p.omega_c, bath, black_box(p.omega_c)).unwrap())
    });
    g.finish();
}

fn maser(c: &mut Criterion) {
    let mut system = resolvent_params();
    system.kappa = mhz(1.0);
    system.g = hz(10.0);
    system.gamma_p = hz(1e4);
    let p = PumpedParams { system, w: hz(1e6), delta: 0.0, bath: ThermalBath::zero() };
    c.bench_function("maser emission spectrum", |b| b.iter(|| emission_spectrum(black_box(&p)).unwrap()));
}

criterion_group!(benches, oscillator, resolvent, cumulant, maser);
criterion_main!(benches);
