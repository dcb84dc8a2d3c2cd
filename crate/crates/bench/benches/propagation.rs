use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use stap_core::dynamics::{propagate_density, propagate_state, DensityMatrix, TimeGrid};
use stap_core::model::{
    atom_cavity_coupling, closed_space, dissipative_space, hamiltonian_apf, jump_operators,
    special_states, ModelParams,
};
use stap_core::observables::Probe;
use stap_core::pulses::{CddPulse, PulseSchedule};
use stap_core::eigh;

fn spectrum(c: &mut Criterion) {
    let space = closed_space();
    let h = atom_cavity_coupling(1.0, &space).unwrap().matrix;
    c.bench_function("eigh 18x18 coupling", |b| {
        b.iter_batched(|| h.clone(), |m| eigh(black_box(&m)).unwrap(), BatchSize::SmallInput)
    });
}

fn closed(c: &mut Criterion) {
    let space = closed_space();
    let st = special_states(&space).unwrap();
    let p = ModelParams::new(1.0, 3.0, 0.0, 0.0).unwrap();
    let pulse = CddPulse::new(PulseSchedule::default_preset(0.2, 40.0).unwrap(), 3.0).unwrap();
    let h = hamiltonian_apf(&p, &pulse, &space).unwrap();
    let probe = Probe::scheme(&st);
    let grid = TimeGrid::for_duration(40.0).unwrap();
    c.bench_function("closed stap tf=40", |b| {
        b.iter(|| propagate_state(&h, &st.psi1, black_box(&grid), &probe).unwrap())
    });
}

fn open(c: &mut Criterion) {
    let space = dissipative_space();
    let st = special_states(&space).unwrap();
    let p = ModelParams::new(1.0, 3.0, 0.05, 0.05).unwrap();
    let pulse = CddPulse::new(PulseSchedule::default_preset(0.2, 40.0).unwrap(), 3.0).unwrap();
    let h = hamiltonian_apf(&p, &pulse, &space).unwrap();
    let jumps = jump_operators(&p, &space).unwrap();
    let rho0 = DensityMatrix::from_ket(&st.psi1);
    let probe = Probe::scheme(&st);
    let grid = TimeGrid::for_duration(40.0).unwrap();
    let mut g = c.benchmark_group("lindblad");
    g.sample_size(10);
    g.bench_function("open stap tf=40", |b| {
        b.iter(|| propagate_density(&h, &jumps, &rho0, black_box(&grid), &probe).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectrum, closed, open);
criterion_main!(benches);
