//! Microbenchmarks for the simulation primitives: statevector gate kernels,
//! Pauli-basis decomposition, and the state-preparation circuits.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qfe_bench::{random_matrix, random_state};
use qfe_core::{
    amplitude_encode, decompose, inner_product, v_block_circuit, Gate, PauliString, VBlockLayout,
};

fn bench_gate_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("gates");
    for &num_qubits in &[4usize, 8, 12] {
        let state = random_state(num_qubits, 11);
        group.bench_with_input(BenchmarkId::new("h", num_qubits), &state, |b, state| {
            let gate = Gate::h(num_qubits / 2);
            b.iter(|| {
                let mut work = state.clone();
                work.apply_gate(black_box(&gate)).unwrap();
                work
            })
        });
        group.bench_with_input(BenchmarkId::new("cx", num_qubits), &state, |b, state| {
            let gate = Gate::cx(0, num_qubits - 1);
            b.iter(|| {
                let mut work = state.clone();
                work.apply_gate(black_box(&gate)).unwrap();
                work
            })
        });
        group.bench_with_input(
            BenchmarkId::new("pauli_string", num_qubits),
            &state,
            |b, state| {
                // A full-weight string touches every qubit.
                let letters = "XYZ".chars().cycle().take(num_qubits).collect::<String>();
                let string = PauliString::parse(&letters).unwrap();
                b.iter(|| {
                    let mut work = state.clone();
                    work.apply_pauli_string(black_box(&string)).unwrap();
                    work
                })
            },
        );
    }
    group.finish();
}

fn bench_inner_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("inner_product");
    for &num_qubits in &[8usize, 12] {
        let left = random_state(num_qubits, 21);
        let right = random_state(num_qubits, 22);
        group.bench_function(BenchmarkId::from_parameter(num_qubits), |b| {
            b.iter(|| inner_product(black_box(&left), black_box(&right)).unwrap())
        });
    }
    group.finish();
}

fn bench_pauli_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("pauli_decompose");
    for &num_qubits in &[2usize, 3, 4] {
        let matrix = random_matrix(1 << num_qubits, 31);
        group.bench_function(BenchmarkId::from_parameter(num_qubits), |b| {
            b.iter(|| decompose(black_box(&matrix)).unwrap())
        });
    }
    group.finish();
}

fn bench_state_preparation(c: &mut Criterion) {
    let mut group = c.benchmark_group("preparation");
    for &num_qubits in &[4usize, 8] {
        let target = random_state(num_qubits, 41);
        group.bench_function(BenchmarkId::new("amplitude_encode", num_qubits), |b| {
            b.iter(|| amplitude_encode(black_box(target.amplitudes())).unwrap())
        });
    }
    for &num_qubits in &[2usize, 3] {
        let layout = VBlockLayout::standard(num_qubits);
        let circuit = v_block_circuit(&layout).unwrap();
        let state = random_state(layout.total_qubits(), 42);
        group.bench_function(BenchmarkId::new("v_block", num_qubits), |b| {
            b.iter(|| {
                let mut work = state.clone();
                circuit.run(black_box(&mut work)).unwrap();
                work
            })
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_gate_kernels,
    bench_inner_product,
    bench_pauli_decompose,
    bench_state_preparation
);
criterion_main!(kernels);
