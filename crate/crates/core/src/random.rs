//! Seeded random operators and states for randomized checks.

use rand::Rng;

use crate::operator::{expm, Operator, C64};
use crate::state::DensityMatrix;

fn complex_entry<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random full-rank density matrix `GG†/Tr(GG†)` on `n_qubits`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize) -> DensityMatrix {
    let dim = 1usize << n_qubits;
    let entries: Vec<C64> = (0..dim * dim).map(|_| complex_entry(rng)).collect();
    let g = Operator::from_row_slice(dim, &entries).expect("dimension");
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityMatrix::from_trusted(gg.scale_real(1.0 / tr), "random")
}

/// Random normalized pure state on `n_qubits`.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize) -> DensityMatrix {
    let dim = 1usize << n_qubits;
    let ket: Vec<C64> = (0..dim).map(|_| complex_entry(rng)).collect();
    DensityMatrix::pure(&ket, "random pure").expect("nonzero ket")
}

/// Random Hermitian operator with entries of modulus at most `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Operator {
    let entries: Vec<C64> = (0..dim * dim).map(|_| complex_entry(rng) * scale).collect();
    let m = Operator::from_row_slice(dim, &entries).expect("dimension");
    (&m + &m.adjoint()).scale_real(0.5)
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    expm(&random_hermitian(rng, dim, 3.0), 1.0).expect("Hermitian generator")
}

/// `count` mutually commuting Hermitian unitaries `V D_k V†` with random
/// shared eigenbasis `V` and random `±1` spectra `D_k`.
pub fn random_commuting_observables<R: Rng + ?Sized>(rng: &mut R, dim: usize, count: usize) -> Vec<Operator> {
    let v = random_unitary(rng, dim);
    (0..count)
        .map(|_| {
            let diag: Vec<f64> = (0..dim).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let d = Operator::from_diagonal(&diag).expect("dimension");
            &(&v * &d) * &v.adjoint()
        })
        .collect()
}
