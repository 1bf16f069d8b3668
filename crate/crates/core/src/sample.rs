//! Random operators and channels for simulations and property checks.

use crate::linalg::{Complex64, ComplexMatrix, ComplexVector, hermitian_function};
use crate::rng::CounterRng;

/// Random Hermitian matrix with Gaussian entries, O(1) spectral scale.
pub fn random_hermitian(dim: usize, rng: &mut CounterRng) -> ComplexMatrix {
    let g = random_gaussian_matrix(dim, dim, rng);
    g.add(&g.adjoint()).scale_real(0.5 / (dim as f64).sqrt())
}

/// Random full-rank density matrix `GG† / tr(GG†)`.
pub fn random_density_matrix(dim: usize, rng: &mut CounterRng) -> ComplexMatrix {
    let g = random_gaussian_matrix(dim, dim, rng);
    let gg = g.matmul(&g.adjoint()).expect("square product");
    let trace = gg.trace().re;
    gg.scale_real(1.0 / trace).hermitized()
}

/// Haar-ish random pure state (Gaussian vector, normalized).
pub fn random_pure_state(dim: usize, rng: &mut CounterRng) -> ComplexVector {
    let data: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.next_gaussian(), rng.next_gaussian()))
        .collect();
    ComplexVector::new(data).normalized()
}

fn random_gaussian_matrix(rows: usize, cols: usize, rng: &mut CounterRng) -> ComplexMatrix {
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| Complex64::new(rng.next_gaussian(), rng.next_gaussian()))
        .collect();
    ComplexMatrix::new(rows, cols, data).expect("sized data")
}

/// Random trace-preserving Kraus set: Gaussian blocks renormalized through
/// `T^{-1/2}` where `T = Σ G†G`.
pub fn random_kraus_set(
    dim_out: usize,
    dim_in: usize,
    num_ops: usize,
    rng: &mut CounterRng,
) -> Vec<ComplexMatrix> {
    let blocks: Vec<ComplexMatrix> = (0..num_ops)
        .map(|_| random_gaussian_matrix(dim_out, dim_in, rng))
        .collect();
    let mut total = ComplexMatrix::zeros(dim_in, dim_in);
    for g in &blocks {
        total = total.add(&g.adjoint().matmul(g).expect("square"));
    }
    let inv_root = hermitian_function(&total.hermitized(), |l| {
        if l > 1e-14 { 1.0 / l.sqrt() } else { 0.0 }
    })
    .expect("hermitian by construction");
    blocks
        .iter()
        .map(|g| g.matmul(&inv_root).expect("conforming"))
        .collect()
}
