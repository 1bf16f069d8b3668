//! Cross-module invariants at larger dimensions than the unit tests touch.

use pfp_core::linalg::{hermitian_eig, ComplexMatrix};
use pfp_core::rng::CounterRng;
use pfp_core::sample;

#[test]
fn eigendecomposition_reconstructs_up_to_dim_256() {
    let mut rng = CounterRng::new(2024);
    for &dim in &[2usize, 3, 7, 16, 64, 256] {
        let m = sample::random_hermitian(dim, &mut rng);
        let eig = hermitian_eig(&m).unwrap();
        let err = eig.reconstruct().sub(&m).frobenius_norm();
        assert!(err < 1e-9, "dim {dim}: reconstruction error {err:.3e}");
        let unit = eig
            .vectors
            .adjoint()
            .matmul(&eig.vectors)
            .unwrap()
            .sub(&ComplexMatrix::identity(dim))
            .frobenius_norm();
        assert!(unit < 1e-9, "dim {dim}: unitarity error {unit:.3e}");
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1], "eigenvalues sorted descending");
        }
    }
}

#[test]
fn jacobi_handles_degenerate_spectra_deterministically() {
    let mut rng = CounterRng::new(77);
    // Projector with a 3-fold degenerate unit eigenvalue.
    let u = hermitian_eig(&sample::random_hermitian(5, &mut rng))
        .unwrap()
        .vectors;
    let d = ComplexMatrix::from_real_diag(&[1.0, 1.0, 1.0, 0.25, 0.0]);
    let m = u.matmul(&d).unwrap().matmul(&u.adjoint()).unwrap().hermitized();
    let a = hermitian_eig(&m).unwrap();
    let b = hermitian_eig(&m).unwrap();
    assert_eq!(a.values, b.values);
    assert!(a.vectors.approx_eq(&b.vectors, 0.0), "basis is reproducible");
    let err = a.reconstruct().sub(&m).frobenius_norm();
    assert!(err < 1e-9);
}
