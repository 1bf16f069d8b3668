//! Dense complex linear algebra for Hermitian operators on tensor-product
//! spaces.
//!
//! Everything here is deterministic: the Hermitian eigensolver is a cyclic
//! Jacobi iteration with a fixed pivot order, so eigenbases are reproducible
//! across runs and platforms. Matrices are row-major with `Complex64`
//! entries; subsystem structure is carried separately by [`SystemLayout`].

pub use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Density operators: smallest admissible eigenvalue.
pub const DENSITY_EIG_TOL: f64 = 1e-10;
/// Density operators: admissible deviation of the trace from one.
pub const DENSITY_TRACE_TOL: f64 = 1e-10;
/// Jacobi sweep convergence threshold on the off-diagonal Frobenius norm,
/// relative to the scale of the input.
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

// ---------------------------------------------------------------------------
// ComplexVector
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    pub fn new(data: Vec<Complex64>) -> Self {
        ComplexVector { data }
    }

    pub fn from_real(reals: &[f64]) -> Self {
        ComplexVector {
            data: reals.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
        }
    }

    /// Computational basis state `|index⟩` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut data = vec![ZERO; dim];
        data[index] = ONE;
        ComplexVector { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        ComplexVector {
            data: self.data.iter().map(|c| c / n).collect(),
        }
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &ComplexVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Outer product `|self⟩⟨other|`.
    pub fn outer(&self, other: &ComplexVector) -> ComplexMatrix {
        let rows = self.dim();
        let cols = other.dim();
        let mut data = Vec::with_capacity(rows * cols);
        for a in &self.data {
            for b in &other.data {
                data.push(a * b.conj());
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Kronecker product `|self⟩ ⊗ |other⟩`.
    pub fn tensor(&self, other: &ComplexVector) -> ComplexVector {
        let mut data = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        ComplexVector { data }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexVector {
        ComplexVector {
            data: self.data.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), other.dim());
        ComplexVector {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// ComplexMatrix
// ---------------------------------------------------------------------------

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix construction",
                format!("{} entries", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Square matrix with the given real diagonal.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Build from rows of `[re, im]` pairs (the channel-file wire format).
    pub fn from_re_im_rows(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::shape(
                    format!("matrix row {i}"),
                    format!("{ncols} entries"),
                    format!("{}", row.len()),
                ));
            }
            for &[re, im] in row {
                data.push(Complex64::new(re, im));
            }
        }
        ComplexMatrix::new(nrows, ncols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> ComplexMatrix {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matrix multiplication",
                format!("inner dimension {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                let lhs = i * other.cols;
                let rhs = k * other.cols;
                for j in 0..other.cols {
                    out.data[lhs + j] += a * other.data[rhs + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let base = i * self.cols;
            let mut acc = ZERO;
            for j in 0..self.cols {
                acc += self.data[base + j] * v.data[j];
            }
            out.push(acc);
        }
        ComplexVector { data: out }
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> Result<Complex64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::shape(
                "trace of product",
                format!("{}x{} times {}x{}", self.rows, self.cols, other.cols, other.rows),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut acc = ZERO;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += self.get(i, j) * other.get(j, i);
            }
        }
        Ok(acc)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = ComplexMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    let dst = (i * other.rows + k) * cols + j * other.cols;
                    let src = k * other.cols;
                    for l in 0..other.cols {
                        out.data[dst + l] = a * other.data[src + l];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `self = self†`.
    pub fn max_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..=i {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= tol
    }

    /// `(M + M†)/2`, used to suppress asymmetry drift after checks pass.
    pub fn hermitized(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    fn off_diagonal_norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    acc += self.data[i * self.cols + j].norm_sqr();
                }
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Result of [`hermitian_eig`]: `values` descending, eigenvectors as the
/// columns of `vectors`, so `M = V diag(λ) V†`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Reassemble `V diag(λ) V†`; mostly used by verification code.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| v.get(i, k) * self.values[k] * v.get(j, k).conj())
                .sum()
        })
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Rejects inputs whose asymmetry exceeds [`HERMITICITY_TOL`]; accepted
/// inputs are symmetrized before iterating. Convergence is declared when the
/// off-diagonal Frobenius norm drops below `1e-13` relative to the matrix
/// scale, capped at 100 sweeps.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::shape(
            "hermitian_eig",
            "square matrix".to_string(),
            format!("{}x{}", m.rows, m.cols),
        ));
    }
    let asym = m.max_asymmetry();
    if asym > HERMITICITY_TOL {
        return Err(Error::NotHermitian { max_asymmetry: asym });
    }
    let n = m.rows;
    let mut a = m.hermitized();
    let mut v = ComplexMatrix::identity(n);
    if n > 1 {
        let threshold = JACOBI_OFF_TOL * a.frobenius_norm().max(1.0);
        let threshold_sqr = threshold * threshold;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            if a.off_diagonal_norm_sqr() <= threshold_sqr {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    // Stable sort keeps the solver's deterministic basis for degenerate spectra.
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(EigenDecomposition { values, vectors })
}

/// One Jacobi rotation zeroing `a[p][q]` (and `a[q][p]`), accumulated into `v`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let tau = (a.get(q, q).re - a.get(p, p).re) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = c * t;
    let phase = apq / r;
    let s_phase = phase * s;
    let s_phase_conj = phase.conj() * s;

    let n = a.rows;
    // Column update: A <- A R with R[p][p]=c, R[p][q]=s·phase,
    // R[q][p]=-s·conj(phase), R[q][q]=c.
    for i in 0..n {
        let row = i * n;
        let ap = a.data[row + p];
        let aq = a.data[row + q];
        a.data[row + p] = ap * c - aq * s_phase_conj;
        a.data[row + q] = ap * s_phase + aq * c;
    }
    // Row update: A <- R† A.
    for j in 0..n {
        let bp = a.data[p * n + j];
        let bq = a.data[q * n + j];
        a.data[p * n + j] = bp * c - bq * s_phase;
        a.data[q * n + j] = bp * s_phase_conj + bq * c;
    }
    // Pin the target entries to exactly zero and the diagonal to real.
    a.data[p * n + q] = ZERO;
    a.data[q * n + p] = ZERO;
    a.data[p * n + p] = Complex64::new(a.data[p * n + p].re, 0.0);
    a.data[q * n + q] = Complex64::new(a.data[q * n + q].re, 0.0);

    for i in 0..n {
        let row = i * n;
        let vp = v.data[row + p];
        let vq = v.data[row + q];
        v.data[row + p] = vp * c - vq * s_phase_conj;
        v.data[row + q] = vp * s_phase + vq * c;
    }
}

/// Trace-norm distance `‖a − b‖₁ = tr|a − b|` between Hermitian operators.
pub fn trace_norm_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(Error::shape(
            "trace_norm_distance",
            format!("{}x{}", a.rows, a.cols),
            format!("{}x{}", b.rows, b.cols),
        ));
    }
    let diff = a.sub(b);
    let eig = hermitian_eig(&diff)?;
    Ok(eig.values.iter().map(|l| l.abs()).sum())
}

/// Apply a Hermitian function through the eigendecomposition: `V f(λ) V†`.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let n = eig.values.len();
    let v = &eig.vectors;
    let fv: Vec<f64> = eig.values.iter().map(|&l| f(l)).collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v.get(i, k) * fv[k] * v.get(j, k).conj()).sum()
    }))
}

// ---------------------------------------------------------------------------
// SystemLayout, partial trace, factor permutation
// ---------------------------------------------------------------------------

/// Ordered list of labeled tensor factors; the first factor is the most
/// significant index digit (row-major convention).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemLayout {
    factors: Vec<(String, usize)>,
}

impl SystemLayout {
    pub fn new(factors: Vec<(impl Into<String>, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (label, dim) in &factors {
            if *dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "factor `{label}` has dimension zero"
                )));
            }
        }
        for i in 0..factors.len() {
            for j in i + 1..factors.len() {
                if factors[i].0 == factors[j].0 {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate system label `{}`",
                        factors[i].0
                    )));
                }
            }
        }
        Ok(SystemLayout { factors })
    }

    /// Single-factor layout.
    pub fn single(label: impl Into<String>, dim: usize) -> Self {
        SystemLayout {
            factors: vec![(label.into(), dim)],
        }
    }

    /// Standard two-factor receiver/eavesdropper layout.
    pub fn bipartite_be(dim_b: usize, dim_e: usize) -> Self {
        SystemLayout {
            factors: vec![("B".to_string(), dim_b), ("E".to_string(), dim_e)],
        }
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.factors.iter().find(|(l, _)| l == label).map(|&(_, d)| d)
    }

    fn position_of(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownSystem {
                label: label.to_string(),
                available: self.labels().join(", "),
            })
    }

    /// Row-major strides of each factor.
    fn strides(&self) -> Vec<usize> {
        let n = self.factors.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].1;
        }
        strides
    }

    /// Concatenate two layouts (labels must stay unique).
    pub fn concat(&self, other: &SystemLayout) -> Result<SystemLayout> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        SystemLayout::new(factors)
    }
}

/// Enumerate the flat offsets spanned by a subset of factors.
fn subset_offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let count: usize = dims.iter().product();
    let mut offsets = Vec::with_capacity(count);
    let mut digits = vec![0usize; dims.len()];
    for _ in 0..count {
        offsets.push(digits.iter().zip(strides).map(|(d, s)| d * s).sum());
        for k in (0..dims.len()).rev() {
            digits[k] += 1;
            if digits[k] < dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    if dims.is_empty() {
        vec![0]
    } else {
        offsets
    }
}

/// Partial trace keeping the listed factors (in their layout order).
///
/// An empty `keep` reduces to the scalar trace as a 1×1 matrix.
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    keep: &[&str],
) -> Result<(ComplexMatrix, SystemLayout)> {
    if !m.is_square() || m.rows() != layout.total_dim() {
        return Err(Error::shape(
            "partial_trace",
            format!("square matrix of dim {}", layout.total_dim()),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let mut keep_positions = Vec::with_capacity(keep.len());
    for label in keep {
        keep_positions.push(layout.position_of(label)?);
    }
    let strides = layout.strides();
    let keep_dims: Vec<usize> = keep_positions.iter().map(|&i| layout.factors[i].1).collect();
    let keep_strides: Vec<usize> = keep_positions.iter().map(|&i| strides[i]).collect();
    let traced: Vec<usize> = (0..layout.factors.len())
        .filter(|i| !keep_positions.contains(i))
        .collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| layout.factors[i].1).collect();
    let traced_strides: Vec<usize> = traced.iter().map(|&i| strides[i]).collect();

    let keep_offsets = subset_offsets(&keep_dims, &keep_strides);
    let traced_offsets = subset_offsets(&traced_dims, &traced_strides);

    let k = keep_offsets.len();
    let dim = m.rows();
    let mut out = ComplexMatrix::zeros(k, k);
    for (i, &ri) in keep_offsets.iter().enumerate() {
        for (j, &cj) in keep_offsets.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_offsets {
                acc += m.data[(ri + t) * dim + (cj + t)];
            }
            out.data[i * k + j] = acc;
        }
    }
    let new_layout = SystemLayout::new(
        keep_positions
            .iter()
            .map(|&i| (layout.factors[i].0.clone(), layout.factors[i].1))
            .collect::<Vec<_>>(),
    )?;
    Ok((out, new_layout))
}

/// Reorder tensor factors into `order` (a permutation of the layout labels).
pub fn permute_factors(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    order: &[&str],
) -> Result<(ComplexMatrix, SystemLayout)> {
    if order.len() != layout.factors.len() {
        return Err(Error::InvalidArgument(format!(
            "permutation lists {} factors, layout has {}",
            order.len(),
            layout.factors.len()
        )));
    }
    let mut positions = Vec::with_capacity(order.len());
    for label in order {
        let pos = layout.position_of(label)?;
        if positions.contains(&pos) {
            return Err(Error::InvalidArgument(format!(
                "label `{label}` repeated in permutation"
            )));
        }
        positions.push(pos);
    }
    if !m.is_square() || m.rows() != layout.total_dim() {
        return Err(Error::shape(
            "permute_factors",
            format!("square matrix of dim {}", layout.total_dim()),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let old_strides = layout.strides();
    let new_layout = SystemLayout::new(
        positions
            .iter()
            .map(|&p| (layout.factors[p].0.clone(), layout.factors[p].1))
            .collect::<Vec<_>>(),
    )?;
    let new_strides = new_layout.strides();

    let dim = m.rows();
    // index_map[old_flat] = new_flat
    let mut index_map = vec![0usize; dim];
    for (old, entry) in index_map.iter_mut().enumerate() {
        let mut acc = 0;
        for (k, &p) in positions.iter().enumerate() {
            let digit = (old / old_strides[p]) % layout.factors[p].1;
            acc += digit * new_strides[k];
        }
        *entry = acc;
    }
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            out.data[index_map[r] * dim + index_map[c]] = m.data[r * dim + c];
        }
    }
    Ok((out, new_layout))
}

// ---------------------------------------------------------------------------
// DensityOperator
// ---------------------------------------------------------------------------

/// Positive unit-trace Hermitian operator with labeled subsystem factors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    layout: SystemLayout,
}

impl DensityOperator {
    /// Validate Hermiticity, unit trace, and positivity, then construct.
    ///
    /// `context` names the operator in diagnostics (e.g. a channel symbol).
    pub fn new(matrix: ComplexMatrix, layout: SystemLayout, context: &str) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.total_dim() {
            return Err(Error::shape(
                format!("density operator for {context}"),
                format!("square matrix of dim {}", layout.total_dim()),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        let asym = matrix.max_asymmetry();
        if asym > HERMITICITY_TOL {
            return Err(Error::InvalidDensity {
                context: context.to_string(),
                detail: format!("not Hermitian: max asymmetry {asym:.3e}"),
            });
        }
        let matrix = matrix.hermitized();
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensity {
                context: context.to_string(),
                detail: format!("trace {trace:.12} differs from 1"),
            });
        }
        let eig = hermitian_eig(&matrix)?;
        let min_eig = eig.values.last().copied().unwrap_or(0.0);
        if min_eig < -DENSITY_EIG_TOL {
            return Err(Error::InvalidDensity {
                context: context.to_string(),
                detail: format!("negative eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(DensityOperator { matrix, layout })
    }

    /// Wrap a matrix that is valid by construction (e.g. a tensor product of
    /// validated states). Debug builds still assert the invariants.
    pub(crate) fn trusted(matrix: ComplexMatrix, layout: SystemLayout) -> Self {
        debug_assert!(matrix.is_square() && matrix.rows() == layout.total_dim());
        debug_assert!((matrix.trace().re - 1.0).abs() < 1e-8);
        DensityOperator { matrix, layout }
    }

    /// Rank-one density operator `|ψ⟩⟨ψ|` from a normalized vector.
    pub fn from_pure(state: &ComplexVector, layout: SystemLayout, context: &str) -> Result<Self> {
        if (state.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensity {
                context: context.to_string(),
                detail: format!("pure state norm {:.12} differs from 1", state.norm()),
            });
        }
        if state.dim() != layout.total_dim() {
            return Err(Error::shape(
                format!("pure state for {context}"),
                format!("dim {}", layout.total_dim()),
                format!("{}", state.dim()),
            ));
        }
        Ok(DensityOperator {
            matrix: state.outer(state).hermitized(),
            layout,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        let (m, layout) = partial_trace(&self.matrix, &self.layout, keep)?;
        Ok(DensityOperator::trusted(m.hermitized(), layout))
    }

    /// Tensor product; labels of the two layouts must not clash.
    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(DensityOperator::trusted(
            self.matrix.tensor(&other.matrix),
            layout,
        ))
    }

    /// `tr ρ²` (the squared Frobenius norm, since ρ is Hermitian).
    pub fn purity(&self) -> f64 {
        let f = self.matrix.frobenius_norm();
        f * f
    }
}
