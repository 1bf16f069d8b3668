//! Entropic quantities on classical-quantum states: von Neumann entropy,
//! conditional entropy, Holevo mutual information, coherent information.
//!
//! All logarithms are base 2; rates are in bits.

use crate::channels::{validate_distribution, CqWiretapChannel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, ComplexVector, DensityOperator, SystemLayout};

/// Eigenvalues in `[-EIG_CLIP_TOL, 0]` are clipped to zero before taking
/// logarithms; anything more negative is an error.
pub const EIG_CLIP_TOL: f64 = 1e-10;
/// Eigenvalues below this threshold contribute zero entropy (0·log 0 := 0).
pub const EIG_ZERO_TOL: f64 = 1e-15;
/// Agreement required between the two conditional-entropy routes.
pub const DUAL_ROUTE_TOL: f64 = 1e-9;

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > EIG_ZERO_TOL)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Von Neumann entropy `H(ρ) = -tr ρ log₂ ρ` of a unit-trace Hermitian
/// matrix.
pub fn von_neumann_entropy_matrix(rho: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(rho)?;
    let mut clipped = Vec::with_capacity(eig.values.len());
    for &l in &eig.values {
        if l < -EIG_CLIP_TOL {
            return Err(Error::InvalidDensity {
                context: "entropy argument".to_string(),
                detail: format!("negative eigenvalue {l:.3e}"),
            });
        }
        clipped.push(l.max(0.0));
    }
    Ok(shannon_entropy(&clipped))
}

/// Von Neumann entropy of a density operator.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    von_neumann_entropy_matrix(rho.matrix())
}

// ---------------------------------------------------------------------------
// CqState
// ---------------------------------------------------------------------------

/// Classical-quantum state `ρ^{XQ} = Σ_x p(x)|x⟩⟨x| ⊗ ρ_x` given by its
/// ensemble.
#[derive(Debug, Clone)]
pub struct CqState {
    probs: Vec<f64>,
    states: Vec<ComplexMatrix>,
    dim_q: usize,
}

impl CqState {
    pub fn new(probs: Vec<f64>, states: Vec<ComplexMatrix>) -> Result<Self> {
        validate_distribution(&probs, states.len(), "cq state")?;
        let dim_q = states
            .first()
            .map(ComplexMatrix::rows)
            .ok_or_else(|| Error::InvalidArgument("cq state needs at least one branch".into()))?;
        for (x, s) in states.iter().enumerate() {
            if s.rows() != dim_q || s.cols() != dim_q {
                return Err(Error::shape(
                    format!("cq branch {x}"),
                    format!("{dim_q}x{dim_q}"),
                    format!("{}x{}", s.rows(), s.cols()),
                ));
            }
            let tr = s.trace().re;
            if (tr - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDensity {
                    context: format!("cq branch {x}"),
                    detail: format!("trace {tr:.12} differs from 1"),
                });
            }
        }
        Ok(CqState {
            probs,
            states,
            dim_q,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[ComplexMatrix] {
        &self.states
    }

    pub fn dim_q(&self) -> usize {
        self.dim_q
    }

    /// Average quantum marginal `ρ^Q = Σ_x p(x) ρ_x`.
    pub fn average_state(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim_q, self.dim_q);
        for (s, &w) in self.states.iter().zip(&self.probs) {
            acc = acc.add(&s.scale_real(w));
        }
        acc
    }

    /// Materialized enlarged-Hilbert-space representation on `X ⊗ Q`.
    pub fn joint_matrix(&self) -> ComplexMatrix {
        let nx = self.probs.len();
        let mut joint = ComplexMatrix::zeros(nx * self.dim_q, nx * self.dim_q);
        for (x, (s, &w)) in self.states.iter().zip(&self.probs).enumerate() {
            let proj = ComplexVector::basis(nx, x);
            joint = joint.add(&proj.outer(&proj).tensor(&s.scale_real(w)));
        }
        joint
    }
}

/// Conditional entropy `H(Q|X)` of a cq state.
///
/// Computed as the ensemble average `Σ_x p(x) H(ρ_x)` and cross-checked
/// against the chain-rule route `H(QX) − H(X)` on the materialized joint
/// state; disagreement beyond 1e-9 is reported as an error.
pub fn conditional_entropy(state: &CqState) -> Result<f64> {
    let averaged: f64 = state
        .probs()
        .iter()
        .zip(state.states())
        .filter(|(&p, _)| p > EIG_ZERO_TOL)
        .map(|(&p, rho)| Ok(p * von_neumann_entropy_matrix(rho)?))
        .sum::<Result<f64>>()?;
    let h_joint = von_neumann_entropy_matrix(&state.joint_matrix())?;
    let h_x = shannon_entropy(state.probs());
    let chain = h_joint - h_x;
    if (averaged - chain).abs() > DUAL_ROUTE_TOL {
        return Err(Error::Inconsistent {
            context: "conditional entropy".to_string(),
            detail: format!(
                "averaging route {averaged:.12} vs chain-rule route {chain:.12}"
            ),
        });
    }
    Ok(averaged)
}

/// Holevo mutual information `I(X;Q) = H(Q) − H(Q|X)` of a cq state.
pub fn mutual_information(state: &CqState) -> Result<f64> {
    let h_avg = von_neumann_entropy_matrix(&state.average_state())?;
    let h_cond = conditional_entropy(state)?;
    let info = h_avg - h_cond;
    let cap = shannon_entropy(state.probs()).min((state.dim_q() as f64).log2());
    if !(-DUAL_ROUTE_TOL..=cap + DUAL_ROUTE_TOL).contains(&info) {
        return Err(Error::Inconsistent {
            context: "mutual information".to_string(),
            detail: format!("I = {info:.12} outside [0, {cap:.12}]"),
        });
    }
    Ok(info.max(0.0))
}

/// `(I(X;B), I(X;E))` of a wiretap channel at input distribution `p`.
pub fn holevo_pair(channel: &CqWiretapChannel, p: &[f64]) -> Result<(f64, f64)> {
    validate_distribution(p, channel.alphabet_len(), "holevo_pair distribution")?;
    let bob = CqState::new(p.to_vec(), (0..channel.alphabet_len())
        .map(|x| channel.bob_state(x).clone())
        .collect())?;
    let eve = CqState::new(p.to_vec(), (0..channel.alphabet_len())
        .map(|x| channel.eve_state(x).clone())
        .collect())?;
    Ok((mutual_information(&bob)?, mutual_information(&eve)?))
}

/// Quantum mutual information `I(A;B) = H(A) + H(B) − H(AB)` between two
/// groups of subsystems of a (possibly larger) state.
pub fn quantum_mutual_information(
    rho: &DensityOperator,
    part_a: &[&str],
    part_b: &[&str],
) -> Result<f64> {
    let mut joint_labels: Vec<&str> = part_a.to_vec();
    joint_labels.extend_from_slice(part_b);
    let h_a = von_neumann_entropy(&rho.partial_trace(part_a)?)?;
    let h_b = von_neumann_entropy(&rho.partial_trace(part_b)?)?;
    let h_ab = von_neumann_entropy(&rho.partial_trace(&joint_labels)?)?;
    Ok(h_a + h_b - h_ab)
}

/// Coherent information `I_c(A⟩B) = H(B) − H(AB)` of a pure tripartite
/// state on systems labeled `A`, `B`, `E`.
///
/// Requires global purity `tr ρ² ≥ 1 − 1e-9`; on pure inputs the identity
/// `2 I_c = I(A;B) − I(A;E)` holds up to numerical error.
pub fn coherent_information(rho_abe: &DensityOperator) -> Result<f64> {
    let purity = rho_abe.purity();
    if purity < 1.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "coherent information needs a pure global state: tr rho^2 = {purity:.12}"
        )));
    }
    for label in ["A", "B", "E"] {
        if rho_abe.layout().dim_of(label).is_none() {
            return Err(Error::UnknownSystem {
                label: label.to_string(),
                available: rho_abe.layout().labels().join(", "),
            });
        }
    }
    let h_b = von_neumann_entropy(&rho_abe.partial_trace(&["B"])?)?;
    let h_ab = von_neumann_entropy(&rho_abe.partial_trace(&["A", "B"])?)?;
    Ok(h_b - h_ab)
}

/// The pure state `(I_A ⊗ V)|Φ⟩^{AA′}` obtained by feeding half of a
/// maximally entangled pair through an isometric extension, on `A ⊗ B ⊗ E`.
pub fn maximally_entangled_channel_state(
    v: &crate::channels::IsometricExtension,
) -> Result<DensityOperator> {
    let d = v.dim_in();
    let out_dim = v.matrix().rows();
    let scale = 1.0 / (d as f64).sqrt();
    let mut amps = vec![crate::linalg::Complex64::new(0.0, 0.0); d * out_dim];
    for i in 0..d {
        for r in 0..out_dim {
            amps[i * out_dim + r] = v.matrix().get(r, i) * scale;
        }
    }
    let layout = SystemLayout::new(vec![
        ("A".to_string(), d),
        ("B".to_string(), v.dim_b()),
        ("E".to_string(), v.dim_e()),
    ])?;
    DensityOperator::from_pure(&ComplexVector::new(amps), layout, "purified channel state")
}
