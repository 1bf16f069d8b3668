//! Wiretap channels with classical input and bipartite quantum output, plus
//! generic Kraus channels and their isometric extensions.
//!
//! A cq wiretap channel maps a symbol `x` to a joint state `σ_x` on the
//! receiver/eavesdropper pair `(B, E)`. Kraus channels model arbitrary
//! quantum channels `A′ → B`; dilating them hands the environment to the
//! eavesdropper, which induces a cq wiretap channel once an input ensemble
//! is fixed. Channel files are JSON; see [`parse_channel`] /
//! [`serialize_channel`].

use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::linalg::{
    permute_factors, Complex64, ComplexMatrix, DensityOperator, SystemLayout,
};

/// Tolerance for Kraus completeness `Σ A†A = I`.
pub const KRAUS_COMPLETENESS_TOL: f64 = 1e-10;
/// Tolerance for probability vectors summing to one.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// CqWiretapChannel
// ---------------------------------------------------------------------------

/// A `{c→qq}` wiretap channel `x ↦ σ_x` on systems `B ⊗ E`.
#[derive(Debug, Clone)]
pub struct CqWiretapChannel {
    symbols: Vec<String>,
    priors: Option<Vec<f64>>,
    outputs: Vec<DensityOperator>,
    bob_states: Vec<ComplexMatrix>,
    eve_states: Vec<ComplexMatrix>,
    dim_b: usize,
    dim_e: usize,
}

impl CqWiretapChannel {
    pub fn new(
        symbols: Vec<String>,
        priors: Option<Vec<f64>>,
        outputs: Vec<DensityOperator>,
        dim_b: usize,
        dim_e: usize,
    ) -> Result<Self> {
        if symbols.is_empty() || symbols.len() != outputs.len() {
            return Err(Error::InvalidArgument(format!(
                "channel needs one output per symbol: {} symbols, {} outputs",
                symbols.len(),
                outputs.len()
            )));
        }
        for (i, out) in outputs.iter().enumerate() {
            if out.dim() != dim_b * dim_e {
                return Err(Error::shape(
                    format!("output for symbol `{}`", symbols[i]),
                    format!("dim {}", dim_b * dim_e),
                    format!("{}", out.dim()),
                ));
            }
        }
        if let Some(p) = &priors {
            validate_distribution(p, symbols.len(), "channel priors")?;
        }
        let mut bob_states = Vec::with_capacity(outputs.len());
        let mut eve_states = Vec::with_capacity(outputs.len());
        for out in &outputs {
            bob_states.push(out.partial_trace(&["B"])?.matrix().clone());
            eve_states.push(out.partial_trace(&["E"])?.matrix().clone());
        }
        Ok(CqWiretapChannel {
            symbols,
            priors,
            outputs,
            bob_states,
            eve_states,
            dim_b,
            dim_e,
        })
    }

    /// Convenience constructor from raw output matrices on `B ⊗ E`.
    pub fn from_matrices(
        symbols: Vec<String>,
        priors: Option<Vec<f64>>,
        outputs: Vec<ComplexMatrix>,
        dim_b: usize,
        dim_e: usize,
    ) -> Result<Self> {
        let layout = SystemLayout::bipartite_be(dim_b, dim_e);
        let mut ops = Vec::with_capacity(outputs.len());
        for (i, m) in outputs.into_iter().enumerate() {
            let context = format!(
                "symbol `{}`",
                symbols.get(i).cloned().unwrap_or_else(|| i.to_string())
            );
            ops.push(DensityOperator::new(m, layout.clone(), &context)?);
        }
        CqWiretapChannel::new(symbols, priors, ops, dim_b, dim_e)
    }

    pub fn alphabet_len(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn output(&self, x: usize) -> &DensityOperator {
        &self.outputs[x]
    }

    /// Receiver marginal `σ_x^B`.
    pub fn bob_state(&self, x: usize) -> &ComplexMatrix {
        &self.bob_states[x]
    }

    /// Eavesdropper marginal `σ_x^E`.
    pub fn eve_state(&self, x: usize) -> &ComplexMatrix {
        &self.eve_states[x]
    }

    pub fn priors(&self) -> Option<&[f64]> {
        self.priors.as_deref()
    }

    /// Channel priors if present, uniform otherwise.
    pub fn default_distribution(&self) -> Vec<f64> {
        match &self.priors {
            Some(p) => p.clone(),
            None => vec![1.0 / self.alphabet_len() as f64; self.alphabet_len()],
        }
    }

    /// Ensemble-average eavesdropper state `Σ_x p(x) σ_x^E`.
    pub fn average_eve_state(&self, p: &[f64]) -> ComplexMatrix {
        average_state(&self.eve_states, p)
    }

    /// Ensemble-average receiver state `Σ_x p(x) σ_x^B`.
    pub fn average_bob_state(&self, p: &[f64]) -> ComplexMatrix {
        average_state(&self.bob_states, p)
    }

    /// Receiver product state for a symbol sequence: `⊗_i σ_{x_i}^B`.
    pub fn bob_sequence_state(&self, seq: &[usize]) -> ComplexMatrix {
        product_state(&self.bob_states, seq)
    }

    /// Eavesdropper product state for a symbol sequence: `⊗_i σ_{x_i}^E`.
    pub fn eve_sequence_state(&self, seq: &[usize]) -> ComplexMatrix {
        product_state(&self.eve_states, seq)
    }

    /// The channel with symbols renamed/reordered by `perm`: symbol `i` of
    /// the new channel is symbol `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<CqWiretapChannel> {
        if perm.len() != self.alphabet_len() {
            return Err(Error::InvalidArgument(
                "permutation length differs from alphabet".into(),
            ));
        }
        let symbols = perm.iter().map(|&i| self.symbols[i].clone()).collect();
        let priors = self
            .priors
            .as_ref()
            .map(|p| perm.iter().map(|&i| p[i]).collect());
        let outputs = perm.iter().map(|&i| self.outputs[i].clone()).collect();
        CqWiretapChannel::new(symbols, priors, outputs, self.dim_b, self.dim_e)
    }

    /// The `n`-fold tensor power as a materialized channel over sequences.
    ///
    /// Outputs are reordered so all receiver factors precede all
    /// eavesdropper factors, giving a bipartite `(B^n, E^n)` channel.
    pub fn tensor_power(&self, n: usize, budget: &Budget) -> Result<CqWiretapChannel> {
        if n == 0 {
            return Err(Error::InvalidArgument("tensor power needs n >= 1".into()));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let count = (self.alphabet_len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        Budget::check_enumeration("tensor power alphabet", count)?;
        let joint_dim = ((self.dim_b * self.dim_e) as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        budget.check_matrices("tensor power outputs", joint_dim, count)?;

        let interleaved: Vec<(String, usize)> = (0..n)
            .flat_map(|i| {
                vec![
                    (format!("B{i}"), self.dim_b),
                    (format!("E{i}"), self.dim_e),
                ]
            })
            .collect();
        let interleaved_layout = SystemLayout::new(interleaved)?;
        let order: Vec<String> = (0..n)
            .map(|i| format!("B{i}"))
            .chain((0..n).map(|i| format!("E{i}")))
            .collect();
        let order_refs: Vec<&str> = order.iter().map(String::as_str).collect();

        let dim_b = self.dim_b.pow(n as u32);
        let dim_e = self.dim_e.pow(n as u32);
        let target_layout = SystemLayout::bipartite_be(dim_b, dim_e);

        let mut symbols = Vec::new();
        let mut outputs = Vec::new();
        let mut priors = self.priors.as_ref().map(|_| Vec::new());
        for seq in all_sequences(self.alphabet_len(), n) {
            symbols.push(self.sequence_name(&seq));
            if let (Some(acc), Some(p)) = (&mut priors, &self.priors) {
                acc.push(seq.iter().map(|&x| p[x]).product());
            }
            let mut joint = self.outputs[seq[0]].matrix().clone();
            for &x in &seq[1..] {
                joint = joint.tensor(self.outputs[x].matrix());
            }
            let (sorted, _) = permute_factors(&joint, &interleaved_layout, &order_refs)?;
            outputs.push(DensityOperator::trusted(sorted, target_layout.clone()));
        }
        CqWiretapChannel::new(symbols, priors, outputs, dim_b, dim_e)
    }

    fn sequence_name(&self, seq: &[usize]) -> String {
        let single_char = self.symbols.iter().all(|s| s.chars().count() == 1);
        let parts: Vec<&str> = seq.iter().map(|&x| self.symbols[x].as_str()).collect();
        if single_char {
            parts.concat()
        } else {
            parts.join(",")
        }
    }
}

fn average_state(states: &[ComplexMatrix], p: &[f64]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(states[0].rows(), states[0].cols());
    for (state, &w) in states.iter().zip(p) {
        acc = acc.add(&state.scale_real(w));
    }
    acc
}

/// `⊗_i states[seq[i]]` in sequence order.
pub fn product_state(states: &[ComplexMatrix], seq: &[usize]) -> ComplexMatrix {
    assert!(!seq.is_empty(), "empty sequence");
    let mut acc = states[seq[0]].clone();
    for &x in &seq[1..] {
        acc = acc.tensor(&states[x]);
    }
    acc
}

/// All length-`n` sequences over `{0..k}` in lexicographic order.
pub fn all_sequences(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k.pow(n as u32));
    let mut cur = vec![0usize; n];
    loop {
        out.push(cur.clone());
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < k {
                break;
            }
            cur[i] = 0;
        }
    }
}

pub fn validate_distribution(p: &[f64], expected_len: usize, context: &str) -> Result<()> {
    if p.len() != expected_len {
        return Err(Error::InvalidDistribution {
            context: context.to_string(),
            detail: format!("{} entries, expected {}", p.len(), expected_len),
        });
    }
    if let Some(&bad) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidDistribution {
            context: context.to_string(),
            detail: format!("negative or non-finite probability {bad}"),
        });
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::InvalidDistribution {
            context: context.to_string(),
            detail: format!("sums to {total:.15}, expected 1"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// KrausChannel and isometric extension
// ---------------------------------------------------------------------------

/// A quantum channel `A′ → B` given by Kraus operators.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<ComplexMatrix>,
    dim_in: usize,
    dim_out: usize,
}

impl KrausChannel {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| {
            Error::InvalidArgument("Kraus channel needs at least one operator".into())
        })?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        for (k, op) in ops.iter().enumerate() {
            if op.rows() != dim_out || op.cols() != dim_in {
                return Err(Error::shape(
                    format!("Kraus operator {k}"),
                    format!("{dim_out}x{dim_in}"),
                    format!("{}x{}", op.rows(), op.cols()),
                ));
            }
        }
        let mut sum = ComplexMatrix::zeros(dim_in, dim_in);
        for op in &ops {
            sum = sum.add(&op.adjoint().matmul(op)?);
        }
        let residual = sum.sub(&ComplexMatrix::identity(dim_in)).max_abs_entry();
        if residual > KRAUS_COMPLETENESS_TOL {
            return Err(Error::IncompleteKraus { residual });
        }
        Ok(KrausChannel {
            ops,
            dim_in,
            dim_out,
        })
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// Channel action `Σ_k A_k ρ A_k†`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.dim_in || rho.cols() != self.dim_in {
            return Err(Error::shape(
                "channel input",
                format!("{0}x{0}", self.dim_in),
                format!("{}x{}", rho.rows(), rho.cols()),
            ));
        }
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for op in &self.ops {
            out = out.add(&op.matmul(rho)?.matmul(&op.adjoint())?);
        }
        Ok(out)
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let a0 = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(1.0, 0.0),
            (1, 1) => Complex64::new((1.0 - gamma).sqrt(), 0.0),
            _ => Complex64::new(0.0, 0.0),
        });
        let a1 = ComplexMatrix::from_fn(2, 2, |i, j| {
            if (i, j) == (0, 1) {
                Complex64::new(gamma.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        KrausChannel::new(vec![a0, a1]).expect("amplitude damping is trace preserving")
    }

    /// Phase flip: applies `Z` with probability `gamma`.
    pub fn phase_flip(gamma: f64) -> Self {
        let a0 = ComplexMatrix::identity(2).scale_real((1.0 - gamma).sqrt());
        let z = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        let a1 = z.scale_real(gamma.sqrt());
        KrausChannel::new(vec![a0, a1]).expect("phase flip is trace preserving")
    }

    /// Fully dephasing channel (copies the basis value to the environment).
    pub fn full_dephasing() -> Self {
        let p0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        KrausChannel::new(vec![p0, p1]).expect("projectors are trace preserving")
    }
}

/// Isometry `V: A′ → B ⊗ E` dilating a Kraus channel, with the environment
/// dimension equal to the number of Kraus operators.
#[derive(Debug, Clone)]
pub struct IsometricExtension {
    matrix: ComplexMatrix,
    dim_in: usize,
    dim_b: usize,
    dim_e: usize,
}

impl IsometricExtension {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    /// Conjugate an input state: `V ρ V†` on `B ⊗ E`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.dim_in || rho.cols() != self.dim_in {
            return Err(Error::shape(
                "isometry input",
                format!("{0}x{0}", self.dim_in),
                format!("{}x{}", rho.rows(), rho.cols()),
            ));
        }
        self.matrix.matmul(rho)?.matmul(&self.matrix.adjoint())
    }
}

/// Stinespring dilation `V = Σ_k A_k ⊗ |k⟩^E`.
///
/// `V|ψ⟩ = Σ_k (A_k|ψ⟩) ⊗ |k⟩`, so tracing out `E` recovers the Kraus action.
pub fn isometric_extension(channel: &KrausChannel) -> Result<IsometricExtension> {
    let dim_in = channel.dim_in();
    let dim_b = channel.dim_out();
    let dim_e = channel.ops().len();
    let mut v = ComplexMatrix::zeros(dim_b * dim_e, dim_in);
    for (k, op) in channel.ops().iter().enumerate() {
        for b in 0..dim_b {
            for a in 0..dim_in {
                v.set(b * dim_e + k, a, op.get(b, a));
            }
        }
    }
    let vtv = v.adjoint().matmul(&v)?;
    let residual = vtv.sub(&ComplexMatrix::identity(dim_in)).max_abs_entry();
    if residual > KRAUS_COMPLETENESS_TOL {
        return Err(Error::IncompleteKraus { residual });
    }
    Ok(IsometricExtension {
        matrix: v,
        dim_in,
        dim_b,
        dim_e,
    })
}

// ---------------------------------------------------------------------------
// InputEnsemble and the induced cq channel
// ---------------------------------------------------------------------------

/// A classical ensemble `{p(x), ρ_x}` of input states for a Kraus channel.
#[derive(Debug, Clone)]
pub struct InputEnsemble {
    probs: Vec<f64>,
    states: Vec<ComplexMatrix>,
}

impl InputEnsemble {
    pub fn new(probs: Vec<f64>, states: Vec<ComplexMatrix>) -> Result<Self> {
        validate_distribution(&probs, states.len(), "input ensemble")?;
        if states.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one state".into()));
        }
        let dim = states[0].rows();
        let layout = SystemLayout::single("A", dim);
        for (i, s) in states.iter().enumerate() {
            DensityOperator::new(s.clone(), layout.clone(), &format!("ensemble state {i}"))?;
        }
        Ok(InputEnsemble { probs, states })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[ComplexMatrix] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].rows()
    }

    /// Average input `ρ^{A′} = Σ_x p(x) ρ_x`.
    pub fn average(&self) -> ComplexMatrix {
        average_state(&self.states, &self.probs)
    }
}

/// The cq wiretap channel induced by sending ensemble states through the
/// isometric extension of a Kraus channel.
pub fn induced_cq_channel(
    channel: &KrausChannel,
    ensemble: &InputEnsemble,
) -> Result<CqWiretapChannel> {
    if ensemble.dim() != channel.dim_in() {
        return Err(Error::shape(
            "induced channel ensemble",
            format!("states of dim {}", channel.dim_in()),
            format!("{}", ensemble.dim()),
        ));
    }
    let v = isometric_extension(channel)?;
    let layout = SystemLayout::bipartite_be(v.dim_b(), v.dim_e());
    let mut outputs = Vec::with_capacity(ensemble.states().len());
    for (i, rho) in ensemble.states().iter().enumerate() {
        let joint = v.apply(rho)?;
        outputs.push(DensityOperator::new(
            joint,
            layout.clone(),
            &format!("induced output {i}"),
        )?);
    }
    let symbols = (0..outputs.len()).map(|i| i.to_string()).collect();
    CqWiretapChannel::new(
        symbols,
        Some(ensemble.probs().to_vec()),
        outputs,
        v.dim_b(),
        v.dim_e(),
    )
}

// ---------------------------------------------------------------------------
// Channel files (JSON)
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum ParsedChannel {
    Cq(CqWiretapChannel),
    Kraus(KrausChannel),
}

impl ParsedChannel {
    /// The cq wiretap view of this channel. Kraus channels are dilated and
    /// probed with the uniform computational-basis ensemble.
    pub fn into_cq(self) -> Result<CqWiretapChannel> {
        match self {
            ParsedChannel::Cq(c) => Ok(c),
            ParsedChannel::Kraus(k) => {
                let dim = k.dim_in();
                let probs = vec![1.0 / dim as f64; dim];
                let states = (0..dim)
                    .map(|i| {
                        ComplexMatrix::from_fn(dim, dim, |r, c| {
                            if r == i && c == i {
                                Complex64::new(1.0, 0.0)
                            } else {
                                Complex64::new(0.0, 0.0)
                            }
                        })
                    })
                    .collect();
                let ens = InputEnsemble::new(probs, states)?;
                induced_cq_channel(&k, &ens)
            }
        }
    }
}

type MatrixDoc = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
struct SymbolDoc {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    prob: Option<f64>,
    #[serde(rename = "state_BE")]
    state_be: MatrixDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelDoc {
    kind: String,
    #[serde(rename = "dB")]
    d_b: usize,
    #[serde(rename = "dE", skip_serializing_if = "Option::is_none")]
    d_e: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbols: Option<Vec<SymbolDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kraus: Option<Vec<MatrixDoc>>,
}

fn matrix_to_doc(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
        .collect()
}

/// Parse a channel-spec document.
///
/// Invariant violations (bad trace, negative eigenvalue, incomplete Kraus
/// set) are reported with the offending symbol or operator index.
pub fn parse_channel(text: &str) -> Result<ParsedChannel> {
    let doc: ChannelDoc =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("channel spec: {e}")))?;
    match doc.kind.as_str() {
        "cq" => {
            let d_e = doc
                .d_e
                .ok_or_else(|| Error::parse("cq channel spec is missing `dE`"))?;
            let symbols = doc
                .symbols
                .ok_or_else(|| Error::parse("cq channel spec is missing `symbols`"))?;
            if symbols.is_empty() {
                return Err(Error::parse("cq channel spec has no symbols"));
            }
            let mut names = Vec::with_capacity(symbols.len());
            let mut probs = Vec::new();
            let mut outputs = Vec::with_capacity(symbols.len());
            let any_prob = symbols.iter().any(|s| s.prob.is_some());
            for sym in &symbols {
                let m = ComplexMatrix::from_re_im_rows(&sym.state_be)?;
                if m.rows() != doc.d_b * d_e || m.cols() != doc.d_b * d_e {
                    return Err(Error::parse(format!(
                        "symbol `{}`: state_BE is {}x{}, expected {}x{}",
                        sym.name,
                        m.rows(),
                        m.cols(),
                        doc.d_b * d_e,
                        doc.d_b * d_e
                    )));
                }
                names.push(sym.name.clone());
                if any_prob {
                    probs.push(sym.prob.ok_or_else(|| {
                        Error::parse(format!(
                            "symbol `{}`: prob must be given for all symbols or none",
                            sym.name
                        ))
                    })?);
                }
                outputs.push(m);
            }
            let channel = CqWiretapChannel::from_matrices(
                names,
                if any_prob { Some(probs) } else { None },
                outputs,
                doc.d_b,
                d_e,
            )?;
            Ok(ParsedChannel::Cq(channel))
        }
        "kraus" => {
            let mats = doc
                .kraus
                .ok_or_else(|| Error::parse("kraus channel spec is missing `kraus`"))?;
            let mut ops = Vec::with_capacity(mats.len());
            for (k, m) in mats.iter().enumerate() {
                let op = ComplexMatrix::from_re_im_rows(m)?;
                if op.rows() != doc.d_b {
                    return Err(Error::parse(format!(
                        "kraus operator {k} has {} rows, expected dB = {}",
                        op.rows(),
                        doc.d_b
                    )));
                }
                ops.push(op);
            }
            Ok(ParsedChannel::Kraus(KrausChannel::new(ops)?))
        }
        other => Err(Error::parse(format!(
            "unknown channel kind `{other}` (expected `cq` or `kraus`)"
        ))),
    }
}

/// Canonical serialization: fixed key order, floats with 17 significant
/// digits so values round-trip bit-identically.
pub fn serialize_channel(channel: &ParsedChannel) -> String {
    let doc = match channel {
        ParsedChannel::Cq(c) => ChannelDoc {
            kind: "cq".to_string(),
            d_b: c.dim_b(),
            d_e: Some(c.dim_e()),
            symbols: Some(
                c.symbols()
                    .iter()
                    .enumerate()
                    .map(|(i, name)| SymbolDoc {
                        name: name.clone(),
                        prob: c.priors().map(|p| p[i]),
                        state_be: matrix_to_doc(c.output(i).matrix()),
                    })
                    .collect(),
            ),
            kraus: None,
        },
        ParsedChannel::Kraus(k) => ChannelDoc {
            kind: "kraus".to_string(),
            d_b: k.dim_out(),
            d_e: None,
            symbols: None,
            kraus: Some(k.ops().iter().map(matrix_to_doc).collect()),
        },
    };
    to_json_17(&doc)
}

/// Serialize with every float printed as 17-significant-digit scientific
/// notation (lossless for f64).
fn to_json_17<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    String::from_utf8(buf).expect("serializer emits utf-8")
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::sample;
    use crate::linalg::{partial_trace, ComplexVector};

    fn basis_projector(dim: usize, i: usize) -> ComplexMatrix {
        let v = ComplexVector::basis(dim, i);
        v.outer(&v)
    }

    /// σ_x = |x⟩⟨x|^B ⊗ |x⟩⟨x|^E on two symbols.
    pub(crate) fn copy_to_both() -> CqWiretapChannel {
        let outputs = (0..2)
            .map(|x| basis_projector(2, x).tensor(&basis_projector(2, x)))
            .collect();
        CqWiretapChannel::from_matrices(
            vec!["0".into(), "1".into()],
            None,
            outputs,
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn identity_channel_isometry() {
        let id = KrausChannel::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let v = isometric_extension(&id).unwrap();
        assert_eq!(v.dim_e(), 1);
        let mut rng = CounterRng::new(1);
        let rho = sample::random_density_matrix(2, &mut rng);
        let joint = v.apply(&rho).unwrap();
        let layout = SystemLayout::bipartite_be(2, 1);
        let (back, _) = partial_trace(&joint, &layout, &["B"]).unwrap();
        assert!(back.approx_eq(&rho, 1e-12));
    }

    #[test]
    fn full_dephasing_is_copy_isometry() {
        let v = isometric_extension(&KrausChannel::full_dephasing()).unwrap();
        for x in 0..2 {
            let input = ComplexVector::basis(2, x);
            let out = v.matrix().mul_vec(&input);
            let expected = ComplexVector::basis(2, x).tensor(&ComplexVector::basis(2, x));
            let overlap = expected.inner(&out).norm();
            assert!((overlap - 1.0).abs() < 1e-12, "x={x}: overlap {overlap}");
        }
    }

    #[test]
    fn amplitude_damping_isometry_matches_kraus_action() {
        let ch = KrausChannel::amplitude_damping(0.3);
        let v = isometric_extension(&ch).unwrap();
        let vtv = v.matrix().adjoint().matmul(v.matrix()).unwrap();
        assert!(vtv.approx_eq(&ComplexMatrix::identity(2), 1e-12));
        let layout = SystemLayout::bipartite_be(2, 2);
        let mut rng = CounterRng::new(3);
        for _ in 0..50 {
            let rho = sample::random_density_matrix(2, &mut rng);
            let joint = v.apply(&rho).unwrap();
            let (bob, _) = partial_trace(&joint, &layout, &["B"]).unwrap();
            let direct = ch.apply(&rho).unwrap();
            assert!(bob.max_abs_diff(&direct) < 1e-9);
        }
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        match KrausChannel::new(vec![half]) {
            Err(Error::IncompleteKraus { residual }) => assert!(residual > 0.5),
            other => panic!("expected IncompleteKraus, got {other:?}"),
        }
    }

    #[test]
    fn induced_channel_identity_on_basis_states() {
        let id = KrausChannel::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let ens = InputEnsemble::new(
            vec![0.5, 0.5],
            vec![basis_projector(2, 0), basis_projector(2, 1)],
        )
        .unwrap();
        let cq = induced_cq_channel(&id, &ens).unwrap();
        assert_eq!(cq.dim_e(), 1);
        for x in 0..2 {
            assert!(cq.bob_state(x).approx_eq(&basis_projector(2, x), 1e-12));
        }
    }

    #[test]
    fn induced_dephasing_copies_to_both_parties() {
        let ens = InputEnsemble::new(
            vec![0.5, 0.5],
            vec![basis_projector(2, 0), basis_projector(2, 1)],
        )
        .unwrap();
        let cq = induced_cq_channel(&KrausChannel::full_dephasing(), &ens).unwrap();
        for x in 0..2 {
            assert!(cq.bob_state(x).approx_eq(&basis_projector(2, x), 1e-12));
            assert!(cq.eve_state(x).approx_eq(&basis_projector(2, x), 1e-12));
        }
    }

    #[test]
    fn induced_amplitude_damping_outputs_are_valid() {
        let plus = ComplexVector::from_real(&[1.0, 1.0]).normalized();
        let ens = InputEnsemble::new(
            vec![0.5, 0.5],
            vec![basis_projector(2, 0), plus.outer(&plus)],
        )
        .unwrap();
        // Construction validates positivity and unit trace of every output.
        let cq = induced_cq_channel(&KrausChannel::amplitude_damping(0.3), &ens).unwrap();
        assert_eq!(cq.alphabet_len(), 2);
    }

    #[test]
    fn tensor_power_small_cases() {
        let ch = copy_to_both();
        let budget = Budget::default();
        let one = ch.tensor_power(1, &budget).unwrap();
        assert_eq!(one.alphabet_len(), 2);

        let two = ch.tensor_power(2, &budget).unwrap();
        assert_eq!(two.alphabet_len(), 4);
        // Product output equals tensor of singles, reordered to (B^2, E^2).
        // For copy channels output on "01" is |01><01| ⊗ |01><01|.
        let idx = two.symbols().iter().position(|s| s == "01").unwrap();
        let expected = basis_projector(4, 1).tensor(&basis_projector(4, 1));
        assert!(two.output(idx).matrix().approx_eq(&expected, 1e-12));

        let three = ch.tensor_power(3, &budget).unwrap();
        let idx = three.symbols().iter().position(|s| s == "010").unwrap();
        let expected = basis_projector(8, 2).tensor(&basis_projector(8, 2));
        assert!(three.output(idx).matrix().approx_eq(&expected, 1e-12));
    }

    #[test]
    fn tensor_power_budget_error() {
        let ch = copy_to_both();
        let tiny = Budget::from_mb(1);
        match ch.tensor_power(4, &tiny) {
            Err(Error::Budget { .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn parse_minimal_cq_spec() {
        let text = r#"{"kind":"cq","dB":1,"dE":1,"symbols":[{"name":"a","state_BE":[[[1.0,0.0]]]}]}"#;
        match parse_channel(text).unwrap() {
            ParsedChannel::Cq(c) => {
                assert_eq!(c.alphabet_len(), 1);
                assert_eq!(c.symbols()[0], "a");
            }
            other => panic!("expected cq channel, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_trace_naming_symbol() {
        let text = r#"{"kind":"cq","dB":1,"dE":1,"symbols":[{"name":"bad","state_BE":[[[0.9,0.0]]]}]}"#;
        match parse_channel(text) {
            Err(Error::InvalidDensity { context, detail }) => {
                assert!(context.contains("bad"), "context: {context}");
                assert!(detail.contains("trace"), "detail: {detail}");
            }
            other => panic!("expected InvalidDensity, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_malformed_json() {
        match parse_channel("{not json") {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn serialization_round_trips_bit_identically() {
        let ch = ParsedChannel::Cq(copy_to_both());
        let text = serialize_channel(&ch);
        let reparsed = parse_channel(&text).unwrap();
        let text2 = serialize_channel(&reparsed);
        assert_eq!(text, text2);
    }

    #[test]
    fn permuted_channel_swaps_outputs() {
        let ch = copy_to_both();
        let sw = ch.permuted(&[1, 0]).unwrap();
        assert!(sw.bob_state(0).approx_eq(ch.bob_state(1), 0.0));
        assert_eq!(sw.symbols(), &["1".to_string(), "0".to_string()]);
    }
}
