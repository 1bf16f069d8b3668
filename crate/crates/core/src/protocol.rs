//! Finite-blocklength simulation of the secret-key-assisted private code:
//! XOR encryption against the shared key, i.i.d. random codebooks,
//! pretty-good-measurement decoding, obfuscation error of the covering sets,
//! and the trace-distance security measurement on the explicitly assembled
//! post-decoding state.
//!
//! The codeword index space has width `max(message_bits, key_bits)`:
//! `f(m, s) = pad(m) XOR pad(s)`, which satisfies both injectivity
//! requirements (in the message for fixed key and in the key for fixed
//! message) for every combination of widths. When the key is no wider than
//! the message this is exactly the XOR-with-zero-padded-key map on the
//! message space.

use rayon::prelude::*;
use serde::Serialize;

use crate::budget::Budget;
use crate::channels::{validate_distribution, CqWiretapChannel};
use crate::error::{Error, Result};
use crate::information::shannon_entropy;
use crate::linalg::{hermitian_eig, trace_norm_distance, ComplexMatrix};
use crate::rng::CounterRng;

/// POVM elements may dip this far below zero before being rejected.
pub const POVM_EIG_TOL: f64 = 1e-9;
/// Decode-table entries may dip this far below zero; they are clipped.
pub const DECODE_PROB_TOL: f64 = 1e-10;
/// Relative support cutoff for the pseudo-inverse square root of the PGM.
const PGM_SUPPORT_CUTOFF: f64 = 1e-12;

fn ceil_bits(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// CodeSpec and PairingMap
// ---------------------------------------------------------------------------

/// Parameters of an `(n, R, R_s)` code instance.
#[derive(Debug, Clone, Serialize)]
pub struct CodeSpec {
    pub n: usize,
    pub rate: f64,
    pub key_rate: f64,
    pub message_bits: usize,
    pub key_bits: usize,
    /// Width of the codeword index space: `max(message_bits, key_bits)`.
    pub index_bits: usize,
    pub seed: u64,
}

impl CodeSpec {
    pub fn new(n: usize, rate: f64, key_rate: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("blocklength must be >= 1".into()));
        }
        if rate <= 0.0 || key_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need rate > 0 and key rate >= 0, got ({rate}, {key_rate})"
            )));
        }
        let message_bits = ceil_bits(n as f64 * rate).max(1);
        let key_bits = ceil_bits(n as f64 * key_rate);
        Ok(CodeSpec {
            n,
            rate,
            key_rate,
            message_bits,
            key_bits,
            index_bits: message_bits.max(key_bits),
            seed,
        })
    }

    pub fn num_messages(&self) -> usize {
        1 << self.message_bits
    }

    pub fn num_keys(&self) -> usize {
        1 << self.key_bits
    }

    pub fn num_indices(&self) -> usize {
        1 << self.index_bits
    }
}

/// Encryption/decryption pairing `f(m, s) = pad(m) ⊕ pad(s)`,
/// `g(k, s) = (k ⊕ pad(s)) mod 2^message_bits`.
#[derive(Debug, Clone, Serialize)]
pub struct PairingMap {
    pub message_bits: usize,
    pub key_bits: usize,
    pub index_bits: usize,
}

impl PairingMap {
    pub fn encrypt(&self, m: u64, s: u64) -> u64 {
        debug_assert!(m < (1 << self.message_bits) && s < (1 << self.key_bits));
        m ^ s
    }

    pub fn decrypt(&self, k: u64, s: u64) -> u64 {
        (k ^ s) & ((1 << self.message_bits) - 1)
    }

    /// Exhaustive check of both injectivity requirements and the decryption
    /// identity.
    pub fn verify_injectivity(&self) -> Result<()> {
        let messages = 1u64 << self.message_bits;
        let keys = 1u64 << self.key_bits;
        for m in 0..messages {
            let mut seen = vec![false; 1 << self.index_bits];
            for s in 0..keys {
                let k = self.encrypt(m, s);
                if seen[k as usize] {
                    return Err(Error::Inconsistent {
                        context: "pairing map".into(),
                        detail: format!("f({m}, ·) is not injective in the key"),
                    });
                }
                seen[k as usize] = true;
                if self.decrypt(k, s) != m {
                    return Err(Error::Inconsistent {
                        context: "pairing map".into(),
                        detail: format!("g(f({m},{s}),{s}) != {m}"),
                    });
                }
            }
        }
        for s in 0..keys {
            let mut seen = vec![false; 1 << self.index_bits];
            for m in 0..messages {
                let k = self.encrypt(m, s);
                if seen[k as usize] {
                    return Err(Error::Inconsistent {
                        context: "pairing map".into(),
                        detail: format!("f(·, {s}) is not injective in the message"),
                    });
                }
                seen[k as usize] = true;
            }
        }
        Ok(())
    }
}

/// Build the XOR pairing map. Construction is verified exhaustively for
/// index widths up to 8 bits.
pub fn build_pairing(message_bits: usize, key_bits: usize) -> Result<PairingMap> {
    if message_bits == 0 {
        return Err(Error::InvalidArgument("need at least one message bit".into()));
    }
    if message_bits.max(key_bits) > 24 {
        return Err(Error::Budget {
            context: "pairing index width".into(),
            required: message_bits.max(key_bits) as u128,
            budget: 24,
        });
    }
    let map = PairingMap {
        message_bits,
        key_bits,
        index_bits: message_bits.max(key_bits),
    };
    if map.index_bits <= 8 {
        map.verify_injectivity()?;
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

/// An i.i.d. random codebook over the channel alphabet, one codeword per
/// index.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub codewords: Vec<Vec<usize>>,
    /// Distribution the codewords were sampled from.
    pub sample_probs: Vec<f64>,
    /// Empirical symbol frequencies across the whole codebook.
    pub empirical_freqs: Vec<f64>,
}

pub fn sample_codebook(
    channel: &CqWiretapChannel,
    p: &[f64],
    spec: &CodeSpec,
) -> Result<Codebook> {
    validate_distribution(p, channel.alphabet_len(), "codebook distribution")?;
    Budget::check_enumeration("codebook size", spec.num_indices() as u128)?;
    let mut rng = CounterRng::new(spec.seed);
    let mut counts = vec![0usize; channel.alphabet_len()];
    let mut codewords = Vec::with_capacity(spec.num_indices());
    for _ in 0..spec.num_indices() {
        let w: Vec<usize> = (0..spec.n).map(|_| rng.sample_index(p)).collect();
        for &x in &w {
            counts[x] += 1;
        }
        codewords.push(w);
    }
    let total = (spec.num_indices() * spec.n) as f64;
    let empirical_freqs = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(Codebook {
        codewords,
        sample_probs: p.to_vec(),
        empirical_freqs,
    })
}

// ---------------------------------------------------------------------------
// Pretty-good measurement
// ---------------------------------------------------------------------------

/// The square-root-measurement POVM for a codebook, plus its completeness
/// residual (outcome `?`).
#[derive(Debug, Clone)]
pub struct DecoderPovm {
    pub elements: Vec<ComplexMatrix>,
    pub residual: ComplexMatrix,
    /// `max |(ΣΛ + Λ?) − I|` measured at construction.
    pub completeness_residual: f64,
    /// Smallest eigenvalue over all elements and the residual.
    pub min_eigenvalue: f64,
}

/// Build the pretty-good measurement `Λ_k = S^{-1/2} σ_k S^{-1/2}` with
/// `S = Σ_k σ_k`, pseudo-inverted on its support; validates positivity and
/// completeness of every element.
pub fn pgm_decoder(channel: &CqWiretapChannel, codebook: &Codebook) -> Result<DecoderPovm> {
    let dim = channel
        .dim_b()
        .checked_pow(codebook.codewords[0].len() as u32)
        .ok_or_else(|| Error::Budget {
            context: "receiver dimension".into(),
            required: u128::MAX,
            budget: 0,
        })?;
    Budget::from_env().check_matrices("PGM decoder", dim as u128, codebook.codewords.len() as u128 + 2)?;

    let states: Vec<ComplexMatrix> = codebook
        .codewords
        .par_iter()
        .map(|w| channel.bob_sequence_state(w))
        .collect();
    let mut gram = ComplexMatrix::zeros(dim, dim);
    for s in &states {
        gram = gram.add(s);
    }
    let eig = hermitian_eig(&gram.hermitized())?;
    let cutoff = eig.values.first().copied().unwrap_or(0.0).max(0.0) * PGM_SUPPORT_CUTOFF;
    let n = eig.values.len();
    let inv_root = ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| {
                let l = eig.values[k];
                let w = if l > cutoff { 1.0 / l.sqrt() } else { 0.0 };
                eig.vectors.get(i, k) * w * eig.vectors.get(j, k).conj()
            })
            .sum()
    });

    let elements: Vec<ComplexMatrix> = states
        .par_iter()
        .map(|s| {
            inv_root
                .matmul(s)
                .and_then(|m| m.matmul(&inv_root))
                .map(|m| m.hermitized())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = ComplexMatrix::zeros(dim, dim);
    for e in &elements {
        sum = sum.add(e);
    }
    let residual = ComplexMatrix::identity(dim).sub(&sum).hermitized();
    let completeness_residual = sum
        .add(&residual)
        .sub(&ComplexMatrix::identity(dim))
        .max_abs_entry();

    let mut min_eigenvalue = f64::INFINITY;
    for e in elements.iter().chain(std::iter::once(&residual)) {
        let low = hermitian_eig(e)?.values.last().copied().unwrap_or(0.0);
        min_eigenvalue = min_eigenvalue.min(low);
    }
    if min_eigenvalue < -POVM_EIG_TOL {
        return Err(Error::Inconsistent {
            context: "PGM decoder".into(),
            detail: format!("POVM element has eigenvalue {min_eigenvalue:.3e}"),
        });
    }
    if completeness_residual > POVM_EIG_TOL {
        return Err(Error::Inconsistent {
            context: "PGM decoder".into(),
            detail: format!("completeness residual {completeness_residual:.3e}"),
        });
    }
    Ok(DecoderPovm {
        elements,
        residual,
        completeness_residual,
        min_eigenvalue,
    })
}

// ---------------------------------------------------------------------------
// Decode matrix
// ---------------------------------------------------------------------------

/// Conditional decoding distribution: `probs[k][k']` for `k'` a codeword
/// index, with the final column the abstain outcome `?`.
#[derive(Debug, Clone)]
pub struct DecodeTable {
    pub probs: Vec<Vec<f64>>,
}

impl DecodeTable {
    pub fn num_indices(&self) -> usize {
        self.probs.len()
    }

    /// Mean over indices of the misdecoding probability `1 − π(k|k)`.
    pub fn average_error(&self) -> f64 {
        let k = self.probs.len() as f64;
        self.probs
            .iter()
            .enumerate()
            .map(|(i, row)| 1.0 - row[i])
            .sum::<f64>()
            / k
    }
}

pub fn decode_matrix(
    channel: &CqWiretapChannel,
    codebook: &Codebook,
    povm: &DecoderPovm,
) -> Result<DecodeTable> {
    let k = codebook.codewords.len();
    let probs: Vec<Vec<f64>> = codebook
        .codewords
        .par_iter()
        .map(|w| {
            let sigma = channel.bob_sequence_state(w);
            let mut row = Vec::with_capacity(k + 1);
            for e in &povm.elements {
                row.push(e.trace_product(&sigma)?.re);
            }
            row.push(povm.residual.trace_product(&sigma)?.re);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut clipped = probs;
    for (i, row) in clipped.iter_mut().enumerate() {
        for v in row.iter_mut() {
            if *v < -DECODE_PROB_TOL {
                return Err(Error::Inconsistent {
                    context: "decode matrix".into(),
                    detail: format!("negative probability {v:.3e} in row {i}"),
                });
            }
            *v = v.max(0.0);
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Inconsistent {
                context: "decode matrix".into(),
                detail: format!("row {i} sums to {total:.12}"),
            });
        }
    }
    Ok(DecodeTable { probs: clipped })
}

// ---------------------------------------------------------------------------
// Obfuscation error
// ---------------------------------------------------------------------------

/// Reference eavesdropper state `(Σ_x p(x) σ_x^E)^{⊗n}` — the exact i.i.d.
/// ensemble average.
pub fn reference_eve_state(channel: &CqWiretapChannel, p: &[f64], n: usize) -> ComplexMatrix {
    let avg = channel.average_eve_state(p);
    let mut acc = avg.clone();
    for _ in 1..n {
        acc = acc.tensor(&avg);
    }
    acc
}

/// Trace distance between the key-averaged eavesdropper state of message `m`
/// and the ensemble average.
pub fn obfuscation_error(
    channel: &CqWiretapChannel,
    codebook: &Codebook,
    pairing: &PairingMap,
    m: u64,
) -> Result<f64> {
    let n = codebook.codewords[0].len();
    let dim_e = channel.dim_e().pow(n as u32);
    Budget::from_env().check_matrices("obfuscation error", dim_e as u128, 3)?;
    let keys = 1u64 << pairing.key_bits;
    let mut avg = ComplexMatrix::zeros(dim_e, dim_e);
    for s in 0..keys {
        let k = pairing.encrypt(m, s) as usize;
        avg = avg.add(&channel.eve_sequence_state(&codebook.codewords[k]));
    }
    avg = avg.scale_real(1.0 / keys as f64);
    let reference = reference_eve_state(channel, &codebook.sample_probs, n);
    trace_norm_distance(&avg.hermitized(), &reference.hermitized())
}

// ---------------------------------------------------------------------------
// Covering concentration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CoveringReport {
    pub n: usize,
    pub key_rate: f64,
    pub num_codewords: usize,
    pub trials: usize,
    pub threshold_eps: f64,
    /// The exceedance threshold `2ε + 19√ε`.
    pub oe_threshold: f64,
    pub fraction_exceeding: f64,
    pub median_oe: f64,
    pub seed: u64,
}

/// Fraction of `trials` random covering codes (size `2^⌈nR_s⌉`, i.i.d. from
/// `p`) whose obfuscation error reaches `2ε + 19√ε`.
#[allow(clippy::too_many_arguments)]
pub fn covering_concentration(
    channel: &CqWiretapChannel,
    p: &[f64],
    n: usize,
    key_rate: f64,
    trials: usize,
    threshold_eps: f64,
    seed: u64,
    budget: &Budget,
) -> Result<CoveringReport> {
    validate_distribution(p, channel.alphabet_len(), "covering distribution")?;
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if threshold_eps <= 0.0 {
        return Err(Error::InvalidArgument("threshold epsilon must be > 0".into()));
    }
    let size = 1usize << ceil_bits(n as f64 * key_rate);
    let dim_e = (channel.dim_e() as u128).pow(n as u32);
    budget.check_matrices("covering trials", dim_e, 3)?;
    let dim_e = dim_e as usize;
    let reference = reference_eve_state(channel, p, n).hermitized();
    let oe_threshold = 2.0 * threshold_eps + 19.0 * threshold_eps.sqrt();

    let root = CounterRng::new(seed);
    let oe_values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = root.substream(t as u64);
            let mut avg = ComplexMatrix::zeros(dim_e, dim_e);
            for _ in 0..size {
                let w: Vec<usize> = (0..n).map(|_| rng.sample_index(p)).collect();
                avg = avg.add(&channel.eve_sequence_state(&w));
            }
            avg = avg.scale_real(1.0 / size as f64);
            trace_norm_distance(&avg.hermitized(), &reference)
        })
        .collect::<Result<Vec<_>>>()?;

    let exceeding = oe_values.iter().filter(|&&v| v >= oe_threshold).count();
    let mut sorted = oe_values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(CoveringReport {
        n,
        key_rate,
        num_codewords: size,
        trials,
        threshold_eps,
        oe_threshold,
        fraction_exceeding: exceeding as f64 / trials as f64,
        median_oe: sorted[sorted.len() / 2],
        seed,
    })
}

// ---------------------------------------------------------------------------
// Full protocol run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FanoCheck {
    /// `H(K|K')` of the uniform-input decode joint, in bits.
    pub h_k_given_kprime: f64,
    /// `1 + Pr{K≠K'}·index_bits`.
    pub fano_bound: f64,
    pub fano_holds: bool,
    /// Classical mutual information `I(K;K')`.
    pub i_k_kprime: f64,
    /// Holevo information `I(K;B)` of the codebook ensemble, when the
    /// receiver dimension permits computing it.
    pub i_k_bob: Option<f64>,
    pub data_processing_holds: Option<bool>,
}

/// Measured outcomes of one protocol instance.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub spec: CodeSpec,
    pub avg_error: f64,
    pub oe_per_message: Vec<f64>,
    pub security_distance: f64,
    pub seed: u64,
    /// `1 − π(k|k)` per codeword index.
    pub decode_error_per_index: Vec<f64>,
    /// `‖Υ − Υ₀‖₁` between the measured and ideal-decoding states.
    pub ideal_decoding_gap: f64,
    /// `ideal_decoding_gap + max_m oe(m)`: must dominate the security
    /// distance (triangle inequality).
    pub triangle_bound: f64,
    pub povm_completeness_residual: f64,
    pub povm_min_eigenvalue: f64,
    pub fano: FanoCheck,
}

/// Simulate the full chain `(m, s) → k = f(m,s) → σ_{x_k} → POVM → k' →
/// m' = g(k', s)`, averaging exactly over uniform messages and keys.
pub fn run_protocol(
    channel: &CqWiretapChannel,
    p: &[f64],
    spec: &CodeSpec,
    budget: &Budget,
) -> Result<ProtocolReport> {
    let pairing = build_pairing(spec.message_bits, spec.key_bits)?;
    let codebook = sample_codebook(channel, p, spec)?;
    let dim_b = (channel.dim_b() as u128).pow(spec.n as u32);
    let dim_e = (channel.dim_e() as u128).pow(spec.n as u32);
    budget.check_matrices("protocol receiver states", dim_b, codebook.codewords.len() as u128 + 2)?;
    budget.check_matrices(
        "protocol eavesdropper states",
        dim_e,
        codebook.codewords.len() as u128 + spec.num_messages() as u128 + 3,
    )?;

    let povm = pgm_decoder(channel, &codebook)?;
    let table = decode_matrix(channel, &codebook, &povm)?;
    let avg_error = table.average_error();
    let decode_error_per_index: Vec<f64> = table
        .probs
        .iter()
        .enumerate()
        .map(|(k, row)| 1.0 - row[k])
        .collect();

    let oe_per_message: Vec<f64> = (0..spec.num_messages() as u64)
        .into_par_iter()
        .map(|m| obfuscation_error(channel, &codebook, &pairing, m))
        .collect::<Result<Vec<_>>>()?;

    // Post-decode, post-decryption joint state of (decoded message, Eve).
    // Both the measured state and the target product state are classical on
    // the message register, so all trace distances decompose into sums over
    // the Eve-side blocks.
    let num_m = spec.num_messages();
    let measured = post_decoding_blocks(channel, &codebook, &pairing, &table)?;
    let ideal = ideal_decoding_blocks(channel, &codebook, &pairing, num_m)?;
    let reference = reference_eve_state(channel, p, spec.n)
        .hermitized()
        .scale_real(1.0 / num_m as f64);

    let mut security_distance = 0.0;
    let mut ideal_decoding_gap = 0.0;
    for m in 0..num_m {
        security_distance += trace_norm_distance(&measured[m], &reference)?;
        ideal_decoding_gap += trace_norm_distance(&measured[m], &ideal[m])?;
    }
    let abstain_mass = hermitian_eig(&measured[num_m])?
        .values
        .iter()
        .map(|l| l.abs())
        .sum::<f64>();
    security_distance += abstain_mass;
    ideal_decoding_gap += abstain_mass;

    let max_oe = oe_per_message.iter().cloned().fold(0.0, f64::max);
    let triangle_bound = ideal_decoding_gap + max_oe;
    if security_distance > triangle_bound + 1e-9 {
        return Err(Error::Inconsistent {
            context: "protocol security".into(),
            detail: format!(
                "security distance {security_distance:.12} exceeds triangle bound {triangle_bound:.12}"
            ),
        });
    }

    if !(0.0..=1.0 + 1e-12).contains(&avg_error)
        || !(0.0..=2.0 + 1e-9).contains(&security_distance)
        || oe_per_message.iter().any(|v| !(0.0..=2.0 + 1e-9).contains(v))
    {
        return Err(Error::Inconsistent {
            context: "protocol report".into(),
            detail: format!(
                "out-of-range measurement: avg_error {avg_error}, security {security_distance}"
            ),
        });
    }
    let fano = fano_check(channel, &codebook, &table)?;
    if !fano.fano_holds {
        return Err(Error::Inconsistent {
            context: "protocol converse".into(),
            detail: "Fano bound violated".into(),
        });
    }

    Ok(ProtocolReport {
        spec: spec.clone(),
        avg_error,
        oe_per_message,
        security_distance,
        seed: spec.seed,
        decode_error_per_index,
        ideal_decoding_gap,
        triangle_bound,
        povm_completeness_residual: povm.completeness_residual,
        povm_min_eigenvalue: povm.min_eigenvalue,
        fano,
    })
}

/// Eve-side blocks of the post-decode, post-decryption joint state,
/// averaged exactly over uniform messages and keys: one block per decoded
/// message, then the abstain block. The direct sum over the classical
/// outcome basis is the measured joint state.
pub fn post_decoding_blocks(
    channel: &CqWiretapChannel,
    codebook: &Codebook,
    pairing: &PairingMap,
    table: &DecodeTable,
) -> Result<Vec<ComplexMatrix>> {
    let num_m = 1usize << pairing.message_bits;
    let keys = 1usize << pairing.key_bits;
    let num_k = codebook.codewords.len();
    if table.num_indices() != num_k {
        return Err(Error::shape(
            "post-decoding blocks",
            format!("{num_k} decode rows"),
            format!("{}", table.num_indices()),
        ));
    }
    let weight = 1.0 / (num_m as f64 * keys as f64);
    // block_weights[m'][k] = Σ_{m,s,k'} 1{g(k',s)=m'} π(k'|f(m,s)) · weight.
    let mut block_weights = vec![vec![0.0f64; num_k]; num_m + 1];
    for s in 0..keys as u64 {
        for m in 0..num_m as u64 {
            let k = pairing.encrypt(m, s) as usize;
            let row = &table.probs[k];
            for (kp, &prob) in row.iter().take(num_k).enumerate() {
                if prob == 0.0 {
                    continue;
                }
                let decoded = pairing.decrypt(kp as u64, s) as usize;
                block_weights[decoded][k] += weight * prob;
            }
            // The abstain outcome keeps its own block.
            block_weights[num_m][k] += weight * row[num_k];
        }
    }
    let states = eve_codeword_states(channel, codebook);
    Ok(block_weights
        .iter()
        .map(|w| weighted_sum(&states, w))
        .collect())
}

/// Ideal-decoding counterparts: block `m` is the key-averaged Eve state of
/// the covering set behind message `m`; the trailing abstain block is zero.
pub fn ideal_decoding_blocks(
    channel: &CqWiretapChannel,
    codebook: &Codebook,
    pairing: &PairingMap,
    num_messages: usize,
) -> Result<Vec<ComplexMatrix>> {
    let keys = 1usize << pairing.key_bits;
    let weight = 1.0 / (num_messages as f64 * keys as f64);
    let num_k = codebook.codewords.len();
    let states = eve_codeword_states(channel, codebook);
    let mut blocks = Vec::with_capacity(num_messages + 1);
    for m in 0..num_messages as u64 {
        let mut w = vec![0.0f64; num_k];
        for s in 0..keys as u64 {
            w[pairing.encrypt(m, s) as usize] += weight;
        }
        blocks.push(weighted_sum(&states, &w));
    }
    let dim = blocks[0].rows();
    blocks.push(ComplexMatrix::zeros(dim, dim));
    Ok(blocks)
}

fn eve_codeword_states(channel: &CqWiretapChannel, codebook: &Codebook) -> Vec<ComplexMatrix> {
    codebook
        .codewords
        .par_iter()
        .map(|w| channel.eve_sequence_state(w))
        .collect()
}

fn weighted_sum(states: &[ComplexMatrix], weights: &[f64]) -> ComplexMatrix {
    let dim = states[0].rows();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for (state, &w) in states.iter().zip(weights) {
        if w != 0.0 {
            acc = acc.add(&state.scale_real(w));
        }
    }
    acc.hermitized()
}

/// Check Fano's inequality `H(K|K') ≤ 1 + Pr{K≠K'}·index_bits` on a decode
/// table with uniform input, and the data-processing bound
/// `I(K;K') ≤ I(K;B)` when the receiver dimension permits.
pub fn fano_check(
    channel: &CqWiretapChannel,
    codebook: &Codebook,
    table: &DecodeTable,
) -> Result<FanoCheck> {
    let k = table.num_indices();
    let p_k = 1.0 / k as f64;
    // Joint over (k, k') including the abstain column.
    let mut marginal_kp = vec![0.0f64; k + 1];
    let mut h_joint = 0.0f64;
    for row in &table.probs {
        for (kp, &prob) in row.iter().enumerate() {
            let joint = p_k * prob;
            marginal_kp[kp] += joint;
            if joint > 0.0 {
                h_joint -= joint * joint.log2();
            }
        }
    }
    let h_k = (k as f64).log2();
    let h_kp = shannon_entropy(&marginal_kp);
    let h_k_given_kprime = h_joint - h_kp;
    let i_k_kprime = h_k - h_k_given_kprime;
    let error_prob = table.average_error();
    let index_bits = (k as f64).log2();
    let fano_bound = 1.0 + error_prob * index_bits;
    let fano_holds = h_k_given_kprime <= fano_bound + 1e-9;

    // Holevo information of the codebook ensemble on the receiver side.
    let dim_b = channel
        .dim_b()
        .checked_pow(codebook.codewords[0].len() as u32)
        .unwrap_or(usize::MAX);
    let (i_k_bob, data_processing_holds) = if dim_b <= 256 && k <= 256 {
        let states: Vec<ComplexMatrix> = codebook
            .codewords
            .iter()
            .map(|w| channel.bob_sequence_state(w))
            .collect();
        let mut avg = ComplexMatrix::zeros(dim_b, dim_b);
        for s in &states {
            avg = avg.add(&s.scale_real(p_k));
        }
        let h_avg = crate::information::von_neumann_entropy_matrix(&avg.hermitized())?;
        let mut h_cond = 0.0;
        for s in &states {
            h_cond += p_k * crate::information::von_neumann_entropy_matrix(s)?;
        }
        let holevo = h_avg - h_cond;
        (Some(holevo), Some(i_k_kprime <= holevo + 1e-9))
    } else {
        (None, None)
    };

    Ok(FanoCheck {
        h_k_given_kprime,
        fano_bound,
        fano_holds,
        i_k_kprime,
        i_k_bob,
        data_processing_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;

    fn pure(amps: &[f64]) -> ComplexMatrix {
        let v = ComplexVector::from_real(amps).normalized();
        v.outer(&v)
    }

    fn basis_proj(x: usize) -> ComplexMatrix {
        pure(&[(1 - x) as f64, x as f64])
    }

    fn copy_to_both() -> CqWiretapChannel {
        let outputs = (0..2).map(|x| basis_proj(x).tensor(&basis_proj(x))).collect();
        CqWiretapChannel::from_matrices(vec!["0".into(), "1".into()], None, outputs, 2, 2).unwrap()
    }

    fn constant_eve() -> CqWiretapChannel {
        let outputs = (0..2).map(|x| basis_proj(x).tensor(&basis_proj(0))).collect();
        CqWiretapChannel::from_matrices(vec!["0".into(), "1".into()], None, outputs, 2, 2).unwrap()
    }

    #[test]
    fn code_spec_bit_widths() {
        let spec = CodeSpec::new(6, 0.5, 1.0, 0).unwrap();
        assert_eq!(spec.message_bits, 3);
        assert_eq!(spec.key_bits, 6);
        assert_eq!(spec.index_bits, 6);
        let spec = CodeSpec::new(8, 0.6, 0.0, 0).unwrap();
        assert_eq!(spec.message_bits, 5);
        assert_eq!(spec.key_bits, 0);
        assert_eq!(spec.index_bits, 5);
        // Float noise must not inflate exact products.
        let spec = CodeSpec::new(10, 0.1, 0.0, 0).unwrap();
        assert_eq!(spec.message_bits, 1);
    }

    #[test]
    fn pairing_zero_key_is_identity() {
        let map = build_pairing(3, 0).unwrap();
        for m in 0..8 {
            assert_eq!(map.encrypt(m, 0), m);
            assert_eq!(map.decrypt(m, 0), m);
        }
    }

    #[test]
    fn pairing_equal_widths_is_xor_latin_square() {
        let map = build_pairing(2, 2).unwrap();
        for m in 0..4u64 {
            let row: Vec<u64> = (0..4).map(|s| map.encrypt(m, s)).collect();
            let mut sorted = row.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3], "row {m} is a permutation");
            assert_eq!(map.encrypt(m, 0), m, "XOR with zero key");
        }
    }

    #[test]
    fn pairing_injectivity_exhaustive() {
        // message_bits=3, key_bits=2: all 32 (m, s) pairs checked.
        let map = build_pairing(3, 2).unwrap();
        map.verify_injectivity().unwrap();
        // Wide-key generalization keeps both injectivity requirements.
        let map = build_pairing(2, 4).unwrap();
        assert_eq!(map.index_bits, 4);
        map.verify_injectivity().unwrap();
    }

    #[test]
    fn codebook_determinism_and_degenerate_distribution() {
        let ch = copy_to_both();
        let spec = CodeSpec::new(4, 0.5, 0.0, 7).unwrap();
        let a = sample_codebook(&ch, &[1.0, 0.0], &spec).unwrap();
        assert!(a.codewords.iter().all(|w| w.iter().all(|&x| x == 0)));
        let b = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        let c = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        assert_eq!(b.codewords, c.codewords);
    }

    #[test]
    fn codebook_frequency_concentrates() {
        let ch = copy_to_both();
        // n=8, 16 codewords: 128 draws, 3 sigma for Bin(128, 1/2) is ~0.13.
        let spec = CodeSpec::new(8, 0.5, 0.0, 3).unwrap();
        let cb = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        assert!((cb.empirical_freqs[0] - 0.5).abs() < 0.14);
    }

    #[test]
    fn pgm_orthogonal_codewords_decode_perfectly() {
        let ch = copy_to_both();
        let codebook = Codebook {
            codewords: vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            sample_probs: vec![0.5, 0.5],
            empirical_freqs: vec![0.5, 0.5],
        };
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        for (k, row) in table.probs.iter().enumerate() {
            assert!((row[k] - 1.0).abs() < 1e-10, "row {k}: {row:?}");
        }
        assert!(table.average_error() < 1e-10);
    }

    #[test]
    fn pgm_identical_codewords_split_evenly() {
        let ch = copy_to_both();
        let codebook = Codebook {
            codewords: vec![vec![1, 0], vec![1, 0]],
            sample_probs: vec![0.5, 0.5],
            empirical_freqs: vec![0.5, 0.5],
        };
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        for row in &table.probs {
            assert!((row[0] - 0.5).abs() < 1e-10);
            assert!((row[1] - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn pgm_two_pure_states_error() {
        // |0> vs |+>: per-codeword error (1 - sqrt(1 - |<0|+>|^2))/2.
        let outputs = vec![
            basis_proj(0).tensor(&basis_proj(0)),
            pure(&[1.0, 1.0]).tensor(&basis_proj(0)),
        ];
        let ch =
            CqWiretapChannel::from_matrices(vec!["0".into(), "1".into()], None, outputs, 2, 2)
                .unwrap();
        let codebook = Codebook {
            codewords: vec![vec![0], vec![1]],
            sample_probs: vec![0.5, 0.5],
            empirical_freqs: vec![0.5, 0.5],
        };
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        let overlap_sq: f64 = 0.5;
        let oracle = (1.0 - (1.0 - overlap_sq).sqrt()) / 2.0;
        for (k, row) in table.probs.iter().enumerate() {
            assert!(
                ((1.0 - row[k]) - oracle).abs() < 1e-9,
                "row {k}: error {} vs oracle {oracle}",
                1.0 - row[k]
            );
        }
        assert!((oracle - 0.146447).abs() < 1e-6);
    }

    #[test]
    fn decode_matrix_matches_direct_trace_oracle() {
        let ch = constant_eve();
        let spec = CodeSpec::new(4, 0.5, 0.0, 11).unwrap();
        let codebook = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        for (k, w) in codebook.codewords.iter().enumerate() {
            let sigma = ch.bob_sequence_state(w);
            for (kp, e) in povm.elements.iter().enumerate() {
                let oracle = e.matmul(&sigma).unwrap().trace().re;
                assert!(
                    (table.probs[k][kp] - oracle.max(0.0)).abs() < 1e-10,
                    "entry ({k},{kp})"
                );
            }
        }
    }

    #[test]
    fn obfuscation_error_cases() {
        // Constant Eve: every covering set is perfect.
        let ch = constant_eve();
        let spec = CodeSpec::new(4, 0.5, 0.5, 5).unwrap();
        let codebook = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        let pairing = build_pairing(spec.message_bits, spec.key_bits).unwrap();
        for m in 0..4 {
            assert!(obfuscation_error(&ch, &codebook, &pairing, m).unwrap() < 1e-9);
        }

        // Zero key bits: oe is the distance of the single codeword state.
        let ch = copy_to_both();
        let spec = CodeSpec::new(3, 1.0, 0.0, 2).unwrap();
        let codebook = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        let pairing = build_pairing(spec.message_bits, 0).unwrap();
        let reference = reference_eve_state(&ch, &[0.5, 0.5], 3);
        for m in 0..4u64 {
            let direct = trace_norm_distance(
                &ch.eve_sequence_state(&codebook.codewords[m as usize]),
                &reference,
            )
            .unwrap();
            let oe = obfuscation_error(&ch, &codebook, &pairing, m).unwrap();
            assert!((oe - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn obfuscation_error_improves_with_more_key() {
        // Copy-to-Eve outputs: more key means a larger covering set per
        // message, hence smaller oe for most seeds.
        let ch = copy_to_both();
        let mut wins = 0u64;
        let seeds = 50u64;
        for seed in 0..seeds {
            let spec_hi = CodeSpec::new(6, 1.0, 4.0 / 6.0, seed).unwrap();
            let cb = sample_codebook(&ch, &[0.5, 0.5], &spec_hi).unwrap();
            let pair_hi = build_pairing(spec_hi.message_bits, 4).unwrap();
            let pair_lo = build_pairing(spec_hi.message_bits, 1).unwrap();
            let oe_hi = obfuscation_error(&ch, &cb, &pair_hi, 0).unwrap();
            let oe_lo = obfuscation_error(&ch, &cb, &pair_lo, 0).unwrap();
            if oe_hi < oe_lo {
                wins += 1;
            }
        }
        assert!(wins * 2 > seeds, "oe(kb=4) < oe(kb=1) in {wins}/{seeds} seeds");
    }

    #[test]
    fn covering_concentration_cases() {
        let budget = Budget::default();
        // Constant Eve: fraction 0 at any positive threshold.
        let report = covering_concentration(
            &constant_eve(),
            &[0.5, 0.5],
            4,
            1.0,
            50,
            1e-4,
            0,
            &budget,
        )
        .unwrap();
        assert_eq!(report.fraction_exceeding, 0.0);

        // Zero key on copy-to-Eve outputs: single-codeword "covering" stays
        // maximally distinguishable, fraction 1 for thresholds below 1.
        let eps = 1.5e-3; // 2eps + 19 sqrt(eps) ~ 0.74 < 1
        let report = covering_concentration(
            &copy_to_both(),
            &[0.5, 0.5],
            4,
            0.0,
            50,
            eps,
            0,
            &budget,
        )
        .unwrap();
        assert!(report.oe_threshold < 1.0);
        assert_eq!(report.fraction_exceeding, 1.0);
    }

    #[test]
    fn covering_fraction_vanishes_with_blocklength_above_eve_rate() {
        // I(X;E) = H(0.15) ~ 0.61; R_s = 1 >= I(X;E) + 0.3.
        let budget = Budget::default();
        let p = [0.85, 0.15];
        let eps = 6.9e-4; // threshold ~ 0.5
        let mut fractions = Vec::new();
        for n in [4usize, 6, 8] {
            let report =
                covering_concentration(&copy_to_both(), &p, n, 1.0, 200, eps, 1, &budget).unwrap();
            fractions.push(report.fraction_exceeding);
        }
        assert!(
            fractions[0] >= fractions[1] && fractions[1] >= fractions[2],
            "fractions {fractions:?}"
        );
        assert!(fractions[2] < 0.2, "n=8 fraction {}", fractions[2]);
    }

    #[test]
    fn run_protocol_noiseless_channel_is_exact() {
        // Orthogonal receiver states, constant Eve: zero error, zero leakage.
        // Exactness needs distinct codewords, so pick the first seed whose
        // random codebook has no collisions.
        let ch = constant_eve();
        let spec = (0..)
            .map(|seed| CodeSpec::new(4, 0.5, 0.25, seed).unwrap())
            .find(|spec| {
                let cb = sample_codebook(&ch, &[0.5, 0.5], spec).unwrap();
                let mut seen = cb.codewords.clone();
                seen.sort();
                seen.dedup();
                seen.len() == cb.codewords.len()
            })
            .unwrap();
        let report = run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::default()).unwrap();
        assert!(report.avg_error < 1e-10);
        assert!(report.security_distance < 1e-9);
        assert!(report.fano.fano_holds);
        assert!(report.povm_min_eigenvalue > -POVM_EIG_TOL);
    }

    #[test]
    fn run_protocol_zero_key_matches_direct_assembly() {
        // Copy-to-Eve channel with one codeword per message and no key: the
        // post-decode state can be assembled directly from the decode table.
        let ch = copy_to_both();
        let spec = CodeSpec::new(3, 1.0, 0.0, 9).unwrap();
        let report = run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::default()).unwrap();

        let codebook = sample_codebook(&ch, &[0.5, 0.5], &spec).unwrap();
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        let dim_e = 8;
        let num_m = spec.num_messages();
        let reference = reference_eve_state(&ch, &[0.5, 0.5], 3).scale_real(1.0 / num_m as f64);
        let mut direct = 0.0;
        for mp in 0..num_m {
            let mut block = ComplexMatrix::zeros(dim_e, dim_e);
            for m in 0..num_m {
                let w = table.probs[m][mp] / num_m as f64;
                if w > 0.0 {
                    block = block.add(&ch.eve_sequence_state(&codebook.codewords[m]).scale_real(w));
                }
            }
            direct += trace_norm_distance(&block.hermitized(), &reference.hermitized()).unwrap();
        }
        // Abstain block.
        let mut abstain_mass = 0.0;
        for m in 0..num_m {
            abstain_mass += table.probs[m][num_m] / num_m as f64;
        }
        direct += abstain_mass;
        assert!(
            (report.security_distance - direct).abs() < 1e-9,
            "{} vs {}",
            report.security_distance,
            direct
        );
    }

    #[test]
    fn blockwise_security_distance_matches_full_matrix() {
        // Assemble the complete joint state Σ |m'><m'| ⊗ E_{m'} and compare
        // the generic trace distance against the blockwise sum used by
        // run_protocol.
        let ch = copy_to_both();
        let spec = CodeSpec::new(3, 2.0 / 3.0, 1.0, 4).unwrap();
        let p = [0.5, 0.5];
        let report = run_protocol(&ch, &p, &spec, &Budget::default()).unwrap();

        let pairing = build_pairing(spec.message_bits, spec.key_bits).unwrap();
        let codebook = sample_codebook(&ch, &p, &spec).unwrap();
        let povm = pgm_decoder(&ch, &codebook).unwrap();
        let table = decode_matrix(&ch, &codebook, &povm).unwrap();
        let blocks = post_decoding_blocks(&ch, &codebook, &pairing, &table).unwrap();

        let num_m = spec.num_messages();
        let dim_e = 8;
        let outcomes = num_m + 1;
        let embed = |m: usize, block: &ComplexMatrix| {
            let sel = ComplexVector::basis(outcomes, m);
            sel.outer(&sel).tensor(block)
        };
        let mut full = ComplexMatrix::zeros(outcomes * dim_e, outcomes * dim_e);
        for (m, block) in blocks.iter().enumerate() {
            full = full.add(&embed(m, block));
        }
        let reference = reference_eve_state(&ch, &p, 3).scale_real(1.0 / num_m as f64);
        let mut target = ComplexMatrix::zeros(outcomes * dim_e, outcomes * dim_e);
        for m in 0..num_m {
            target = target.add(&embed(m, &reference));
        }
        let direct = trace_norm_distance(&full.hermitized(), &target.hermitized()).unwrap();
        assert!(
            (report.security_distance - direct).abs() < 1e-9,
            "blockwise {} vs full-matrix {}",
            report.security_distance,
            direct
        );
    }

    #[test]
    fn run_protocol_deterministic() {
        let ch = copy_to_both();
        let spec = CodeSpec::new(4, 0.5, 0.5, 21).unwrap();
        let a = run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::default()).unwrap();
        let b = run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // Frozen values from an independent re-implementation (counter RNG,
        // codebook, decoder probabilities, and block assembly replicated in
        // another language for this exact seed).
        assert!((a.avg_error - 0.25).abs() < 1e-12, "avg_error = {}", a.avg_error);
        assert!(
            (a.security_distance - 1.625).abs() < 1e-9,
            "security = {}",
            a.security_distance
        );
    }

    #[test]
    fn run_protocol_triangle_bound_holds() {
        let ch = copy_to_both();
        for seed in 0..5 {
            let spec = CodeSpec::new(5, 0.6, 0.4, seed).unwrap();
            let report = run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::default()).unwrap();
            assert!(report.security_distance <= report.triangle_bound + 1e-9);
        }
    }

    #[test]
    fn security_improves_near_corner_point() {
        // Copy-to-both near its corner: key above the eavesdropper rate
        // shrinks the security distance relative to no key at all.
        let ch = copy_to_both();
        let p = [0.5, 0.5];
        let budget = Budget::default();
        let run = |key_rate: f64| -> Vec<f64> {
            (0..5)
                .map(|seed| {
                    let spec = CodeSpec::new(6, 0.8, key_rate, seed).unwrap();
                    run_protocol(&ch, &p, &spec, &budget).unwrap().security_distance
                })
                .collect()
        };
        let mut with_key = run(1.2);
        let mut without = run(0.0);
        with_key.sort_by(|a, b| a.partial_cmp(b).unwrap());
        without.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            with_key[2] < without[2],
            "medians: with key {} vs without {}",
            with_key[2],
            without[2]
        );
    }

    #[test]
    fn fano_check_uniform_random_decoding() {
        // Uniform decoding over 4 outcomes: H(K|K') = 2 <= 1 + (3/4)·2.
        let table = DecodeTable {
            probs: vec![vec![0.25, 0.25, 0.25, 0.25, 0.0]; 4],
        };
        let ch = copy_to_both();
        let codebook = Codebook {
            codewords: vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            sample_probs: vec![0.5, 0.5],
            empirical_freqs: vec![0.5, 0.5],
        };
        let fano = fano_check(&ch, &codebook, &table).unwrap();
        assert!((fano.h_k_given_kprime - 2.0).abs() < 1e-9);
        assert!((fano.fano_bound - 2.5).abs() < 1e-9);
        assert!(fano.fano_holds);
    }

    #[test]
    fn budget_violation_reported() {
        let ch = copy_to_both();
        let spec = CodeSpec::new(6, 0.5, 0.0, 0).unwrap();
        match run_protocol(&ch, &[0.5, 0.5], &spec, &Budget::from_mb(0)) {
            Err(Error::Budget { .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
