//! Typical sequence sets, (conditional) typical projectors, and numeric
//! verification of their defining bounds.
//!
//! Projector-valued operations materialize matrices on `Q^{⊗n}` and are
//! budget-guarded. The four-property verifier instead works in the product
//! eigenbasis, where every quantity reduces to exact count-vector sums (the
//! conditional state and its projector commute, so no dense eigensolve is
//! needed); a unit test cross-checks it against explicit matrices.

use crate::budget::Budget;
use crate::channels::validate_distribution;
use crate::error::{Error, Result};
use crate::information::shannon_entropy;
use crate::linalg::{hermitian_eig, ComplexMatrix, ComplexVector};
use crate::rng::CounterRng;

/// Eigenvalues at or below this threshold are treated as outside the support
/// when building spectral product bases.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct TypicalityParams {
    pub n: usize,
    pub delta: f64,
    /// Bound that the measured deviations are checked against.
    pub epsilon_target: f64,
}

impl TypicalityParams {
    pub fn new(n: usize, delta: f64, epsilon_target: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("blocklength must be >= 1".into()));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidArgument("delta must be > 0".into()));
        }
        Ok(TypicalityParams {
            n,
            delta,
            epsilon_target,
        })
    }
}

// ---------------------------------------------------------------------------
// Typical sequences
// ---------------------------------------------------------------------------

/// Exact frequency-typicality test: `|N(x|xⁿ)/n − p(x)| ≤ δ` for every
/// symbol.
pub fn is_typical(seq: &[usize], p: &[f64], delta: f64) -> bool {
    let n = seq.len() as f64;
    let mut counts = vec![0usize; p.len()];
    for &x in seq {
        counts[x] += 1;
    }
    counts
        .iter()
        .zip(p)
        .all(|(&c, &px)| (c as f64 / n - px).abs() <= delta)
}

/// Enumerate the typical set of `p` at blocklength `n` and width `delta`.
pub fn typical_set(p: &[f64], n: usize, delta: f64) -> Result<Vec<Vec<usize>>> {
    let count = (p.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    Budget::check_enumeration("typical set", count)?;
    Ok(crate::channels::all_sequences(p.len(), n)
        .into_iter()
        .filter(|seq| is_typical(seq, p, delta))
        .collect())
}

// ---------------------------------------------------------------------------
// Typical projectors
// ---------------------------------------------------------------------------

/// A projector on `Q^{⊗n}` together with its rank.
#[derive(Debug, Clone)]
pub struct TypicalProjector {
    matrix: ComplexMatrix,
    rank: usize,
}

impl TypicalProjector {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Spectral data of a state: eigenvalues descending with their eigenvectors.
fn spectral(rho: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let eig = hermitian_eig(rho)?;
    Ok((eig.values, eig.vectors))
}

/// Typical projector `Π = Σ_{yⁿ typical} |yⁿ⟩⟨yⁿ|` in the eigenbasis of
/// `rho`, restricted to the support (zero eigendirections never enter).
pub fn typical_projector(
    rho: &ComplexMatrix,
    n: usize,
    delta: f64,
    budget: &Budget,
) -> Result<TypicalProjector> {
    let (values, vectors) = spectral(rho)?;
    let states = vec![(values, vectors)];
    let xn = vec![0usize; n];
    conditional_projector_impl(&states, &xn, delta, budget)
}

/// Conditional typical projector for the symbol sequence `xn`: the product
/// over symbols of per-class typical projectors placed at the class
/// positions, identity elsewhere.
pub fn conditional_typical_projector(
    states: &[ComplexMatrix],
    xn: &[usize],
    delta: f64,
    budget: &Budget,
) -> Result<TypicalProjector> {
    if xn.iter().any(|&x| x >= states.len()) {
        return Err(Error::InvalidArgument(
            "sequence symbol outside state list".into(),
        ));
    }
    let mut specs = Vec::with_capacity(states.len());
    for s in states {
        specs.push(spectral(s)?);
    }
    conditional_projector_impl(&specs, xn, delta, budget)
}

fn conditional_projector_impl(
    specs: &[(Vec<f64>, ComplexMatrix)],
    xn: &[usize],
    delta: f64,
    budget: &Budget,
) -> Result<TypicalProjector> {
    let n = xn.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let d = specs[0].0.len();
    let dim = d.checked_pow(n as u32).ok_or_else(|| Error::Budget {
        context: "typical projector dimension".into(),
        required: u128::MAX,
        budget: 0,
    })?;
    Budget::check_enumeration("projector basis", (dim as u128).max(1))?;
    budget.check_matrices("typical projector", dim as u128, 1)?;

    // Per class: which eigen-index count vectors are typical.
    let class_positions = class_index_sets(xn, specs.len());

    // Enumerate product-eigenbasis sequences, keeping those whose class
    // subsequences are all typical (support-restricted).
    let mut matrix = ComplexMatrix::zeros(dim, dim);
    let mut rank = 0usize;
    for yn in crate::channels::all_sequences(d, n) {
        if !sequence_included(&yn, xn, specs, &class_positions, delta) {
            continue;
        }
        // |y^n> = ⊗_i (eigenvector y_i of state x_i)
        let mut vec = column(&specs[xn[0]].1, yn[0]);
        for i in 1..n {
            vec = vec.tensor(&column(&specs[xn[i]].1, yn[i]));
        }
        matrix = matrix.add(&vec.outer(&vec));
        rank += 1;
    }
    Ok(TypicalProjector {
        matrix: matrix.hermitized(),
        rank,
    })
}

fn column(m: &ComplexMatrix, j: usize) -> ComplexVector {
    ComplexVector::new((0..m.rows()).map(|i| m.get(i, j)).collect())
}

fn class_index_sets(xn: &[usize], num_symbols: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); num_symbols];
    for (i, &x) in xn.iter().enumerate() {
        sets[x].push(i);
    }
    sets
}

fn sequence_included(
    yn: &[usize],
    xn: &[usize],
    specs: &[(Vec<f64>, ComplexMatrix)],
    class_positions: &[Vec<usize>],
    delta: f64,
) -> bool {
    for (x, positions) in class_positions.iter().enumerate() {
        if positions.is_empty() {
            continue;
        }
        let q = &specs[x].0;
        let k = positions.len();
        let mut counts = vec![0usize; q.len()];
        for &i in positions {
            counts[yn[i]] += 1;
        }
        // Support restriction: occupied zero directions are never typical.
        for (j, &c) in counts.iter().enumerate() {
            if q[j] <= SUPPORT_TOL && c > 0 {
                return false;
            }
            if (c as f64 / k as f64 - q[j]).abs() > delta {
                return false;
            }
        }
        let _ = xn;
    }
    true
}

// ---------------------------------------------------------------------------
// Count-vector computations for the four-property verifier
// ---------------------------------------------------------------------------

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Enumerate count vectors (compositions of `k` into `d` parts).
fn compositions(k: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=k {
            prefix.push(c);
            rec(k - c, d - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, d, &mut Vec::new(), &mut out);
    out
}

fn counts_typical(counts: &[usize], k: usize, q: &[f64], delta: f64) -> bool {
    counts.iter().zip(q).all(|(&c, &qj)| {
        if qj <= SUPPORT_TOL {
            c == 0
        } else {
            (c as f64 / k as f64 - qj).abs() <= delta
        }
    })
}

/// Probability mass of the typical set of `q^{⊗k}`:
/// `Σ_{N typical} multinomial(k;N) Π q_j^{N_j}`.
fn class_typical_mass(q: &[f64], k: usize, delta: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let lnk = ln_factorial(k);
    let mut mass = 0.0;
    for counts in compositions(k, q.len()) {
        if !counts_typical(&counts, k, q, delta) {
            continue;
        }
        let mut ln_term = lnk;
        for (&c, &qj) in counts.iter().zip(q) {
            if c > 0 {
                ln_term += c as f64 * qj.ln() - ln_factorial(c);
            }
        }
        mass += ln_term.exp();
    }
    mass
}

/// Number of typical eigen-index sequences for `q^{⊗k}` (the per-class rank).
fn class_rank(q: &[f64], k: usize, delta: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let lnk = ln_factorial(k);
    let mut rank = 0.0;
    for counts in compositions(k, q.len()) {
        if counts_typical(&counts, k, q, delta) {
            let ln_count = lnk - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>();
            rank += ln_count.exp();
        }
    }
    rank
}

/// Largest eigenvalue `Π_j q_j^{N_j}` over typical count vectors, 0 when the
/// typical set is empty.
fn class_max_prob(q: &[f64], k: usize, delta: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut best: Option<f64> = None;
    for counts in compositions(k, q.len()) {
        if !counts_typical(&counts, k, q, delta) {
            continue;
        }
        let ln_p: f64 = counts
            .iter()
            .zip(q)
            .map(|(&c, &qj)| if c > 0 { c as f64 * qj.ln() } else { 0.0 })
            .sum();
        best = Some(best.map_or(ln_p, |b: f64| b.max(ln_p)));
    }
    best.map_or(0.0, f64::exp)
}

/// `tr(σ_{xⁿ} Π)` where `Π` projects onto sequences typical for `q_ref` and
/// position `i` carries diagonal weights `weights[i][z] = ⟨z|σ_{x_i}|z⟩` in
/// the reference basis. Dynamic program over count vectors.
fn projected_overlap_dp(weights: &[Vec<f64>], q_ref: &[f64], delta: f64) -> f64 {
    let n = weights.len();
    let d = q_ref.len();
    // Mixed-radix index over count vectors with digits in 0..=n.
    let radix = n + 1;
    let size = radix.pow(d as u32);
    let mut f = vec![0.0f64; size];
    f[0] = 1.0;
    for w in weights {
        let mut next = vec![0.0f64; size];
        for (idx, &val) in f.iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            let mut stride = 1usize;
            for &wz in w.iter() {
                if wz != 0.0 {
                    next[idx + stride] += val * wz;
                }
                stride *= radix;
            }
        }
        f = next;
    }
    let mut total = 0.0;
    for (idx, &val) in f.iter().enumerate() {
        if val == 0.0 {
            continue;
        }
        let mut counts = Vec::with_capacity(d);
        let mut rest = idx;
        for _ in 0..d {
            counts.push(rest % radix);
            rest /= radix;
        }
        if counts.iter().sum::<usize>() == n && counts_typical(&counts, n, q_ref, delta) {
            total += val;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Four-property verification
// ---------------------------------------------------------------------------

/// Measured deviations and empirical constants for the four typicality
/// bounds at blocklength `n`.
#[derive(Debug, Clone)]
pub struct FourPropertyReport {
    pub n: usize,
    pub delta: f64,
    /// Width `δ(|𝒳|+1)` used by the unconditional projector bounds.
    pub delta_wide: f64,
    pub samples_used: usize,
    /// Worst `1 − tr σ_{xⁿ} Π(xⁿ)` over sampled typical sequences.
    pub eps_conditional: f64,
    /// Worst `1 − tr σ_{xⁿ} Π_avg` over sampled typical sequences.
    pub eps_average: f64,
    /// Worst observed deviation (max of the two above).
    pub eps_hat: f64,
    /// `tr Π_avg` at the widened width.
    pub projector_trace: f64,
    /// Largest conditional-projector eigenvalue of `Π σ_{xⁿ} Π` observed.
    pub lambda_max: f64,
    /// Smallest empirically sufficient constant in the α/β exponents.
    pub c_min: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Min eigenvalue of `β̂⁻¹Π − Π σ Π` (0 off support, exact on support).
    pub min_eig_cond8: f64,
    pub pass: bool,
}

/// Measure the four typicality properties for channel states `{σ_x}` under
/// input distribution `p`, Monte Carlo over `samples` typical sequences
/// (exhaustive when the typical set is small enough).
pub fn verify_four_properties(
    states: &[ComplexMatrix],
    p: &[f64],
    params: &TypicalityParams,
    samples: usize,
    seed: u64,
) -> Result<FourPropertyReport> {
    validate_distribution(p, states.len(), "four-property verifier")?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n = params.n;
    let delta = params.delta;
    let delta_wide = delta * (states.len() as f64 + 1.0);

    let mut specs = Vec::with_capacity(states.len());
    for s in states {
        specs.push(spectral(s)?);
    }
    let dim = states[0].rows();
    let mut avg = ComplexMatrix::zeros(dim, dim);
    for (s, &w) in states.iter().zip(p) {
        avg = avg.add(&s.scale_real(w));
    }
    let (q_avg, v_avg) = spectral(&avg)?;
    let h_avg = shannon_entropy(&q_avg);
    let h_cond: f64 = specs
        .iter()
        .zip(p)
        .map(|((q, _), &w)| w * shannon_entropy(q))
        .sum();

    // Per-symbol diagonal weights of σ_x in the average state's eigenbasis.
    let mut avg_basis_weights = Vec::with_capacity(states.len());
    for s in states {
        let mut w = Vec::with_capacity(dim);
        for z in 0..dim {
            let col = column(&v_avg, z);
            w.push(col.inner(&s.mul_vec(&col)).re.max(0.0));
        }
        avg_basis_weights.push(w);
    }

    let tx = typical_set(p, n, delta)?;
    if tx.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "typical set of the input distribution is empty at n={n}, delta={delta}"
        )));
    }
    let chosen: Vec<Vec<usize>> = if tx.len() <= samples {
        tx
    } else {
        let mut rng = CounterRng::new(seed);
        (0..samples).map(|_| tx[rng.next_below(tx.len())].clone()).collect()
    };

    let mut eps_conditional = 0.0f64;
    let mut eps_average = 0.0f64;
    let mut lambda_max = 0.0f64;
    for xn in &chosen {
        let class_sets = class_index_sets(xn, states.len());
        let mut t5 = 1.0;
        let mut lmax = 1.0;
        for (x, positions) in class_sets.iter().enumerate() {
            let k = positions.len();
            if k == 0 {
                continue;
            }
            t5 *= class_typical_mass(&specs[x].0, k, delta);
            lmax *= class_max_prob(&specs[x].0, k, delta);
        }
        let weights: Vec<Vec<f64>> = xn.iter().map(|&x| avg_basis_weights[x].clone()).collect();
        let t6 = projected_overlap_dp(&weights, &q_avg, delta_wide);
        eps_conditional = eps_conditional.max(1.0 - t5);
        eps_average = eps_average.max(1.0 - t6);
        lambda_max = lambda_max.max(lmax);
    }

    // Width-widened unconditional projector trace (property 3).
    let projector_trace = class_rank(&q_avg, n, delta_wide);

    // Smallest c validating tr Π ≤ 2^{n[H(Q)+cδ]} and the operator bound
    // Π σ Π ≤ β⁻¹ Π with β = 2^{n[H(Q|X)−cδ]}.
    let nf = n as f64;
    let c_alpha = if projector_trace > 0.0 {
        ((projector_trace.log2() / nf - h_avg) / delta).max(0.0)
    } else {
        0.0
    };
    let c_beta = if lambda_max > 0.0 {
        ((h_cond + lambda_max.log2() / nf) / delta).max(0.0)
    } else {
        0.0
    };
    let c_min = c_alpha.max(c_beta);
    let alpha_hat = (nf * (h_avg + c_min * delta)).exp2();
    let beta_hat = (nf * (h_cond - c_min * delta)).exp2();
    let min_eig_cond8 = (1.0 / beta_hat - lambda_max).min(0.0);

    let eps_hat = eps_conditional.max(eps_average);
    let pass = eps_hat <= params.epsilon_target
        && projector_trace <= alpha_hat * (1.0 + 1e-12)
        && min_eig_cond8 >= -1e-9;

    Ok(FourPropertyReport {
        n,
        delta,
        delta_wide,
        samples_used: chosen.len(),
        eps_conditional,
        eps_average,
        eps_hat,
        projector_trace,
        lambda_max,
        c_min,
        alpha_hat,
        beta_hat,
        min_eig_cond8,
        pass,
    })
}
