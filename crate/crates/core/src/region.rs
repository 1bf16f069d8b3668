//! The secret-key-assisted private capacity region: feasibility tests,
//! corner points, and boundary sampling by optimization over input
//! distributions.
//!
//! At key rate `R_s` the achievable private rate is
//! `max_p min{ I(X;B), I(X;B) − I(X;E) + R_s }`. The optimizer is an
//! exhaustive simplex grid for small alphabets (projected pairwise
//! line-search refinement on top), falling back to a coarse grid plus random
//! restarts for larger ones; the min-of-two objective is not assumed
//! concave.

use rayon::prelude::*;

use crate::budget::Budget;
use crate::channels::CqWiretapChannel;
use crate::error::{Error, Result};
use crate::information::holevo_pair;
use crate::rng::CounterRng;

/// Feasibility slack for the two rate inequalities.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A point in the (private rate, key rate) plane, bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub private_rate: f64,
    pub key_rate: f64,
}

impl RatePoint {
    pub fn new(private_rate: f64, key_rate: f64) -> Result<Self> {
        if private_rate < 0.0 || key_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rates must be nonnegative, got ({private_rate}, {key_rate})"
            )));
        }
        Ok(RatePoint {
            private_rate,
            key_rate,
        })
    }
}

/// `true` iff `(R, R_s)` satisfies both region inequalities at input
/// distribution `p`.
pub fn rate_pair_feasible(
    channel: &CqWiretapChannel,
    p: &[f64],
    point: &RatePoint,
) -> Result<bool> {
    let (ib, ie) = holevo_pair(channel, p)?;
    Ok(point.private_rate <= ib + FEASIBILITY_TOL
        && point.private_rate <= ib - ie + point.key_rate + FEASIBILITY_TOL)
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Simplex grid denominator for alphabets of size <= 3.
    pub grid_step: usize,
    /// Coarser grid denominator used to seed larger alphabets.
    pub coarse_step: usize,
    /// Random restarts for alphabets of size >= 4.
    pub restarts: usize,
    /// Stop refining when a full round improves the objective by less.
    pub tolerance: f64,
    /// Cap on refinement rounds.
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grid_step: 200,
            coarse_step: 30,
            restarts: 20,
            tolerance: 1e-8,
            max_rounds: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub converged: bool,
}

/// All distributions on `k` symbols with denominators `step` (lexicographic).
pub fn grid_distributions(k: usize, step: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, remaining: usize, step: usize, prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            prefix.push(remaining as f64 / step as f64);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=remaining {
            prefix.push(c as f64 / step as f64);
            rec(k - 1, remaining - c, step, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, step, step, &mut Vec::new(), &mut out);
    out
}

fn clip_to_simplex(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        vec![1.0 / p.len() as f64; p.len()]
    } else {
        clipped.iter().map(|&x| x / total).collect()
    }
}

/// Maximize `objective(I(X;B), I(X;E))` over input distributions.
fn optimize_over_distributions(
    channel: &CqWiretapChannel,
    config: &OptimizerConfig,
    objective: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<OptimizeResult> {
    let k = channel.alphabet_len();
    let eval = |p: &[f64]| -> f64 {
        match holevo_pair(channel, p) {
            Ok((ib, ie)) => objective(ib, ie),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let mut candidates: Vec<Vec<f64>> = if k <= 3 {
        grid_distributions(k, config.grid_step)
    } else {
        let mut c = grid_distributions(k, config.coarse_step);
        let mut rng = CounterRng::new(config.seed);
        for _ in 0..config.restarts {
            let raw: Vec<f64> = (0..k).map(|_| -rng.next_f64().max(1e-12).ln()).collect();
            c.push(clip_to_simplex(&raw));
        }
        c
    };
    candidates.push(vec![1.0 / k as f64; k]);

    let scored: Vec<f64> = candidates.par_iter().map(|p| eval(p)).collect();
    let mut best_idx = 0usize;
    for (i, &v) in scored.iter().enumerate() {
        if v > scored[best_idx] {
            best_idx = i;
        }
    }

    let (argmax, value, converged) = refine_on_simplex(
        &eval,
        candidates[best_idx].clone(),
        config.tolerance,
        config.max_rounds,
    );
    Ok(OptimizeResult {
        value,
        argmax,
        converged,
    })
}

/// Pairwise mass-exchange line search on the simplex (golden section per
/// pair), iterated until a full round improves less than `tol`.
fn refine_on_simplex(
    eval: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    tol: f64,
    max_rounds: usize,
) -> (Vec<f64>, f64, bool) {
    let k = start.len();
    let mut p = start;
    let mut best = eval(&p);
    if k < 2 {
        return (p, best, true);
    }
    let mut converged = false;
    for _ in 0..max_rounds {
        let round_start = best;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                // Move mass t from j to i, t in [0, p[j]].
                let phi = |t: f64, base: &[f64]| {
                    let mut q = base.to_vec();
                    q[i] += t;
                    q[j] -= t;
                    eval(&clip_to_simplex(&q))
                };
                let (t_best, v_best) = golden_max(&|t| phi(t, &p), 0.0, p[j]);
                if v_best > best + 1e-15 {
                    p[i] += t_best;
                    p[j] -= t_best;
                    p = clip_to_simplex(&p);
                    best = v_best;
                }
            }
        }
        if best - round_start < tol {
            converged = true;
            break;
        }
    }
    (p, best, converged)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b - a < 1e-12 {
        return (a, f(a));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if b - a < 1e-11 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / 2.0;
    (mid, f(mid))
}

// ---------------------------------------------------------------------------
// Region operations
// ---------------------------------------------------------------------------

/// Max private rate at fixed key rate, with the optimizing distribution.
pub fn max_rate_at_key(
    channel: &CqWiretapChannel,
    key_rate: f64,
    config: &OptimizerConfig,
) -> Result<OptimizeResult> {
    if key_rate < 0.0 {
        return Err(Error::InvalidArgument("key rate must be >= 0".into()));
    }
    let mut result = optimize_over_distributions(channel, config, &|ib: f64, ie: f64| {
        ib.min(ib - ie + key_rate)
    })?;
    result.value = result.value.max(0.0);
    Ok(result)
}

/// A corner of the trade-off region with its optimizing distribution.
#[derive(Debug, Clone)]
pub struct CornerPoint {
    pub point: RatePoint,
    pub distribution: Vec<f64>,
}

/// The two limiting points of the region boundary: `P` (no key assistance,
/// clipped difference rate) and `Q` (key rate buys the full receiver rate).
pub fn corner_points(
    channel: &CqWiretapChannel,
    config: &OptimizerConfig,
) -> Result<(CornerPoint, CornerPoint)> {
    let diff = optimize_over_distributions(channel, config, &|ib: f64, ie: f64| ib - ie)?;
    let p_corner = CornerPoint {
        point: RatePoint::new(diff.value.max(0.0), 0.0)?,
        distribution: diff.argmax,
    };

    let bob = optimize_over_distributions(channel, config, &|ib: f64, _| ib)?;
    let (ib_q, ie_q) = holevo_pair(channel, &bob.argmax)?;
    let q_corner = CornerPoint {
        point: RatePoint::new(ib_q.max(0.0), ie_q.max(0.0))?,
        distribution: bob.argmax,
    };
    Ok((p_corner, q_corner))
}

#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub key_rate: f64,
    pub max_rate: f64,
    pub distribution: Vec<f64>,
    pub converged: bool,
}

/// Sampled boundary of the single-shot region.
#[derive(Debug, Clone)]
pub struct RegionBoundary {
    pub samples: Vec<BoundarySample>,
    pub corner_p: CornerPoint,
    pub corner_q: CornerPoint,
    /// Upper concave envelope of the sampled boundary (time-sharing closure).
    pub envelope: Vec<(f64, f64)>,
}

/// Sample the boundary at `n_samples` key rates spanning `[0, 1.25·Q.R_s]`.
pub fn region_boundary(
    channel: &CqWiretapChannel,
    n_samples: usize,
    config: &OptimizerConfig,
) -> Result<RegionBoundary> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 boundary samples".into()));
    }
    let (corner_p, corner_q) = corner_points(channel, config)?;
    let top = 1.25 * corner_q.point.key_rate;
    let samples: Vec<BoundarySample> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let key_rate = if n_samples == 1 {
                0.0
            } else {
                top * i as f64 / (n_samples - 1) as f64
            };
            let r = max_rate_at_key(channel, key_rate, config)?;
            Ok(BoundarySample {
                key_rate,
                max_rate: r.value,
                distribution: r.argmax,
                converged: r.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let envelope = upper_concave_envelope(
        &samples
            .iter()
            .map(|s| (s.key_rate, s.max_rate))
            .collect::<Vec<_>>(),
    );
    Ok(RegionBoundary {
        samples,
        corner_p,
        corner_q,
        envelope,
    })
}

/// Vertices of the least concave majorant of a set of (x, y) samples with
/// nondecreasing x.
pub fn upper_concave_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            // Keep only right turns (concave from above).
            if cross >= -1e-15 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

// ---------------------------------------------------------------------------
// Small tensor powers
// ---------------------------------------------------------------------------

/// Max per-use private rate of `W^{⊗n}` at per-use key rate `key_rate`.
///
/// `joint = false` restricts to i.i.d. product distributions (optimizing the
/// single-letter distribution); `joint = true` optimizes the full joint
/// simplex over sequences and is intended for `n = 2`.
pub fn tensor_power_max_rate(
    channel: &CqWiretapChannel,
    n: usize,
    joint: bool,
    key_rate: f64,
    config: &OptimizerConfig,
    budget: &Budget,
) -> Result<OptimizeResult> {
    if n == 0 || n > 3 {
        return Err(Error::InvalidArgument(
            "tensor-power rates supported for 1 <= n <= 3".into(),
        ));
    }
    if n == 1 {
        return max_rate_at_key(channel, key_rate, config);
    }
    let power = channel.tensor_power(n, budget)?;
    let total_key = key_rate * n as f64;
    let objective = move |ib: f64, ie: f64| ib.min(ib - ie + total_key);

    if joint {
        let mut result = optimize_over_distributions(&power, config, &objective)?;
        // Seed with the best single-letter product in case the coarse joint
        // grid missed it; keep whichever is better.
        let product = best_product_distribution(channel, &power, n, config, &objective)?;
        if product.value > result.value {
            result = product;
        }
        result.value = (result.value / n as f64).max(0.0);
        Ok(result)
    } else {
        let mut result = best_product_distribution(channel, &power, n, config, &objective)?;
        result.value = (result.value / n as f64).max(0.0);
        Ok(result)
    }
}

fn best_product_distribution(
    base: &CqWiretapChannel,
    power: &CqWiretapChannel,
    n: usize,
    config: &OptimizerConfig,
    objective: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<OptimizeResult> {
    let k = base.alphabet_len();
    let to_product = |p: &[f64]| -> Vec<f64> {
        crate::channels::all_sequences(k, n)
            .iter()
            .map(|seq| seq.iter().map(|&x| p[x]).product())
            .collect()
    };
    let eval = |p: &[f64]| -> f64 {
        match holevo_pair(power, &to_product(&clip_to_simplex(p))) {
            Ok((ib, ie)) => objective(ib, ie),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let step = if k <= 3 { config.grid_step } else { config.coarse_step };
    let candidates = grid_distributions(k, step);
    let scored: Vec<f64> = candidates.par_iter().map(|p| eval(p)).collect();
    let mut best_idx = 0usize;
    for (i, &v) in scored.iter().enumerate() {
        if v > scored[best_idx] {
            best_idx = i;
        }
    }
    let (argmax_single, value, converged) = refine_on_simplex(
        &eval,
        candidates[best_idx].clone(),
        config.tolerance,
        config.max_rounds,
    );
    Ok(OptimizeResult {
        value,
        argmax: to_product(&argmax_single),
        converged,
    })
}
