//! Ground-truth diagnostics: exhaustive enumeration of the models reachable
//! with `h` extra samples per pair, the optimal value under the best
//! reachable model, and the evaluation metrics built on it.

use crate::explorers::TransitionCounts;
use crate::mdp::{policy_value, value_iteration, MdpError, Policy, TabularMdp, ValueFunction};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration would visit {allocations:.3e} allocations (> {limit:.1e} guard)")]
    Capacity { allocations: f64, limit: f64 },
    #[error("counts row has {got} successors, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("series has {got} entries, need at least {need}")]
    SeriesTooShort { need: usize, got: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Explorer(#[from] crate::explorers::ExplorerError),
}

const ENUMERATION_GUARD: f64 = 1e6;

/// Distribution of `h` extra samples over successor states for one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachableAllocation {
    pub extra: Vec<u64>,
}

/// `C(h + k - 1, k - 1)` as a float, saturating.
fn composition_count(h: u64, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 1..k as u64 {
        acc *= (h + i) as f64 / i as f64;
        if acc > 1e18 {
            return f64::INFINITY;
        }
    }
    acc
}

/// Visits every composition of `h` into `k` parts in lexicographic order.
fn for_each_allocation<F: FnMut(&[u64])>(h: u64, k: usize, visit: &mut F) {
    let mut alloc = vec![0u64; k];
    fn recurse<F: FnMut(&[u64])>(alloc: &mut Vec<u64>, idx: usize, remaining: u64, visit: &mut F) {
        if idx + 1 == alloc.len() {
            alloc[idx] = remaining;
            visit(alloc);
            return;
        }
        for take in 0..=remaining {
            alloc[idx] = take;
            recurse(alloc, idx + 1, remaining - take, visit);
        }
        alloc[idx] = 0;
    }
    if k == 0 {
        return;
    }
    recurse(&mut alloc, 0, h, visit);
}

/// The sample-mean model reachable with `h` extra samples that is closest to
/// `p_true` in L1 distance, by exhaustive enumeration. Ties resolve to the
/// lexicographically smallest allocation.
pub fn best_reachable_model(
    counts_sa: &[u64],
    p_true: &[f64],
    h: u64,
) -> Result<Vec<f64>, OracleError> {
    if counts_sa.len() != p_true.len() {
        return Err(OracleError::ShapeMismatch { expected: p_true.len(), got: counts_sa.len() });
    }
    let k = counts_sa.len();
    let combos = composition_count(h, k);
    if combos > ENUMERATION_GUARD {
        return Err(OracleError::Capacity { allocations: combos, limit: ENUMERATION_GUARD });
    }
    let n: u64 = counts_sa.iter().sum();
    let denom = (n + h) as f64;
    let mut best_dist = f64::INFINITY;
    let mut best_model: Option<Vec<f64>> = None;
    for_each_allocation(h, k, &mut |alloc| {
        let mut dist = 0.0;
        for i in 0..k {
            let p = (counts_sa[i] + alloc[i]) as f64 / denom;
            dist += (p - p_true[i]).abs();
        }
        // strict improvement keeps the first (lexicographically smallest)
        if dist < best_dist {
            best_dist = dist;
            best_model = Some(
                (0..k)
                    .map(|i| (counts_sa[i] + alloc[i]) as f64 / denom)
                    .collect(),
            );
        }
    });
    Ok(best_model.expect("at least one allocation exists"))
}

/// L1 distance from the best reachable model to `p_true`; used by the
/// monotonicity diagnostics.
pub fn best_reachable_distance(
    counts_sa: &[u64],
    p_true: &[f64],
    h: u64,
) -> Result<f64, OracleError> {
    let model = best_reachable_model(counts_sa, p_true, h)?;
    Ok(model.iter().zip(p_true).map(|(a, b)| (a - b).abs()).sum())
}

/// Optimal value under the best reachable model per pair, plus the pairs
/// where an unvisited model at `h = 0` fell back to the uniform
/// distribution.
#[derive(Debug, Clone)]
pub struct HReachableValue {
    pub values: ValueFunction,
    pub uniform_fallback_pairs: Vec<(usize, usize)>,
}

/// Builds the best `h`-reachable model independently for every pair and runs
/// value iteration on the assembled MDP (true rewards, reachable
/// transitions).
pub fn h_reachable_optimal_value(
    true_mdp: &TabularMdp,
    counts: &TransitionCounts,
    h: u64,
    tol: f64,
) -> Result<HReachableValue, OracleError> {
    let s_count = true_mdp.num_states();
    let a_count = true_mdp.num_actions();
    let mut transition = vec![0.0; s_count * a_count * s_count];
    let mut fallback = Vec::new();
    for s in 0..s_count {
        for a in 0..a_count {
            let base = (s * a_count + a) * s_count;
            let row_counts = counts.successor_counts(s, a);
            let n: u64 = row_counts.iter().sum();
            if n == 0 && h == 0 {
                // the current model is undefined here; substitute uniform
                // and record the pair so metrics stay total
                for sp in 0..s_count {
                    transition[base + sp] = 1.0 / s_count as f64;
                }
                fallback.push((s, a));
                continue;
            }
            let best = best_reachable_model(row_counts, true_mdp.transition_row(s, a), h)?;
            transition[base..base + s_count].copy_from_slice(&best);
        }
    }
    let model = TabularMdp::new(
        s_count,
        a_count,
        transition,
        true_mdp.reward_tensor().to_vec(),
        true_mdp.gamma(),
    )?;
    Ok(HReachableValue {
        values: value_iteration(&model, tol)?,
        uniform_fallback_pairs: fallback,
    })
}

/// Shortfall of the agent's snapshot policy against the `h`-reachable
/// optimal value at the visited state, floored at zero.
pub fn anytime_error(
    true_mdp: &TabularMdp,
    agent_policy: &Policy,
    counts: &TransitionCounts,
    h: u64,
    state: usize,
    tol: f64,
) -> Result<f64, OracleError> {
    let reachable = h_reachable_optimal_value(true_mdp, counts, h, tol)?;
    let v_pi = policy_value(true_mdp, agent_policy, tol)?;
    Ok((reachable.values.values[state] - v_pi.values[state]).max(0.0))
}

/// Anytime `T`-step average loss: `(1/T) sum_{t=1..T} (1 - gamma^(T+1-t)) eps_t`.
pub fn average_loss(errors: &[f64], horizon: usize, gamma: f64) -> Result<f64, OracleError> {
    if horizon == 0 {
        return Err(OracleError::EmptyHorizon);
    }
    if errors.len() < horizon {
        return Err(OracleError::SeriesTooShort { need: horizon, got: errors.len() });
    }
    let mut acc = 0.0;
    for t in 1..=horizon {
        let weight = 1.0 - gamma.powi((horizon + 1 - t) as i32);
        acc += weight * errors[t - 1];
    }
    Ok(acc / horizon as f64)
}

/// First index after which every gap stays within `eps`; `None` when the
/// tail never settles.
pub fn explicit_exploration_runtime(gaps: &[f64], eps: f64) -> Option<usize> {
    let mut tau = 0;
    for (i, &g) in gaps.iter().enumerate() {
        if g > eps {
            tau = i + 1;
        }
    }
    if tau >= gaps.len() && !gaps.is_empty() && gaps[gaps.len() - 1] > eps {
        None
    } else {
        Some(tau)
    }
}

/// Per-step diagnostic records collected by the harness.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    /// `(step, eps_{t,h})` at the sampled cadence; floored at zero.
    pub anytime_errors: Vec<(usize, f64)>,
    /// Per-step `|V~(s_t) - V*_model(s_t)|` against the current (h = 0) model.
    pub explore_gaps: Vec<f64>,
    /// Running sum of rewards.
    pub cumulative_reward: Vec<f64>,
}
