//! Internal value functions for the discrete explorers.
//!
//! Every explorer plans by iterating an optimistic Bellman-style backup to
//! its fixed point. All backups here are gamma-contractions in the sup norm,
//! so warm-started sweeps with the corrected stopping threshold inherit the
//! usual `||V - V~||_inf <= tol` guarantee.

use crate::explorers::{DirichletModel, ExplorerError, TransitionCounts};
use crate::mdp::{sweep_threshold, ValueFunction};

/// Counts viewed as reals so the same closed form serves both the
/// sample-mean learner (integer counts) and a Dirichlet belief
/// (pseudo-counts).
pub(crate) struct RealCounts {
    pub num_states: usize,
    pub num_actions: usize,
    pub n_sa: Vec<f64>,
    pub n_sas: Vec<f64>,
}

impl RealCounts {
    pub fn from_counts(c: &TransitionCounts) -> Self {
        Self {
            num_states: c.num_states(),
            num_actions: c.num_actions(),
            n_sa: c.n_sa().iter().map(|&x| x as f64).collect(),
            n_sas: c.n_sas().iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn from_dirichlet(d: &DirichletModel) -> Self {
        let s = d.num_states();
        let a = d.num_actions();
        let mut n_sa = vec![0.0; s * a];
        for (pair, slot) in n_sa.iter_mut().enumerate() {
            *slot = d.alpha_row(pair / a, pair % a).iter().sum();
        }
        Self { num_states: s, num_actions: a, n_sa, n_sas: d.alpha().to_vec() }
    }
}

pub(crate) const MAX_PLAN_SWEEPS: usize = 2_000_000;

/// Iterates `V(s) = max_a q(s, a, V)` synchronously from `init` until
/// successive sweeps differ by at most `tol (1-gamma)/gamma`.
pub(crate) fn solve_q_fixed_point<Q>(
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    tol: f64,
    init: Vec<f64>,
    q: Q,
) -> Result<Vec<f64>, ExplorerError>
where
    Q: Fn(usize, usize, &[f64]) -> f64,
{
    if tol <= 0.0 {
        return Err(ExplorerError::BadParameter(format!("planning tol must be > 0, got {tol}")));
    }
    let threshold = sweep_threshold(gamma, tol);
    let mut current = init;
    let mut next = vec![0.0; num_states];
    for _ in 0..MAX_PLAN_SWEEPS {
        for (s, slot) in next.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..num_actions {
                let val = q(s, a, &current);
                if val > best {
                    best = val;
                }
            }
            *slot = best;
        }
        let diff = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut current, &mut next);
        if diff <= threshold {
            return Ok(current);
        }
    }
    Err(ExplorerError::PlanDiverged)
}

/// Greedy action at `state` under a converged value function, ties broken by
/// the lowest action index.
pub(crate) fn greedy_action_from_q<Q>(state: usize, num_actions: usize, v: &[f64], q: Q) -> usize
where
    Q: Fn(usize, usize, &[f64]) -> f64,
{
    let mut best_a = 0;
    let mut best = f64::NEG_INFINITY;
    for a in 0..num_actions {
        let val = q(state, a, v);
        if val > best {
            best = val;
            best_a = a;
        }
    }
    best_a
}

/// The optimistic closed-form backup: the sample-mean return mixed with the
/// best-successor return at weight `h / (n + h)`.
///
/// `h` may be `f64::INFINITY` (fully optimistic backup). The `n = 0, h = 0`
/// corner has no defined mixture weight and is mapped to the fully
/// optimistic backup.
pub(crate) fn rmdp_q(
    counts: &RealCounts,
    reward: &[f64],
    gamma: f64,
    h: f64,
    s: usize,
    a: usize,
    v: &[f64],
) -> f64 {
    let num_states = counts.num_states;
    let base = (s * counts.num_actions + a) * num_states;
    let mut best = f64::NEG_INFINITY;
    for sp in 0..num_states {
        let w = reward[base + sp] + gamma * v[sp];
        if w > best {
            best = w;
        }
    }
    let n = counts.n_sa[s * counts.num_actions + a];
    if !h.is_finite() || (n == 0.0 && h == 0.0) {
        return best;
    }
    let denom = n + h;
    let mut acc = 0.0;
    for sp in 0..num_states {
        let c = counts.n_sas[base + sp];
        if c > 0.0 {
            acc += c * (reward[base + sp] + gamma * v[sp]);
        }
    }
    acc / denom + (h / denom) * best
}

fn check_reward_shape(
    num_states: usize,
    num_actions: usize,
    reward: &[f64],
) -> Result<(), ExplorerError> {
    let expected = num_states * num_actions * num_states;
    if reward.len() != expected {
        return Err(ExplorerError::BadParameter(format!(
            "reward tensor has length {}, expected {expected}",
            reward.len()
        )));
    }
    Ok(())
}

/// Internal value function of the discrete bounded-optimal explorer with a
/// uniform lookahead budget `h`.
pub fn rmdp_internal_values(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    h: u64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(counts.num_states(), counts.num_actions(), reward)?;
    let rc = RealCounts::from_counts(counts);
    let init = vec![0.0; rc.num_states];
    let values =
        solve_q_fixed_point(rc.num_states, rc.num_actions, gamma, tol, init, |s, a, v| {
            rmdp_q(&rc, reward, gamma, h as f64, s, a, v)
        })?;
    Ok(ValueFunction { values })
}

/// Same backup with a separate budget per state-action pair;
/// `f64::INFINITY` entries select the fully optimistic backup.
pub fn rmdp_internal_values_per_pair(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    horizons: &[f64],
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(counts.num_states(), counts.num_actions(), reward)?;
    let rc = RealCounts::from_counts(counts);
    if horizons.len() != rc.num_states * rc.num_actions {
        return Err(ExplorerError::BadParameter(format!(
            "expected {} per-pair horizons, got {}",
            rc.num_states * rc.num_actions,
            horizons.len()
        )));
    }
    if horizons.iter().any(|&h| h < 0.0 || h.is_nan()) {
        return Err(ExplorerError::BadParameter("horizons must be nonnegative".into()));
    }
    let init = vec![0.0; rc.num_states];
    let values =
        solve_q_fixed_point(rc.num_states, rc.num_actions, gamma, tol, init, |s, a, v| {
            rmdp_q(&rc, reward, gamma, horizons[s * rc.num_actions + a], s, a, v)
        })?;
    Ok(ValueFunction { values })
}

/// Maximizes `sum_s' p~(s') values(s')` over the L1 ball of the given radius
/// intersected with the simplex.
///
/// Standard greedy mass shift: add `min(radius/2, 1 - p_hat(best))` to the
/// best-value state and strip the same mass from the worst-value states.
/// Radii above 2 (the simplex diameter) are clamped.
pub fn solve_l1_optimistic(p_hat: &[f64], values: &[f64], radius: f64) -> Vec<f64> {
    let radius = radius.clamp(0.0, 2.0);
    let mut out = p_hat.to_vec();
    if radius == 0.0 || p_hat.is_empty() {
        return out;
    }
    let mut best = 0;
    for (i, &w) in values.iter().enumerate() {
        if w > values[best] {
            best = i;
        }
    }
    let add = (radius / 2.0).min(1.0 - out[best]);
    if add <= 0.0 {
        return out;
    }
    out[best] += add;
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| i != best).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut remaining = add;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let take = out[i].min(remaining);
        out[i] -= take;
        remaining -= take;
    }
    out
}

/// `ln(2^s - 2)` without overflow for large state counts.
fn ln_two_pow_minus_two(num_states: usize) -> f64 {
    let s = num_states as f64;
    // ln(2^s - 2) = s ln 2 + ln(1 - 2^(1-s))
    s * std::f64::consts::LN_2 + (-(2.0f64).powf(1.0 - s)).ln_1p()
}

/// Confidence radius `z(s,a)` of the interval-estimation explorer.
pub fn mbie_radius(n: u64, num_states: usize, num_actions: usize, m: u64, delta: f64) -> f64 {
    if n == 0 {
        return 2.0;
    }
    let log_term = ln_two_pow_minus_two(num_states)
        - (delta / (2.0 * num_states as f64 * num_actions as f64 * m as f64)).ln();
    2.0 * (2.0 * log_term / n as f64).sqrt()
}

/// Lookahead budget that makes the closed-form backup mix exactly `z(s,a)`
/// mass onto the best successor. [`EquivalentHorizon::Infinite`] marks the
/// degenerate `z >= 1` regime (fully optimistic backup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquivalentHorizon {
    Finite(f64),
    Infinite,
}

impl EquivalentHorizon {
    pub fn as_f64(self) -> f64 {
        match self {
            EquivalentHorizon::Finite(h) => h,
            EquivalentHorizon::Infinite => f64::INFINITY,
        }
    }
}

pub fn mbie_equivalent_h(
    n: u64,
    num_states: usize,
    num_actions: usize,
    m: u64,
    delta: f64,
) -> EquivalentHorizon {
    if n == 0 {
        return EquivalentHorizon::Infinite;
    }
    let z = mbie_radius(n, num_states, num_actions, m, delta);
    if z >= 1.0 {
        EquivalentHorizon::Infinite
    } else {
        EquivalentHorizon::Finite(n as f64 * z / (1.0 - z))
    }
}

/// Per-pair equivalent budgets `h*(s,a)` as floats, `f64::INFINITY` in the
/// `z >= 1` regime.
pub fn mbie_equivalent_horizons(counts: &TransitionCounts, m: u64, delta: f64) -> Vec<f64> {
    let s_count = counts.num_states();
    let a_count = counts.num_actions();
    (0..s_count * a_count)
        .map(|i| {
            mbie_equivalent_h(counts.count(i / a_count, i % a_count), s_count, a_count, m, delta)
                .as_f64()
        })
        .collect()
}

/// Interval-estimation internal values.
///
/// Planned with the per-pair equivalent budgets `h*(s,a)` through the same
/// closed-form backup as the bounded-optimal explorer, so the two select
/// identical greedy actions by construction. The direct L1-ball route is
/// available as [`mbie_l1_internal_values`].
pub fn mbie_internal_values(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    delta: f64,
    m: u64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    let horizons = mbie_equivalent_horizons(counts, m, delta);
    rmdp_internal_values_per_pair(counts, reward, gamma, &horizons, tol)
}

pub(crate) fn mbie_l1_q(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    delta: f64,
    m: u64,
    s: usize,
    a: usize,
    v: &[f64],
) -> f64 {
    let num_states = counts.num_states();
    let base = (s * counts.num_actions() + a) * num_states;
    let mut w = vec![0.0; num_states];
    for sp in 0..num_states {
        w[sp] = reward[base + sp] + gamma * v[sp];
    }
    let n = counts.count(s, a);
    let radius = mbie_radius(n, num_states, counts.num_actions(), m, delta);
    let p_hat = match counts.sample_mean(s, a) {
        Some(p) => p,
        // unvisited pair: radius 2 pushes any base point to the best
        // successor, a uniform base keeps the arithmetic tidy
        None => vec![1.0 / num_states as f64; num_states],
    };
    let tilted = solve_l1_optimistic(&p_hat, &w, radius);
    tilted.iter().zip(&w).map(|(p, x)| p * x).sum()
}

/// Interval-estimation internal values via the literal inner maximization
/// over the L1 confidence ball of radius `z(s,a)`.
pub fn mbie_l1_internal_values(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    delta: f64,
    m: u64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(counts.num_states(), counts.num_actions(), reward)?;
    let init = vec![0.0; counts.num_states()];
    let values = solve_q_fixed_point(
        counts.num_states(),
        counts.num_actions(),
        gamma,
        tol,
        init,
        |s, a, v| mbie_l1_q(counts, reward, gamma, delta, m, s, a, v),
    )?;
    Ok(ValueFunction { values })
}

/// Optimistic-local-transitions internal values: the closed-form backup run
/// on Dirichlet pseudo-counts with `eta` imagined observations. Shares the
/// exact code path with [`rmdp_internal_values`].
pub fn bolt_internal_values(
    belief: &DirichletModel,
    reward: &[f64],
    gamma: f64,
    eta: u64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(belief.num_states(), belief.num_actions(), reward)?;
    let rc = RealCounts::from_dirichlet(belief);
    let init = vec![0.0; rc.num_states];
    let values =
        solve_q_fixed_point(rc.num_states, rc.num_actions, gamma, tol, init, |s, a, v| {
            rmdp_q(&rc, reward, gamma, eta as f64, s, a, v)
        })?;
    Ok(ValueFunction { values })
}

pub(crate) fn beb_q(
    belief: &DirichletModel,
    reward: &[f64],
    gamma: f64,
    beta: f64,
    s: usize,
    a: usize,
    v: &[f64],
) -> f64 {
    let num_states = belief.num_states();
    let base = (s * belief.num_actions() + a) * num_states;
    let row = belief.alpha_row(s, a);
    let total: f64 = row.iter().sum();
    let mut mean_part = 0.0;
    if total > 0.0 {
        for sp in 0..num_states {
            mean_part += row[sp] / total * (reward[base + sp] + gamma * v[sp]);
        }
    } else {
        let u = 1.0 / num_states as f64;
        for sp in 0..num_states {
            mean_part += u * (reward[base + sp] + gamma * v[sp]);
        }
    }
    beta / (1.0 + belief.observed_count(s, a)) + mean_part
}

/// Exploration-bonus internal values: mean-model backup plus
/// `beta / (1 + n(s,a))`.
pub fn beb_internal_values(
    belief: &DirichletModel,
    reward: &[f64],
    gamma: f64,
    beta: f64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(belief.num_states(), belief.num_actions(), reward)?;
    let init = vec![0.0; belief.num_states()];
    let values = solve_q_fixed_point(
        belief.num_states(),
        belief.num_actions(),
        gamma,
        tol,
        init,
        |s, a, v| beb_q(belief, reward, gamma, beta, s, a, v),
    )?;
    Ok(ValueFunction { values })
}

/// Hoeffding-style bonus scale for the variance-based explorer. Clamped at
/// zero once `delta >= 2` so the demonstration settings with large `delta`
/// degrade to certainty-equivalent planning instead of failing.
pub fn vbe_bonus_scale(gamma: f64, delta: f64) -> f64 {
    ((2.0 / delta).ln().max(0.0) / 2.0).sqrt() / (1.0 - gamma)
}

pub(crate) fn vbe_q(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    bonus_scale: f64,
    s: usize,
    a: usize,
    v: &[f64],
) -> f64 {
    let num_states = counts.num_states();
    let base = (s * counts.num_actions() + a) * num_states;
    let n = counts.count(s, a);
    let mut mean_part = 0.0;
    match counts.sample_mean(s, a) {
        Some(p) => {
            for sp in 0..num_states {
                if p[sp] > 0.0 {
                    mean_part += p[sp] * (reward[base + sp] + gamma * v[sp]);
                }
            }
        }
        None => {
            let u = 1.0 / num_states as f64;
            for sp in 0..num_states {
                mean_part += u * (reward[base + sp] + gamma * v[sp]);
            }
        }
    }
    mean_part + bonus_scale / (n.max(1) as f64).sqrt()
}

/// Variance-based internal values: mean-model backup plus
/// `c_delta / sqrt(max(1, n(s,a)))` with
/// `c_delta = sqrt(ln(2/delta)/2) / (1-gamma)`.
pub fn vbe_internal_values(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    delta: f64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(counts.num_states(), counts.num_actions(), reward)?;
    let scale = vbe_bonus_scale(gamma, delta);
    let init = vec![0.0; counts.num_states()];
    let values = solve_q_fixed_point(
        counts.num_states(),
        counts.num_actions(),
        gamma,
        tol,
        init,
        |s, a, v| vbe_q(counts, reward, gamma, scale, s, a, v),
    )?;
    Ok(ValueFunction { values })
}

/// Certainty-equivalent backup over the sample-mean model, with a uniform
/// fallback at unvisited pairs (used by the epsilon-greedy explorer).
pub(crate) fn mean_model_q(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    s: usize,
    a: usize,
    v: &[f64],
) -> f64 {
    let num_states = counts.num_states();
    let base = (s * counts.num_actions() + a) * num_states;
    match counts.sample_mean(s, a) {
        Some(p) => {
            let mut acc = 0.0;
            for sp in 0..num_states {
                if p[sp] > 0.0 {
                    acc += p[sp] * (reward[base + sp] + gamma * v[sp]);
                }
            }
            acc
        }
        None => {
            let u = 1.0 / num_states as f64;
            (0..num_states).map(|sp| u * (reward[base + sp] + gamma * v[sp])).sum()
        }
    }
}

pub fn mean_model_values(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    tol: f64,
) -> Result<ValueFunction, ExplorerError> {
    mean_model_values_from(counts, reward, gamma, tol, vec![0.0; counts.num_states()])
}

pub(crate) fn mean_model_values_from(
    counts: &TransitionCounts,
    reward: &[f64],
    gamma: f64,
    tol: f64,
    init: Vec<f64>,
) -> Result<ValueFunction, ExplorerError> {
    check_reward_shape(counts.num_states(), counts.num_actions(), reward)?;
    let values = solve_q_fixed_point(
        counts.num_states(),
        counts.num_actions(),
        gamma,
        tol,
        init,
        |s, a, v| mean_model_q(counts, reward, gamma, s, a, v),
    )?;
    Ok(ValueFunction { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, TabularMdp};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_counts(entries: &[(usize, usize, usize, u64)], s: usize, a: usize) -> TransitionCounts {
        let mut c = TransitionCounts::new(s, a);
        for &(st, ac, sp, k) in entries {
            for _ in 0..k {
                c.record(st, ac, sp).unwrap();
            }
        }
        c
    }

    #[test]
    fn h_zero_with_full_counts_matches_sample_mean_vi() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = 4;
        let a = 2;
        let mut counts = TransitionCounts::new(s, a);
        let mut reward = vec![0.0; s * a * s];
        for st in 0..s {
            for ac in 0..a {
                for _ in 0..20 {
                    counts.record(st, ac, rng.gen_range(0..s)).unwrap();
                }
                for sp in 0..s {
                    reward[(st * a + ac) * s + sp] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let gamma = 0.9;
        let tol = 1e-9;
        let tilde = rmdp_internal_values(&counts, &reward, gamma, 0, tol).unwrap();

        // reference: exact VI on the sample-mean MDP
        let mut transition = vec![0.0; s * a * s];
        for st in 0..s {
            for ac in 0..a {
                let p = counts.sample_mean(st, ac).unwrap();
                for sp in 0..s {
                    transition[(st * a + ac) * s + sp] = p[sp];
                }
                let row = &mut transition[(st * a + ac) * s..(st * a + ac + 1) * s];
                let sum: f64 = row.iter().sum();
                row[0] += 1.0 - sum;
            }
        }
        let mdp = TabularMdp::new(s, a, transition, reward, gamma).unwrap();
        let v = value_iteration(&mdp, tol).unwrap();
        for (x, y) in tilde.values.iter().zip(&v.values) {
            assert_relative_eq!(x, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn two_state_hand_example() {
        // 2 states, 1 action, gamma 0.5, R(.,.,s1) = 1 else 0
        // counts: n(s0,a)=2 all to s0; n(s1,a)=2 all to s1; h = 2
        let counts = tiny_counts(&[(0, 0, 0, 2), (1, 0, 1, 2)], 2, 1);
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        // oracle: 500 raw sweeps of the closed-form backup
        let rc = RealCounts::from_counts(&counts);
        let mut oracle = vec![0.0; 2];
        for _ in 0..500 {
            let new: Vec<f64> =
                (0..2).map(|s| rmdp_q(&rc, &reward, 0.5, 2.0, s, 0, &oracle)).collect();
            oracle = new;
        }
        assert_relative_eq!(oracle[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(oracle[0], 4.0 / 3.0, epsilon = 1e-12);

        let v = rmdp_internal_values(&counts, &reward, 0.5, 2, 1e-10).unwrap();
        assert_relative_eq!(v.values[1], 2.0, epsilon = 1e-8);
        assert_relative_eq!(v.values[0], 4.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn huge_h_approaches_fully_optimistic_fixed_point() {
        let counts = tiny_counts(&[(0, 0, 0, 3), (1, 0, 0, 3)], 2, 1);
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let gamma = 0.5;
        let v = rmdp_internal_values(&counts, &reward, gamma, 1_000_000_000, 1e-9).unwrap();
        // fully optimistic fixed point: V = max_s' (R + gamma V) = 1 + 0.5 V => V = 2
        assert_relative_eq!(v.values[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(v.values[1], 2.0, epsilon = 1e-4);
    }

    #[test]
    fn unvisited_pair_is_fully_optimistic_even_at_h_zero() {
        let counts = TransitionCounts::new(2, 1);
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let v0 = rmdp_internal_values(&counts, &reward, 0.5, 0, 1e-9).unwrap();
        let v1 = rmdp_internal_values(&counts, &reward, 0.5, 7, 1e-9).unwrap();
        assert_relative_eq!(v0.values[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(v0.values[0], v1.values[0], epsilon = 1e-6);
    }

    #[test]
    fn monotone_in_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let s = rng.gen_range(2..=5);
            let a = rng.gen_range(1..=3);
            let mut counts = TransitionCounts::new(s, a);
            let mut reward = vec![0.0; s * a * s];
            for st in 0..s {
                for ac in 0..a {
                    for _ in 0..rng.gen_range(0..15) {
                        counts.record(st, ac, rng.gen_range(0..s)).unwrap();
                    }
                    for sp in 0..s {
                        reward[(st * a + ac) * s + sp] = rng.gen_range(0.0..1.0);
                    }
                }
            }
            let mut prev: Option<ValueFunction> = None;
            for h in [0u64, 1, 2, 4, 8, 32] {
                let v = rmdp_internal_values(&counts, &reward, 0.9, h, 1e-9).unwrap();
                if let Some(p) = &prev {
                    for (lo, hi) in p.values.iter().zip(&v.values) {
                        assert!(hi + 1e-7 >= *lo, "internal value decreased in h");
                    }
                }
                prev = Some(v);
            }
        }
    }

    #[test]
    fn l1_solver_examples() {
        // radius 0: unchanged
        let p = vec![0.3, 0.7];
        assert_eq!(solve_l1_optimistic(&p, &[0.0, 1.0], 0.0), p);

        // derived 2-state shift
        let out = solve_l1_optimistic(&[0.5, 0.5], &[0.0, 1.0], 0.4);
        assert_relative_eq!(out[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.7, epsilon = 1e-15);

        // radius 2: everything on the argmax
        let out = solve_l1_optimistic(&[0.2, 0.5, 0.3], &[1.0, 5.0, 2.0], 2.0);
        assert_relative_eq!(out[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out[0] + out[2], 0.0, epsilon = 1e-15);

        // radius beyond the simplex diameter clamps
        let clamped = solve_l1_optimistic(&[0.5, 0.5], &[0.0, 1.0], 5.0);
        assert_relative_eq!(clamped[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn l1_solver_strips_worst_states_first() {
        let p = vec![0.25, 0.25, 0.25, 0.25];
        let values = vec![0.0, 3.0, 1.0, 2.0];
        let out = solve_l1_optimistic(&p, &values, 0.8);
        // 0.4 onto index 1; removal: index 0 (value 0) then index 2 (value 1)
        assert_relative_eq!(out[1], 0.65, epsilon = 1e-15);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[2], 0.1, epsilon = 1e-15);
        assert_relative_eq!(out[3], 0.25, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn l1_solution_stays_on_simplex_within_ball(
            raw in proptest::collection::vec(0.01f64..1.0, 2..6),
            vals in proptest::collection::vec(-5.0f64..5.0, 6),
            radius in 0.0f64..2.5,
        ) {
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let values = &vals[..p.len()];
            let out = solve_l1_optimistic(&p, values, radius);
            let sum: f64 = out.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(out.iter().all(|&x| x >= -1e-15));
            let dist: f64 = out.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(dist <= radius.min(2.0) + 1e-12);
            // objective never below the base point
            let gain: f64 = out.iter().zip(values).map(|(p, v)| p * v).sum::<f64>()
                - p.iter().zip(values).map(|(p, v)| p * v).sum::<f64>();
            prop_assert!(gain >= -1e-12);
        }
    }

    #[test]
    fn mbie_radius_matches_direct_evaluation() {
        // |S|=5, |A|=2, m=100, delta=0.5, n=4000
        let z = mbie_radius(4000, 5, 2, 100, 0.5);
        let expect = 2.0 * (2.0 * ((30.0f64).ln() - (0.5f64 / 2000.0).ln()) / 4000.0).sqrt();
        assert_relative_eq!(z, expect, epsilon = 1e-12);
        assert_relative_eq!(z, 0.15294, epsilon = 1e-4);
    }

    #[test]
    fn equivalent_h_examples() {
        // z = 0.5 at n = 10 gives h* = 10; reverse-engineer m, delta to hit z=0.5
        // directly instead: use the algebraic identity on a synthetic radius.
        let n = 10.0f64;
        let z = 0.5f64;
        assert_relative_eq!(n * z / (1.0 - z), 10.0, epsilon = 1e-12);

        match mbie_equivalent_h(4000, 5, 2, 100, 0.5) {
            EquivalentHorizon::Finite(h) => {
                let z = mbie_radius(4000, 5, 2, 100, 0.5);
                assert_relative_eq!(h, 4000.0 * z / (1.0 - z), epsilon = 1e-9);
                assert_relative_eq!(h, 722.21, epsilon = 0.01);
            }
            EquivalentHorizon::Infinite => panic!("expected finite budget"),
        }

        // degenerate branch: small n makes z >= 1
        let z = mbie_radius(10, 5, 2, 100, 0.1);
        assert!(z >= 1.0);
        assert_relative_eq!(z, 3.26, epsilon = 0.01);
        assert_eq!(mbie_equivalent_h(10, 5, 2, 100, 0.1), EquivalentHorizon::Infinite);
    }

    #[test]
    fn mbie_large_counts_converge_to_sample_mean_vi() {
        let mut counts = TransitionCounts::new(2, 1);
        for _ in 0..2_000_000 {
            counts.record(0, 0, 1).unwrap();
            counts.record(1, 0, 1).unwrap();
        }
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        // deterministic s->s1 with reward 1: V = 2 everywhere, both routes
        let v = mbie_internal_values(&counts, &reward, 0.5, 0.5, 10, 1e-9).unwrap();
        assert_relative_eq!(v.values[0], 2.0, epsilon = 1e-2);
        assert_relative_eq!(v.values[1], 2.0, epsilon = 1e-2);
        let l1 = mbie_l1_internal_values(&counts, &reward, 0.5, 0.5, 10, 1e-9).unwrap();
        assert_relative_eq!(l1.values[0], 2.0, epsilon = 1e-2);
    }

    #[test]
    fn mbie_all_counts_zero_is_fully_optimistic() {
        let counts = TransitionCounts::new(2, 1);
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let v = mbie_internal_values(&counts, &reward, 0.5, 0.5, 10, 1e-9).unwrap();
        assert_relative_eq!(v.values[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(v.values[1], 2.0, epsilon = 1e-6);
        let l1 = mbie_l1_internal_values(&counts, &reward, 0.5, 0.5, 10, 1e-9).unwrap();
        assert_relative_eq!(l1.values[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(l1.values[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn mbie_matches_per_pair_budget_route_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let s = rng.gen_range(2..=5);
            let a = rng.gen_range(1..=3);
            let mut counts = TransitionCounts::new(s, a);
            let mut reward = vec![0.0; s * a * s];
            for st in 0..s {
                for ac in 0..a {
                    for _ in 0..rng.gen_range(0..400) {
                        counts.record(st, ac, rng.gen_range(0..s)).unwrap();
                    }
                    for sp in 0..s {
                        reward[(st * a + ac) * s + sp] = rng.gen_range(0.0..1.0);
                    }
                }
            }
            let horizons = mbie_equivalent_horizons(&counts, 100, 0.5);
            let direct =
                rmdp_internal_values_per_pair(&counts, &reward, 0.9, &horizons, 1e-8).unwrap();
            let mbie = mbie_internal_values(&counts, &reward, 0.9, 0.5, 100, 1e-8).unwrap();
            assert_eq!(direct.values, mbie.values);
        }
    }

    #[test]
    fn bolt_with_zero_prior_equals_rmdp_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let s = rng.gen_range(2..=5);
            let a = rng.gen_range(1..=3);
            let mut counts = TransitionCounts::new(s, a);
            let mut reward = vec![0.0; s * a * s];
            for st in 0..s {
                for ac in 0..a {
                    for _ in 0..rng.gen_range(0..12) {
                        counts.record(st, ac, rng.gen_range(0..s)).unwrap();
                    }
                    for sp in 0..s {
                        reward[(st * a + ac) * s + sp] = rng.gen_range(-1.0..1.0);
                    }
                }
            }
            let h = rng.gen_range(0..6u64);
            let belief = DirichletModel::from_counts(&counts, 0.0);
            let a_vals = rmdp_internal_values(&counts, &reward, 0.9, h, 1e-8).unwrap();
            let b_vals = bolt_internal_values(&belief, &reward, 0.9, h, 1e-8).unwrap();
            assert_eq!(a_vals.values, b_vals.values);
        }
    }

    #[test]
    fn bolt_symmetric_prior_hand_example() {
        // alpha0 = 1 per successor, no data, eta = 1, 2 states, R(.,.,s1)=1, gamma=0.5
        let belief = DirichletModel::new(2, 1, 1.0);
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        // mixture weights: mean 2/3, optimistic 1/3; fixed point V = 4/3
        let rc = RealCounts::from_dirichlet(&belief);
        assert_relative_eq!(rc.n_sa[0], 2.0, epsilon = 1e-15);
        let mut oracle = vec![0.0; 2];
        for _ in 0..500 {
            oracle = (0..2).map(|s| rmdp_q(&rc, &reward, 0.5, 1.0, s, 0, &oracle)).collect();
        }
        assert_relative_eq!(oracle[0], 4.0 / 3.0, epsilon = 1e-12);
        let v = bolt_internal_values(&belief, &reward, 0.5, 1, 1e-10).unwrap();
        assert_relative_eq!(v.values[0], 4.0 / 3.0, epsilon = 1e-8);
        assert_relative_eq!(v.values[1], 4.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn bolt_eta_zero_is_mean_model_vi() {
        let mut belief = DirichletModel::new(2, 1, 0.5);
        belief.observe(0, 0, 1).unwrap();
        belief.observe(1, 0, 1).unwrap();
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let v = bolt_internal_values(&belief, &reward, 0.5, 0, 1e-9).unwrap();
        // mean model: P(s1|s0) = 1.5/2, P(s1|s1) = 1.5/2
        // V(s) = 0.75 (1 + 0.5 V(s1)) + 0.25 (0.5 V(s0)) symmetric start
        // both states share the same row structure, so V0 = V1 = V:
        // V = 0.75 + 0.75*0.5 V + 0.25*0.5 V = 0.75 + 0.5 V => V = 1.5
        assert_relative_eq!(v.values[0], 1.5, epsilon = 1e-7);
        assert_relative_eq!(v.values[1], 1.5, epsilon = 1e-7);
    }

    #[test]
    fn beb_bonus_magnitude_and_halving() {
        let belief = DirichletModel::new(2, 1, 0.5);
        let reward = vec![0.0; 4];
        let beta = 2.0 * 148.0 * 148.0;
        assert_relative_eq!(beta, 43808.0, epsilon = 1e-12);
        let q0 = beb_q(&belief, &reward, 0.0, beta, 0, 0, &[0.0, 0.0]);
        assert_relative_eq!(q0, 43808.0, epsilon = 1e-9);

        let mut one = belief.clone();
        one.observe(0, 0, 1).unwrap();
        let q1 = beb_q(&one, &reward, 0.0, beta, 0, 0, &[0.0, 0.0]);
        assert_relative_eq!(q1, 43808.0 / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn beb_zero_bonus_is_mean_model_vi() {
        let mut belief = DirichletModel::new(2, 1, 0.5);
        belief.observe(0, 0, 1).unwrap();
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let v = beb_internal_values(&belief, &reward, 0.5, 0.0, 1e-9).unwrap();
        let b = bolt_internal_values(&belief, &reward, 0.5, 0, 1e-9).unwrap();
        for (x, y) in v.values.iter().zip(&b.values) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn vbe_bonus_value() {
        // gamma = 0.95, delta = 0.1, n = 1 -> 20 sqrt(ln(20)/2)
        let scale = vbe_bonus_scale(0.95, 0.1);
        assert_relative_eq!(scale, 20.0 * ((20.0f64).ln() / 2.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(scale, 24.4775, epsilon = 1e-3);
        // demonstration regime: delta >= 2 clamps the bonus to zero
        assert_eq!(vbe_bonus_scale(0.95, 2.0), 0.0);
        assert_eq!(vbe_bonus_scale(0.95, 1000.0), 0.0);
    }

    #[test]
    fn vbe_bonus_vanishes_with_data() {
        let mut counts = TransitionCounts::new(2, 1);
        for _ in 0..5_000_000 {
            counts.record(0, 0, 1).unwrap();
            counts.record(1, 0, 1).unwrap();
        }
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        let v = vbe_internal_values(&counts, &reward, 0.5, 0.1, 1e-9).unwrap();
        assert_relative_eq!(v.values[0], 2.0, epsilon = 1e-2);
    }
}
