//! Finite MDP representation and exact planning primitives.
//!
//! Dense tensors throughout: transition `P(s'|s,a)` and reward `R(s,a,s')`
//! are flat row-major `Vec<f64>` indexed `(s * A + a) * S + s'`. Value
//! iteration uses synchronous sweeps so results are independent of state
//! order and reproducible bit for bit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("num_states and num_actions must be positive")]
    EmptySpace,
    #[error("transition row (s={s}, a={a}) sums to {sum} (must be 1 within 1e-12)")]
    RowSum { s: usize, a: usize, sum: f64 },
    #[error("negative transition probability at (s={s}, a={a}, s'={next})")]
    NegativeProbability { s: usize, a: usize, next: usize },
    #[error("reward entry at (s={s}, a={a}, s'={next}) is not finite")]
    NonFiniteReward { s: usize, a: usize, next: usize },
    #[error("gamma must lie in [0, 1), got {0}")]
    BadGamma(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("tensor has wrong length: expected {expected}, got {got}")]
    BadShape { expected: usize, got: usize },
    #[error("policy action {action} at state {state} out of range (num_actions {num_actions})")]
    BadPolicyAction { state: usize, action: usize, num_actions: usize },
    #[error("value function has {got} entries, mdp has {expected} states")]
    ValueShape { expected: usize, got: usize },
    #[error("value iteration failed to converge within {0} sweeps")]
    SweepLimit(usize),
}

/// A finite MDP `(S, A, P, R, gamma)` with dense transition and reward tensors.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::EmptySpace);
        }
        let len = num_states * num_actions * num_states;
        if transition.len() != len {
            return Err(MdpError::BadShape { expected: len, got: transition.len() });
        }
        if reward.len() != len {
            return Err(MdpError::BadShape { expected: len, got: reward.len() });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::BadGamma(gamma));
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let base = (s * num_actions + a) * num_states;
                let mut sum = 0.0;
                for next in 0..num_states {
                    let p = transition[base + next];
                    if p < 0.0 {
                        return Err(MdpError::NegativeProbability { s, a, next });
                    }
                    if !reward[base + next].is_finite() {
                        return Err(MdpError::NonFiniteReward { s, a, next });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(MdpError::RowSum { s, a, sum });
                }
            }
        }
        Ok(Self { num_states, num_actions, transition, reward, gamma })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn probability(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Transition row `P(.|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    /// Reward row `R(s,a,.)`.
    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.reward[base..base + self.num_states]
    }

    pub fn reward_tensor(&self) -> &[f64] {
        &self.reward
    }

    /// One-step return `sum_{s'} P(s'|s,a) [R(s,a,s') + gamma v(s')]`.
    pub fn q_value(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let base = (s * self.num_actions + a) * self.num_states;
        let mut acc = 0.0;
        for next in 0..self.num_states {
            let p = self.transition[base + next];
            if p > 0.0 {
                acc += p * (self.reward[base + next] + self.gamma * v[next]);
            }
        }
        acc
    }
}

/// State values in reward units.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(num_states: usize) -> Self {
        Self { values: vec![0.0; num_states] }
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    fn validate(&self, mdp: &TabularMdp) -> Result<(), MdpError> {
        if self.actions.len() != mdp.num_states() {
            return Err(MdpError::ValueShape {
                expected: mdp.num_states(),
                got: self.actions.len(),
            });
        }
        for (state, &action) in self.actions.iter().enumerate() {
            if action >= mdp.num_actions() {
                return Err(MdpError::BadPolicyAction {
                    state,
                    action,
                    num_actions: mdp.num_actions(),
                });
            }
        }
        Ok(())
    }
}

/// Applies the Bellman optimality operator `T` once: `(Tv)(s) = max_a q(s,a,v)`.
pub fn bellman_backup(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mdp.num_states()];
    for (s, slot) in out.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.num_actions() {
            let q = mdp.q_value(s, a, v);
            if q > best {
                best = q;
            }
        }
        *slot = best;
    }
    out
}

const MAX_SWEEPS: usize = 2_000_000;

/// Stopping threshold on successive sweeps that guarantees
/// `||V - V*||_inf <= tol` for a gamma-contraction.
pub(crate) fn sweep_threshold(gamma: f64, tol: f64) -> f64 {
    if gamma > 0.0 {
        tol * (1.0 - gamma) / gamma
    } else {
        f64::INFINITY
    }
}

fn iterate_to_fixed_point<F>(
    num_states: usize,
    gamma: f64,
    tol: f64,
    init: Vec<f64>,
    mut sweep: F,
) -> Result<Vec<f64>, MdpError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let threshold = sweep_threshold(gamma, tol);
    let mut current = init;
    let mut next = vec![0.0; num_states];
    for _ in 0..MAX_SWEEPS {
        sweep(&current, &mut next);
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
    Err(MdpError::SweepLimit(MAX_SWEEPS))
}

/// Value iteration to sup-norm accuracy `tol`: the returned `V` satisfies
/// `||V - V*||_inf <= tol`.
///
/// Sweeps stop once successive iterates differ by at most
/// `tol (1-gamma)/gamma`, the corrected threshold that turns the advertised
/// tolerance into a true bound on the distance to the fixed point.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<ValueFunction, MdpError> {
    value_iteration_from(mdp, vec![0.0; mdp.num_states()], tol)
}

/// Value iteration warm-started from `init`; same guarantee as
/// [`value_iteration`].
pub fn value_iteration_from(
    mdp: &TabularMdp,
    init: Vec<f64>,
    tol: f64,
) -> Result<ValueFunction, MdpError> {
    if tol <= 0.0 {
        return Err(MdpError::BadTolerance(tol));
    }
    if init.len() != mdp.num_states() {
        return Err(MdpError::ValueShape { expected: mdp.num_states(), got: init.len() });
    }
    let values = iterate_to_fixed_point(mdp.num_states(), mdp.gamma(), tol, init, |v, out| {
        for (s, slot) in out.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.num_actions() {
                let q = mdp.q_value(s, a, v);
                if q > best {
                    best = q;
                }
            }
            *slot = best;
        }
    })?;
    Ok(ValueFunction { values })
}

/// Iterative policy evaluation: returns `V` with `||V - V^pi||_inf <= tol`.
pub fn policy_value(
    mdp: &TabularMdp,
    policy: &Policy,
    tol: f64,
) -> Result<ValueFunction, MdpError> {
    if tol <= 0.0 {
        return Err(MdpError::BadTolerance(tol));
    }
    policy.validate(mdp)?;
    let init = vec![0.0; mdp.num_states()];
    let values = iterate_to_fixed_point(mdp.num_states(), mdp.gamma(), tol, init, |v, out| {
        for (s, slot) in out.iter_mut().enumerate() {
            *slot = mdp.q_value(s, policy.actions[s], v);
        }
    })?;
    Ok(ValueFunction { values })
}

/// Greedy policy with respect to `v`; ties broken by the lowest action index.
pub fn greedy_policy(mdp: &TabularMdp, v: &ValueFunction) -> Result<Policy, MdpError> {
    if v.values.len() != mdp.num_states() {
        return Err(MdpError::ValueShape { expected: mdp.num_states(), got: v.values.len() });
    }
    let mut actions = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let mut best_a = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..mdp.num_actions() {
            let q = mdp.q_value(s, a, &v.values);
            if q > best_q {
                best_q = q;
                best_a = a;
            }
        }
        actions.push(best_a);
    }
    Ok(Policy { actions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_state_self_loop() -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.95).unwrap()
    }

    /// Deterministic two-state MDP: action moves s0 -> s1 with reward 0,
    /// s1 -> s1 with reward 1.
    fn two_state_chain(gamma: f64) -> TabularMdp {
        let transition = vec![0.0, 1.0, 0.0, 1.0];
        let reward = vec![0.0, 0.0, 0.0, 1.0];
        TabularMdp::new(2, 1, transition, reward, gamma).unwrap()
    }

    pub(crate) fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> TabularMdp {
        let s = rng.gen_range(2..=max_states);
        let a = rng.gen_range(1..=max_actions);
        let mut transition = vec![0.0; s * a * s];
        let mut reward = vec![0.0; s * a * s];
        for row in 0..(s * a) {
            let mut total = 0.0;
            for next in 0..s {
                let p: f64 = rng.gen_range(0.01..1.0);
                transition[row * s + next] = p;
                total += p;
                reward[row * s + next] = rng.gen_range(-1.0..1.0);
            }
            for next in 0..s {
                transition[row * s + next] /= total;
            }
            // renormalize exactly: push residual onto the first entry
            let sum: f64 = transition[row * s..(row + 1) * s].iter().sum();
            transition[row * s] += 1.0 - sum;
        }
        let gamma = rng.gen_range(0.1..0.97);
        TabularMdp::new(s, a, transition, reward, gamma).unwrap()
    }

    #[test]
    fn geometric_series_self_loop() {
        let mdp = single_state_self_loop();
        let v = value_iteration(&mdp, 1e-6).unwrap();
        assert_relative_eq!(v.values[0], 20.0, epsilon = 1e-5);
    }

    #[test]
    fn two_state_hand_fixed_point() {
        // gamma = 0.5: V(s1) = 1/(1-0.5) = 2, V(s0) = 0 + 0.5 * 2 = 1
        let mdp = two_state_chain(0.5);
        // oracle: 200 plain Bellman sweeps
        let mut oracle = vec![0.0; 2];
        for _ in 0..200 {
            oracle = bellman_backup(&mdp, &oracle);
        }
        assert_relative_eq!(oracle[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(oracle[0], 1.0, epsilon = 1e-12);

        let v = value_iteration(&mdp, 1e-9).unwrap();
        assert_relative_eq!(v.values[0], oracle[0], epsilon = 1e-8);
        assert_relative_eq!(v.values[1], oracle[1], epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mdp = single_state_self_loop();
        assert!(matches!(value_iteration(&mdp, 0.0), Err(MdpError::BadTolerance(_))));
        assert!(matches!(value_iteration(&mdp, -1.0), Err(MdpError::BadTolerance(_))));
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![0.5], vec![1.0], 0.9).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![f64::NAN], 0.9).is_err());
    }

    #[test]
    fn policy_value_consistency_with_value_iteration() {
        let mdp = two_state_chain(0.5);
        let tol = 1e-8;
        let v_star = value_iteration(&mdp, tol).unwrap();
        let pi = greedy_policy(&mdp, &v_star).unwrap();
        let v_pi = policy_value(&mdp, &pi, tol).unwrap();
        assert!(v_star.sup_distance(&v_pi) <= 2.0 * tol);
    }

    #[test]
    fn policy_value_zero_rewards() {
        let transition = vec![0.5, 0.5, 1.0, 0.0];
        let reward = vec![0.0; 4];
        let mdp = TabularMdp::new(2, 1, transition, reward, 0.9).unwrap();
        let v = policy_value(&mdp, &Policy { actions: vec![0, 0] }, 1e-10).unwrap();
        assert!(v.values.iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn policy_value_rejects_invalid_actions() {
        let mdp = two_state_chain(0.5);
        let err = policy_value(&mdp, &Policy { actions: vec![0, 7] }, 1e-6);
        assert!(matches!(err, Err(MdpError::BadPolicyAction { .. })));
    }

    #[test]
    fn greedy_prefers_dominant_action_and_breaks_ties_low() {
        // action 1 strictly dominates everywhere
        let transition = vec![
            1.0, 0.0, 1.0, 0.0, // s0: a0 self-loop, a1 self-loop
            0.0, 1.0, 0.0, 1.0, // s1
        ];
        let reward = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let mdp = TabularMdp::new(2, 2, transition, reward, 0.5).unwrap();
        let v = value_iteration(&mdp, 1e-9).unwrap();
        let pi = greedy_policy(&mdp, &v).unwrap();
        assert_eq!(pi.actions, vec![1, 1]);

        // exact three-way tie between identical actions -> action 0
        let transition = vec![1.0, 1.0, 1.0];
        let reward = vec![0.3, 0.3, 0.3];
        let tie = TabularMdp::new(1, 3, transition, reward, 0.5).unwrap();
        let pi = greedy_policy(&tie, &ValueFunction::zeros(1)).unwrap();
        assert_eq!(pi.actions, vec![0]);
    }

    #[test]
    fn bellman_operator_is_gamma_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mdp = random_mdp(&mut rng, 6, 3);
            let s = mdp.num_states();
            let v1: Vec<f64> = (0..s).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v2: Vec<f64> = (0..s).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let t1 = bellman_backup(&mdp, &v1);
            let t2 = bellman_backup(&mdp, &v2);
            let lhs = t1
                .iter()
                .zip(&t2)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let rhs = v1
                .iter()
                .zip(&v2)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(lhs <= mdp.gamma() * rhs + 1e-12);
        }
    }

    #[test]
    fn value_iteration_output_is_near_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let mdp = random_mdp(&mut rng, 6, 3);
            let tol = 1e-4;
            let v = value_iteration(&mdp, tol).unwrap();
            let tv = bellman_backup(&mdp, &v.values);
            let residual = v
                .values
                .iter()
                .zip(&tv)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(residual <= sweep_threshold(mdp.gamma(), tol) + 1e-15);
        }
    }

    #[test]
    fn greedy_of_optimal_values_is_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..25 {
            let mdp = random_mdp(&mut rng, 5, 3);
            let tol = 1e-7;
            let v_star = value_iteration(&mdp, tol).unwrap();
            let pi = greedy_policy(&mdp, &v_star).unwrap();
            let v_pi = policy_value(&mdp, &pi, tol).unwrap();
            assert!(v_star.sup_distance(&v_pi) <= 2.0 * tol + 1e-9);
        }
    }
}
