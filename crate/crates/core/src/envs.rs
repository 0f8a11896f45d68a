//! Ground-truth simulators: the five-state chain, its hard-exploration
//! variant, and mountain car with shaped rewards and velocity noise.

use crate::mdp::{MdpError, TabularMdp};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("state ({position}, {velocity}) outside the mountain-car box")]
    StateOutOfRange { position: f64, velocity: f64 },
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Five-state chain. Action 0 moves forward with probability
/// `forward_success`, otherwise slips back to the first state; taking it in
/// the last state pays `reward_goal`. Action 1 resets to the first state and
/// pays `reward_reset` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSpec {
    pub num_states: usize,
    pub forward_success: f64,
    pub reward_reset: f64,
    pub reward_goal: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self { num_states: 5, forward_success: 0.8, reward_reset: 0.2, reward_goal: 1.0 }
    }
}

pub const CHAIN_FORWARD: usize = 0;
pub const CHAIN_RESET: usize = 1;

pub fn chain_mdp(spec: &ChainSpec, gamma: f64) -> Result<TabularMdp, EnvError> {
    let s = spec.num_states;
    let mut transition = vec![0.0; s * 2 * s];
    let mut reward = vec![0.0; s * 2 * s];
    for i in 0..s {
        let fwd = (i * 2 + CHAIN_FORWARD) * s;
        let ahead = (i + 1).min(s - 1);
        transition[fwd + ahead] += spec.forward_success;
        transition[fwd] += 1.0 - spec.forward_success;
        if i == s - 1 {
            for next in 0..s {
                reward[fwd + next] = spec.reward_goal;
            }
        }
        let rst = (i * 2 + CHAIN_RESET) * s;
        transition[rst] = 1.0;
        for next in 0..s {
            reward[rst + next] = spec.reward_reset;
        }
    }
    Ok(TabularMdp::new(s, 2, transition, reward, gamma)?)
}

/// Chain variant with a low-probability exit from the initial state
/// (forward succeeds with probability 0.05 there, 0.99 elsewhere);
/// rewards as in [`chain_mdp`].
pub fn modified_chain_mdp(spec: &ChainSpec, gamma: f64) -> Result<TabularMdp, EnvError> {
    let s = spec.num_states;
    let mut transition = vec![0.0; s * 2 * s];
    let mut reward = vec![0.0; s * 2 * s];
    for i in 0..s {
        let fwd = (i * 2 + CHAIN_FORWARD) * s;
        let ahead = (i + 1).min(s - 1);
        let success = if i == 0 { 0.05 } else { 0.99 };
        transition[fwd + ahead] += success;
        transition[fwd] += 1.0 - success;
        if i == s - 1 {
            for next in 0..s {
                reward[fwd + next] = spec.reward_goal;
            }
        }
        let rst = (i * 2 + CHAIN_RESET) * s;
        transition[rst] = 1.0;
        for next in 0..s {
            reward[rst + next] = spec.reward_reset;
        }
    }
    Ok(TabularMdp::new(s, 2, transition, reward, gamma)?)
}

/// Samples trajectories from a [`TabularMdp`], consuming randomness only
/// through the injected generator.
#[derive(Debug, Clone)]
pub struct TabularSimulator {
    mdp: TabularMdp,
    state: usize,
}

impl TabularSimulator {
    pub fn new(mdp: TabularMdp, start: usize) -> Self {
        Self { mdp, state: start }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn step<R: Rng>(&mut self, action: usize, rng: &mut R) -> (usize, f64) {
        let row = self.mdp.transition_row(self.state, action);
        let draw: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                next = i;
                break;
            }
        }
        let r = self.mdp.reward(self.state, action, next);
        self.state = next;
        (next, r)
    }
}

/// Mountain car with reward -0.9 in the band around the start, -1.0
/// elsewhere, and 0 at the goal; Gaussian noise on the velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainCarSpec {
    pub position_min: f64,
    pub position_max: f64,
    pub velocity_min: f64,
    pub velocity_max: f64,
    pub start_position: f64,
    pub start_velocity: f64,
    pub noise_std: f64,
    pub inner_band: (f64, f64),
    pub reward_inner: f64,
    pub reward_outer: f64,
    pub goal_position: f64,
    pub episode_cap: usize,
}

impl Default for MountainCarSpec {
    fn default() -> Self {
        Self {
            position_min: -1.2,
            position_max: 0.6,
            velocity_min: -0.07,
            velocity_max: 0.07,
            start_position: -0.5,
            start_velocity: 0.0,
            noise_std: 0.001,
            inner_band: (-0.6, 0.4),
            reward_inner: -0.9,
            reward_outer: -1.0,
            goal_position: 0.5,
            episode_cap: 2000,
        }
    }
}

pub const MC_ACTIONS: [f64; 3] = [-1.0, 0.0, 1.0];

impl MountainCarSpec {
    pub fn start_state(&self) -> [f64; 2] {
        [self.start_position, self.start_velocity]
    }

    pub fn reward_at(&self, position: f64) -> f64 {
        if position >= self.goal_position {
            0.0
        } else if position >= self.inner_band.0 && position <= self.inner_band.1 {
            self.reward_inner
        } else {
            self.reward_outer
        }
    }

    /// Noise-free dynamics kernel shared by the simulator and by planning
    /// oracles; returns `(next_state, reached_goal)`.
    pub fn deterministic_step(&self, state: [f64; 2], action: usize, noise: f64) -> ([f64; 2], bool) {
        let [p, v] = state;
        let accel = MC_ACTIONS[action];
        let mut v_next = v + 0.001 * accel - 0.0025 * (3.0 * p).cos() + noise;
        v_next = v_next.clamp(self.velocity_min, self.velocity_max);
        let mut p_next = (p + v_next).clamp(self.position_min, self.position_max);
        if p_next <= self.position_min {
            v_next = 0.0;
            p_next = self.position_min;
        }
        (([p_next, v_next]), p_next >= self.goal_position)
    }
}

/// One stochastic transition. Errors on states outside the box or bad
/// action indices; the caller owns episode bookkeeping (see
/// [`MountainCarEnv`] for the capped-episode wrapper).
pub fn mountain_car_step<R: Rng>(
    spec: &MountainCarSpec,
    state: [f64; 2],
    action: usize,
    rng: &mut R,
) -> Result<([f64; 2], f64, bool), EnvError> {
    let [p, v] = state;
    if !(spec.position_min..=spec.position_max).contains(&p)
        || !(spec.velocity_min..=spec.velocity_max).contains(&v)
    {
        return Err(EnvError::StateOutOfRange { position: p, velocity: v });
    }
    if action >= MC_ACTIONS.len() {
        return Err(EnvError::BadAction(action));
    }
    let noise = if spec.noise_std > 0.0 {
        gaussian(rng) * spec.noise_std
    } else {
        0.0
    };
    let (next, goal) = spec.deterministic_step(state, action, noise);
    let reward = spec.reward_at(next[0]);
    Ok((next, reward, goal))
}

/// Box-Muller; two uniform draws per sample keeps the stream layout simple
/// and seed-stable.
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Episode-aware mountain-car wrapper: terminates at the goal or at the
/// step cap.
#[derive(Debug, Clone)]
pub struct MountainCarEnv {
    pub spec: MountainCarSpec,
    state: [f64; 2],
    steps: usize,
    done: bool,
    reached_goal: bool,
}

impl MountainCarEnv {
    pub fn new(spec: MountainCarSpec) -> Self {
        let state = spec.start_state();
        Self { spec, state, steps: 0, done: false, reached_goal: false }
    }

    pub fn reset(&mut self) {
        self.state = self.spec.start_state();
        self.steps = 0;
        self.done = false;
        self.reached_goal = false;
    }

    pub fn state(&self) -> [f64; 2] {
        self.state
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn reached_goal(&self) -> bool {
        self.reached_goal
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step<R: Rng>(&mut self, action: usize, rng: &mut R) -> Result<f64, EnvError> {
        let (next, reward, goal) = mountain_car_step(&self.spec, self.state, action, rng)?;
        self.state = next;
        self.steps += 1;
        if goal {
            self.done = true;
            self.reached_goal = true;
        } else if self.steps >= self.spec.episode_cap {
            self.done = true;
        }
        Ok(reward)
    }
}

/// Planning-side view of mountain car: box clamping, the known shaped
/// reward, goal termination.
#[derive(Debug, Clone)]
pub struct MountainCarTask {
    pub spec: MountainCarSpec,
}

impl crate::linear::ContinuousTask for MountainCarTask {
    fn state_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        MC_ACTIONS.len()
    }

    fn clamp_state(&self, state: &mut [f64]) {
        state[0] = state[0].clamp(self.spec.position_min, self.spec.position_max);
        state[1] = state[1].clamp(self.spec.velocity_min, self.spec.velocity_max);
    }

    fn reward(&self, _state: &[f64], _action: usize, next: &[f64]) -> f64 {
        self.spec.reward_at(next[0])
    }

    fn is_terminal(&self, state: &[f64]) -> bool {
        state[0] >= self.spec.goal_position
    }

    fn max_reward(&self) -> f64 {
        0.0
    }
}

/// Basis for the learned mountain-car dynamics: per predicted component,
/// the linear kinematic terms (position/velocity/control) plus a row of
/// Gaussian bumps over position carrying the gravity profile.
#[derive(Debug, Clone)]
pub struct MountainCarFeatures {
    rbf_centers: Vec<f64>,
    rbf_bandwidth: f64,
}

impl MountainCarFeatures {
    pub fn new(spec: &MountainCarSpec, num_rbf: usize) -> Self {
        let spacing = (spec.position_max - spec.position_min) / (num_rbf.max(2) - 1) as f64;
        let rbf_centers = (0..num_rbf.max(2))
            .map(|i| spec.position_min + spacing * i as f64)
            .collect();
        Self { rbf_centers, rbf_bandwidth: spacing }
    }

    fn push_position_rbfs(&self, p: f64, out: &mut Vec<f64>) {
        for &c in &self.rbf_centers {
            let u = (p - c) / self.rbf_bandwidth;
            out.push((-u * u).exp());
        }
    }
}

impl crate::linear::FeatureMap for MountainCarFeatures {
    fn num_components(&self) -> usize {
        2
    }

    fn dim(&self, component: usize) -> usize {
        match component {
            0 => 3 + self.rbf_centers.len(),
            _ => 2 + self.rbf_centers.len(),
        }
    }

    fn eval(&self, component: usize, state: &[f64], action: usize, out: &mut Vec<f64>) {
        out.clear();
        let accel = MC_ACTIONS[action];
        match component {
            // next position depends on position, velocity, control, gravity
            0 => {
                out.push(state[0]);
                out.push(state[1]);
                out.push(accel);
            }
            // next velocity depends on velocity, control, gravity
            _ => {
                out.push(state[1]);
                out.push(accel);
            }
        }
        self.push_position_rbfs(state[0], out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_value, value_iteration, Policy};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_rows_sum_to_one() {
        let mdp = chain_mdp(&ChainSpec::default(), 0.95).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let sum: f64 = mdp.transition_row(s, a).iter().sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn always_reset_policy_value_is_four() {
        let mdp = chain_mdp(&ChainSpec::default(), 0.95).unwrap();
        let pi = Policy { actions: vec![CHAIN_RESET; 5] };
        let v = policy_value(&mdp, &pi, 1e-9).unwrap();
        for s in 0..5 {
            // 0.2 / (1 - 0.95)
            assert_relative_eq!(v.values[s], 4.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn chain_optimal_value_bounded_by_twenty() {
        let mdp = chain_mdp(&ChainSpec::default(), 0.95).unwrap();
        let v = value_iteration(&mdp, 1e-6).unwrap();
        let max = v.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max <= 20.0 + 1e-6, "max V* = {max}");
    }

    #[test]
    fn always_forward_stationary_distribution() {
        let mdp = chain_mdp(&ChainSpec::default(), 0.95).unwrap();
        // power-iterate the forward policy's transition matrix
        let mut dist = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        for _ in 0..5000 {
            let mut next = vec![0.0; 5];
            for s in 0..5 {
                let row = mdp.transition_row(s, CHAIN_FORWARD);
                for (sp, &p) in row.iter().enumerate() {
                    next[sp] += dist[s] * p;
                }
            }
            dist = next;
        }
        let expect = [0.2, 0.16, 0.128, 0.1024, 0.4096];
        for (d, e) in dist.iter().zip(expect.iter()) {
            assert_relative_eq!(d, e, epsilon = 1e-9);
        }
        // long-run average reward of always-forward = mass at the last state
        let avg: f64 = (0..5)
            .map(|s| {
                let row = mdp.transition_row(s, CHAIN_FORWARD);
                let r: f64 = (0..5).map(|sp| row[sp] * mdp.reward(s, CHAIN_FORWARD, sp)).sum();
                dist[s] * r
            })
            .sum();
        assert_relative_eq!(avg, 0.4096, epsilon = 1e-9);
    }

    #[test]
    fn modified_chain_matches_listing() {
        let mdp = modified_chain_mdp(&ChainSpec::default(), 0.95).unwrap();
        assert_relative_eq!(mdp.probability(0, CHAIN_FORWARD, 1), 0.05, epsilon = 1e-15);
        assert_relative_eq!(mdp.probability(0, CHAIN_FORWARD, 0), 0.95, epsilon = 1e-15);
        assert_relative_eq!(mdp.probability(2, CHAIN_FORWARD, 3), 0.99, epsilon = 1e-15);
        assert_relative_eq!(mdp.probability(2, CHAIN_FORWARD, 0), 0.01, epsilon = 1e-15);
        assert_relative_eq!(mdp.probability(4, CHAIN_FORWARD, 4), 0.99, epsilon = 1e-15);
        for s in 0..5 {
            assert_relative_eq!(mdp.probability(s, CHAIN_RESET, 0), 1.0, epsilon = 1e-15);
            for a in 0..2 {
                let sum: f64 = mdp.transition_row(s, a).iter().sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mountain_car_rest_at_valley() {
        let spec = MountainCarSpec { noise_std: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _, done) = mountain_car_step(&spec, [-0.5, 0.0], 1, &mut rng).unwrap();
        assert_relative_eq!(next[1], -0.0025 * (-1.5f64).cos(), epsilon = 1e-15);
        assert!(!done);
    }

    #[test]
    fn mountain_car_reward_zones() {
        let spec = MountainCarSpec::default();
        assert_eq!(spec.reward_at(0.55), 0.0);
        assert_eq!(spec.reward_at(0.45), -1.0);
        assert_eq!(spec.reward_at(0.0), -0.9);
        assert_eq!(spec.reward_at(-0.7), -1.0);
    }

    #[test]
    fn mountain_car_rejects_out_of_range() {
        let spec = MountainCarSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mountain_car_step(&spec, [0.7, 0.0], 0, &mut rng).is_err());
        assert!(mountain_car_step(&spec, [0.0, 0.2], 0, &mut rng).is_err());
        assert!(mountain_car_step(&spec, [0.0, 0.0], 9, &mut rng).is_err());
    }

    #[test]
    fn mountain_car_states_stay_in_box_under_fuzz() {
        let spec = MountainCarSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut env = MountainCarEnv::new(spec.clone());
        for i in 0..1_000_000 {
            if env.done() {
                env.reset();
            }
            let action = i % 3;
            env.step(action, &mut rng).unwrap();
            let [p, v] = env.state();
            assert!((spec.position_min..=spec.position_max).contains(&p));
            assert!((spec.velocity_min..=spec.velocity_max).contains(&v));
        }
    }

    #[test]
    fn seeded_trajectories_are_identical() {
        let spec = MountainCarSpec::default();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut env = MountainCarEnv::new(spec.clone());
            let mut trace = Vec::new();
            for i in 0..500 {
                if env.done() {
                    env.reset();
                }
                env.step((i * 7) % 3, &mut rng).unwrap();
                trace.push(env.state());
            }
            trace
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
