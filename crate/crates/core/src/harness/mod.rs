//! Declarative experiment runner: JSON config in, multi-seed runs out,
//! with aggregation, CSV tables, and static SVG reward curves.

mod csv;
mod svg;

pub use csv::{emit_records_csv, emit_summary_csv, parse_records_csv};
pub use svg::emit_svg_curves;

use crate::envs::{
    chain_mdp, modified_chain_mdp, ChainSpec, EnvError, MountainCarEnv, MountainCarFeatures,
    MountainCarSpec, MountainCarTask, TabularSimulator,
};
use crate::explorers::{DiscreteAgent, ExplorerConfig, ExplorerError, ExplorerKind};
use crate::linear::{LinearAgent, LinearAgentConfig, LinearError, LinearExplorationMode};
use crate::mdp::MdpError;
use crate::oracle::{anytime_error, OracleError};
use crate::planner::{FittedPlanner, PlannerError, RbfGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("run {run} of {algorithm} panicked")]
    RunPanicked { algorithm: String, run: u32 },
    #[error(transparent)]
    Explorer(#[from] ExplorerError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Csv(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Chain {
        #[serde(default)]
        spec: ChainSpec,
    },
    ModifiedChain {
        #[serde(default)]
        spec: ChainSpec,
    },
    MountainCar {
        #[serde(default)]
        spec: MountainCarSpec,
        episodes: usize,
    },
}

impl EnvironmentConfig {
    pub fn is_continuous(&self) -> bool {
        matches!(self, EnvironmentConfig::MountainCar { .. })
    }
}

/// Tunables of the continuous agent that the experiments leave at their
/// defaults unless overridden in the config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LinearKnobs {
    pub delta: f64,
    pub sigma: f64,
    pub fixed_delta_bound: Option<f64>,
    pub fixed_lipschitz: Option<f64>,
    pub prior_lipschitz: f64,
    pub plan_tol: f64,
    pub plan_sweeps: usize,
    pub plan_refresh_tol: f64,
    pub lipschitz_refresh_every: u64,
    pub refit_every: u64,
    pub pinv_rel_cutoff: f64,
    pub grid_points: usize,
    pub bandwidth_ratio: f64,
    pub normalized_basis: bool,
    pub feature_rbf: usize,
}

impl Default for LinearKnobs {
    fn default() -> Self {
        Self {
            delta: 0.9,
            sigma: 0.001,
            fixed_delta_bound: Some(0.14),
            fixed_lipschitz: Some(1.0),
            prior_lipschitz: 10.0,
            plan_tol: 0.01,
            plan_sweeps: 40,
            plan_refresh_tol: 2e-3,
            lipschitz_refresh_every: 10,
            refit_every: 8,
            pinv_rel_cutoff: 1e-6,
            grid_points: 30,
            bandwidth_ratio: 0.5,
            normalized_basis: true,
            feature_rbf: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    PacRmdp {
        h: u64,
    },
    Mbie {
        eps: f64,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u64>,
    },
    Vbe {
        delta: f64,
    },
    Beb {
        beta: f64,
    },
    Bolt {
        eta: u64,
    },
    EpsGreedy {
        eps: f64,
    },
    LinearPacRmdp {
        h: u64,
        #[serde(default)]
        knobs: LinearKnobs,
    },
    LinearPacMdp {
        eps: f64,
        #[serde(default)]
        knobs: LinearKnobs,
    },
    LinearEpsGreedy {
        eps: f64,
        #[serde(default)]
        knobs: LinearKnobs,
    },
}

impl AlgorithmConfig {
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            AlgorithmConfig::LinearPacRmdp { .. }
                | AlgorithmConfig::LinearPacMdp { .. }
                | AlgorithmConfig::LinearEpsGreedy { .. }
        )
    }

    pub fn label(&self) -> String {
        match self {
            AlgorithmConfig::PacRmdp { h } => format!("PAC-RMDP({h})"),
            AlgorithmConfig::Mbie { eps, delta, .. } => format!("MBIE({eps}, {delta})"),
            AlgorithmConfig::Vbe { delta } => format!("VBE({delta})"),
            AlgorithmConfig::Beb { beta } => format!("BEB({beta})"),
            AlgorithmConfig::Bolt { eta } => format!("BOLT({eta})"),
            AlgorithmConfig::EpsGreedy { eps } => format!("eps-greedy({eps})"),
            AlgorithmConfig::LinearPacRmdp { h, .. } => format!("PAC-RMDP({h})"),
            AlgorithmConfig::LinearPacMdp { eps, .. } => format!("PAC-MDP({eps})"),
            AlgorithmConfig::LinearEpsGreedy { eps, .. } => format!("eps-greedy({eps})"),
        }
    }

    fn discrete_kind(&self) -> Option<ExplorerKind> {
        match self {
            AlgorithmConfig::PacRmdp { h } => Some(ExplorerKind::PacRmdp { h: *h }),
            AlgorithmConfig::Mbie { eps, delta, m } => {
                Some(ExplorerKind::Mbie { eps: *eps, delta: *delta, m: *m })
            }
            AlgorithmConfig::Vbe { delta } => Some(ExplorerKind::Vbe { delta: *delta }),
            AlgorithmConfig::Beb { beta } => Some(ExplorerKind::Beb { beta: *beta }),
            AlgorithmConfig::Bolt { eta } => Some(ExplorerKind::Bolt { eta: *eta }),
            AlgorithmConfig::EpsGreedy { eps } => Some(ExplorerKind::EpsGreedy { eps: *eps }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Sample the anytime error every this many steps (0 disables).
    pub anytime_every: usize,
    /// Lookahead budget for the anytime-error oracle; defaults to the
    /// agent's own budget (0 for non-budgeted explorers).
    pub anytime_h: Option<u64>,
    /// Record the per-step gap between the internal value and the
    /// current-model optimal value at the visited state.
    pub explore_gap: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { anytime_every: 0, anytime_h: None, explore_gap: false }
    }
}

fn default_planning_tol() -> f64 {
    0.01
}

/// Declarative description of one experiment: environment, algorithm list,
/// replication count, horizon, and seeding.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    pub runs: u32,
    /// Steps per run on discrete environments; steps per episode on the
    /// continuous one (episodes set on the environment).
    pub horizon: usize,
    pub gamma: f64,
    #[serde(default = "default_planning_tol")]
    pub planning_tol: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::Config("runs must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(HarnessError::Config("horizon must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(HarnessError::Config(format!(
                "gamma must be in [0,1), got {}",
                self.gamma
            )));
        }
        if self.planning_tol <= 0.0 {
            return Err(HarnessError::Config("planning_tol must be positive".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("at least one algorithm required".into()));
        }
        let continuous_env = self.environment.is_continuous();
        for alg in &self.algorithms {
            if alg.is_continuous() != continuous_env {
                return Err(HarnessError::Config(format!(
                    "algorithm {} does not run on this environment",
                    alg.label()
                )));
            }
            if let Some(kind) = alg.discrete_kind() {
                ExplorerConfig {
                    kind,
                    gamma: self.gamma,
                    planning_tol: self.planning_tol,
                    dirichlet_alpha0: None,
                }
                .validate()?;
            } else {
                linear_agent_config(alg, self.gamma)?.validate()?;
            }
        }
        if continuous_env && (self.diagnostics.anytime_every > 0 || self.diagnostics.explore_gap)
        {
            return Err(HarnessError::Config(
                "oracle diagnostics are only available on discrete environments".into(),
            ));
        }
        if let EnvironmentConfig::MountainCar { episodes, .. } = &self.environment {
            if *episodes == 0 {
                return Err(HarnessError::Config("episodes must be at least 1".into()));
            }
        }
        Ok(())
    }
}

fn linear_knobs(alg: &AlgorithmConfig) -> &LinearKnobs {
    match alg {
        AlgorithmConfig::LinearPacRmdp { knobs, .. }
        | AlgorithmConfig::LinearPacMdp { knobs, .. }
        | AlgorithmConfig::LinearEpsGreedy { knobs, .. } => knobs,
        _ => unreachable!("linear knobs requested for a discrete algorithm"),
    }
}

fn linear_agent_config(alg: &AlgorithmConfig, gamma: f64) -> Result<LinearAgentConfig, HarnessError> {
    let (mode, eps_random, knobs) = match alg {
        AlgorithmConfig::LinearPacRmdp { h, knobs } => {
            (LinearExplorationMode::PacRmdp { h: *h }, 0.0, knobs)
        }
        AlgorithmConfig::LinearPacMdp { eps, knobs } => {
            (LinearExplorationMode::PacMdp { eps: *eps }, 0.0, knobs)
        }
        AlgorithmConfig::LinearEpsGreedy { eps, knobs } => {
            (LinearExplorationMode::PacRmdp { h: 0 }, *eps, knobs)
        }
        other => {
            return Err(HarnessError::Config(format!(
                "{} is not a continuous algorithm",
                other.label()
            )))
        }
    };
    Ok(LinearAgentConfig {
        mode,
        delta: knobs.delta,
        sigma: knobs.sigma,
        fixed_delta_bound: knobs.fixed_delta_bound,
        fixed_lipschitz: knobs.fixed_lipschitz,
        prior_lipschitz: knobs.prior_lipschitz,
        eps_random,
        gamma,
        plan_tol: knobs.plan_tol,
        plan_sweeps: knobs.plan_sweeps,
        plan_refresh_tol: knobs.plan_refresh_tol,
        lipschitz_refresh_every: knobs.lipschitz_refresh_every,
        refit_every: knobs.refit_every,
        pinv_rel_cutoff: knobs.pinv_rel_cutoff,
    })
}

/// Uniform tensor grid over the mountain-car box with bandwidth set to
/// `ratio` times the spacing.
pub fn mountain_car_grid(
    spec: &MountainCarSpec,
    points: usize,
    ratio: f64,
    normalized: bool,
) -> Result<RbfGrid, PlannerError> {
    let sp_p = (spec.position_max - spec.position_min) / (points.max(2) - 1) as f64;
    let sp_v = (spec.velocity_max - spec.velocity_min) / (points.max(2) - 1) as f64;
    let axes = vec![
        (0..points).map(|i| spec.position_min + sp_p * i as f64).collect::<Vec<_>>(),
        (0..points).map(|i| spec.velocity_min + sp_v * i as f64).collect::<Vec<_>>(),
    ];
    Ok(RbfGrid::tensor(axes, vec![sp_p * ratio, sp_v * ratio])?.normalized(normalized))
}

/// Everything produced by one `(algorithm, run)` execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub run: u32,
    /// Per-step rewards on discrete environments; per-episode totals on the
    /// continuous one.
    pub rewards: Vec<f64>,
    /// Sparse `(t, eps_t)` anytime-error samples (1-based steps).
    pub anytime_errors: Vec<(usize, f64)>,
    /// Dense per-step internal-vs-current-model gaps when enabled.
    pub explore_gaps: Vec<f64>,
    /// Per-episode goal flags (continuous runs only).
    pub episode_goals: Vec<bool>,
}

impl RunRecord {
    pub fn cumulative_reward_per_step(&self, t: usize) -> f64 {
        let sum: f64 = self.rewards[..t].iter().sum();
        sum / t as f64
    }
}

fn run_discrete(
    config: &ExperimentConfig,
    alg: &AlgorithmConfig,
    run: u32,
) -> Result<RunRecord, HarnessError> {
    let spec = match &config.environment {
        EnvironmentConfig::Chain { spec } | EnvironmentConfig::ModifiedChain { spec } => spec,
        _ => unreachable!(),
    };
    let mdp = match &config.environment {
        EnvironmentConfig::Chain { .. } => chain_mdp(spec, config.gamma)?,
        EnvironmentConfig::ModifiedChain { .. } => modified_chain_mdp(spec, config.gamma)?,
        _ => unreachable!(),
    };
    let kind = alg
        .discrete_kind()
        .ok_or_else(|| HarnessError::Config(format!("{} is not discrete", alg.label())))?;
    let explorer = ExplorerConfig {
        kind: kind.clone(),
        gamma: config.gamma,
        planning_tol: config.planning_tol,
        dirichlet_alpha0: None,
    };
    let mut agent =
        DiscreteAgent::new(&explorer, mdp.num_states(), mdp.num_actions(), mdp.reward_tensor().to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.base_seed.wrapping_add(run as u64));
    let mut sim = TabularSimulator::new(mdp.clone(), 0);
    let mut record = RunRecord {
        algorithm: alg.label(),
        run,
        rewards: Vec::with_capacity(config.horizon),
        anytime_errors: Vec::new(),
        explore_gaps: Vec::new(),
        episode_goals: Vec::new(),
    };
    let diag_h = config.diagnostics.anytime_h.unwrap_or(match kind {
        ExplorerKind::PacRmdp { h } => h,
        _ => 0,
    });
    let mut mean_vi_warm = vec![0.0; mdp.num_states()];
    for t in 1..=config.horizon {
        let state = sim.state();
        if config.diagnostics.explore_gap {
            let tilde = agent.internal_values()?[state];
            let mean = crate::explorers::mean_model_values_from(
                agent.counts(),
                mdp.reward_tensor(),
                config.gamma,
                config.planning_tol,
                std::mem::take(&mut mean_vi_warm),
            )?;
            record.explore_gaps.push((tilde - mean.values[state]).abs());
            mean_vi_warm = mean.values;
        }
        if config.diagnostics.anytime_every > 0 && t % config.diagnostics.anytime_every == 0 {
            let snapshot = agent.greedy_policy_snapshot()?;
            let eps_t = anytime_error(
                &mdp,
                &snapshot,
                agent.counts(),
                diag_h,
                state,
                config.planning_tol,
            )?;
            record.anytime_errors.push((t, eps_t));
        }
        let action = agent.act(state, &mut rng)?;
        let (next, reward) = sim.step(action, &mut rng);
        agent.observe(state, action, next, reward)?;
        record.rewards.push(reward);
    }
    Ok(record)
}

fn run_continuous(
    config: &ExperimentConfig,
    alg: &AlgorithmConfig,
    run: u32,
    planner_proto: &FittedPlanner,
) -> Result<RunRecord, HarnessError> {
    let (spec, episodes) = match &config.environment {
        EnvironmentConfig::MountainCar { spec, episodes } => (spec.clone(), *episodes),
        _ => unreachable!(),
    };
    let knobs = linear_knobs(alg);
    let mut env_spec = spec.clone();
    env_spec.episode_cap = config.horizon;
    let task = MountainCarTask { spec: env_spec.clone() };
    let features = MountainCarFeatures::new(&env_spec, knobs.feature_rbf);
    let agent_config = linear_agent_config(alg, config.gamma)?;
    let mut agent = LinearAgent::new(task, features, agent_config, planner_proto.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.base_seed.wrapping_add(run as u64));
    let mut env = MountainCarEnv::new(env_spec);
    let mut record = RunRecord {
        algorithm: alg.label(),
        run,
        rewards: Vec::with_capacity(episodes),
        anytime_errors: Vec::new(),
        explore_gaps: Vec::new(),
        episode_goals: Vec::with_capacity(episodes),
    };
    for _ in 0..episodes {
        env.reset();
        let mut total = 0.0;
        while !env.done() {
            let s = env.state();
            let action = agent.act(&s, &mut rng)?;
            let reward = env.step(action, &mut rng)?;
            let next = env.state();
            agent.observe(&s, action, &next)?;
            total += reward;
        }
        record.rewards.push(total);
        record.episode_goals.push(env.reached_goal());
    }
    Ok(record)
}

fn execute_one(
    config: &ExperimentConfig,
    alg: &AlgorithmConfig,
    run: u32,
    planner_proto: Option<&FittedPlanner>,
) -> Result<RunRecord, HarnessError> {
    let label = alg.label();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        if alg.is_continuous() {
            run_continuous(config, alg, run, planner_proto.expect("planner prototype"))
        } else {
            run_discrete(config, alg, run)
        }
    }));
    match outcome {
        Ok(result) => result,
        Err(_) => Err(HarnessError::RunPanicked { algorithm: label, run }),
    }
}

/// Runs every `(algorithm, run)` pair serially. Each run draws its own
/// generator seeded `base_seed + run`, so outputs are a pure function of
/// the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    run_experiment_with_threads(config, 1)
}

/// Same as [`run_experiment`] with runs spread over a thread pool; the
/// result order (and content) is identical to the serial execution.
pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    let mut planner_protos: Vec<Option<FittedPlanner>> = Vec::new();
    for alg in &config.algorithms {
        if alg.is_continuous() {
            let knobs = linear_knobs(alg);
            let spec = match &config.environment {
                EnvironmentConfig::MountainCar { spec, .. } => spec,
                _ => unreachable!(),
            };
            let grid = mountain_car_grid(
                spec,
                knobs.grid_points,
                knobs.bandwidth_ratio,
                knobs.normalized_basis,
            )?;
            planner_protos.push(Some(FittedPlanner::new(
                grid,
                config.gamma,
                knobs.plan_tol,
                knobs.plan_sweeps,
            )?));
        } else {
            planner_protos.push(None);
        }
    }
    let jobs: Vec<(usize, u32)> = (0..config.algorithms.len())
        .flat_map(|a| (0..config.runs).map(move |r| (a, r)))
        .collect();
    let results: Vec<Result<RunRecord, HarnessError>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| {
            jobs.par_iter()
                .map(|&(a, r)| {
                    execute_one(config, &config.algorithms[a], r, planner_protos[a].as_ref())
                })
                .collect()
        })
    } else {
        jobs.iter()
            .map(|&(a, r)| {
                execute_one(config, &config.algorithms[a], r, planner_protos[a].as_ref())
            })
            .collect()
    };
    results.into_iter().collect()
}

/// Reads `RMDP_LAB_THREADS` (overriding any CLI value), defaulting to 1.
pub fn resolve_threads(cli_value: Option<usize>) -> usize {
    match std::env::var("RMDP_LAB_THREADS") {
        Ok(v) => v.parse().unwrap_or(1).max(1),
        Err(_) => cli_value.unwrap_or(1).max(1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Aggregated statistics at a fixed step plus the per-step mean curves.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub at_step: usize,
    pub per_algorithm: Vec<AlgorithmSummary>,
    /// Per algorithm, per step: mean cumulative-reward-per-step.
    pub mean_curves: Vec<(String, Vec<f64>)>,
}

/// Nearest-rank percentile of a sorted slice.
fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Mean and nearest-rank 10th/90th percentiles of cumulative reward per
/// step at `at_step`, per algorithm (first-appearance order), with the full
/// mean curves alongside.
pub fn aggregate(records: &[RunRecord], at_step: usize) -> Result<SummaryStats, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to aggregate".into()));
    }
    if at_step == 0 {
        return Err(HarnessError::Config("at_step must be at least 1".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if r.rewards.len() < at_step {
            return Err(HarnessError::Config(format!(
                "record {}#{} has {} steps, aggregation requested at {}",
                r.algorithm,
                r.run,
                r.rewards.len(),
                at_step
            )));
        }
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    let mut per_algorithm = Vec::new();
    let mut mean_curves = Vec::new();
    for name in order {
        let group: Vec<&RunRecord> =
            records.iter().filter(|r| r.algorithm == name).collect();
        let mut values: Vec<f64> =
            group.iter().map(|r| r.cumulative_reward_per_step(at_step)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        per_algorithm.push(AlgorithmSummary {
            algorithm: name.to_string(),
            mean,
            p10: nearest_rank(&values, 10.0),
            p90: nearest_rank(&values, 90.0),
        });
        let horizon = group.iter().map(|r| r.rewards.len()).min().unwrap_or(0);
        let mut curve = vec![0.0; horizon];
        for r in &group {
            let mut cum = 0.0;
            for (t, slot) in curve.iter_mut().enumerate() {
                cum += r.rewards[t];
                *slot += cum / (t + 1) as f64;
            }
        }
        for slot in curve.iter_mut() {
            *slot /= group.len() as f64;
        }
        mean_curves.push((name.to_string(), curve));
    }
    Ok(SummaryStats { at_step, per_algorithm, mean_curves })
}

/// Plain-text table in the reward-study layout (Average | 10% | 90%).
pub fn format_summary_table(stats: &SummaryStats) -> String {
    let mut out = String::new();
    let width = stats
        .per_algorithm
        .iter()
        .map(|s| s.algorithm.len())
        .max()
        .unwrap_or(9)
        .max(9);
    out.push_str(&format!(
        "{:width$} | Average | 10%     | 90%\n",
        "Algorithm",
        width = width
    ));
    out.push_str(&format!("{:-<w$}\n", "", w = width + 32));
    for s in &stats.per_algorithm {
        out.push_str(&format!(
            "{:width$} | {:<7.3} | {:<7.3} | {:<7.3}\n",
            s.algorithm,
            s.mean,
            s.p10,
            s.p90,
            width = width
        ));
    }
    out
}
