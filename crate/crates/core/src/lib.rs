//! Exploration laboratory for bounded-optimal reinforcement learning.
//!
//! The crate pairs optimistic explorers for discrete and linearly
//! parameterized MDPs with a diagnostics oracle that measures how close each
//! agent stays to the best model reachable with a bounded number of extra
//! samples, plus benchmark environments and a declarative experiment
//! harness.

pub mod envs;
pub mod harness;
pub mod explorers;
pub mod linalg;
pub mod linear;
pub mod mdp;
pub mod oracle;
pub mod planner;

pub use envs::{
    chain_mdp, modified_chain_mdp, mountain_car_step, ChainSpec, EnvError, MountainCarEnv,
    MountainCarFeatures, MountainCarSpec, MountainCarTask, TabularSimulator,
};
pub use explorers::{
    beb_internal_values, bolt_internal_values, mbie_equivalent_h, mbie_equivalent_horizons,
    mbie_internal_values, mbie_l1_internal_values, mbie_radius, mean_model_values,
    rmdp_internal_values, rmdp_internal_values_per_pair, solve_l1_optimistic,
    vbe_internal_values, DirichletModel, DiscreteAgent, EquivalentHorizon, ExplorerConfig,
    ExplorerError, ExplorerKind, TransitionCounts,
};
pub use mdp::{
    bellman_backup, greedy_policy, policy_value, value_iteration, MdpError, Policy, TabularMdp,
    ValueFunction,
};
pub use linear::{
    bonus_reward, eig_split, estimate_delta, estimate_lipschitz, fit_least_squares, interval_ih,
    varsigma, ComponentModel, ContinuousTask, EigSplit, FeatureMap, LinearAgent,
    LinearAgentConfig, LinearError, LinearExplorationMode, LinearModel,
};
pub use oracle::{
    anytime_error, average_loss, best_reachable_model, explicit_exploration_runtime,
    h_reachable_optimal_value, HReachableValue, MetricSeries, OracleError, ReachableAllocation,
};
pub use harness::{
    aggregate, emit_records_csv, emit_summary_csv, emit_svg_curves, format_summary_table,
    parse_records_csv, run_experiment, run_experiment_with_threads, AlgorithmConfig,
    DiagnosticsConfig, EnvironmentConfig, ExperimentConfig, HarnessError, RunRecord,
    SummaryStats,
};
pub use planner::{
    fitted_value_iteration, greedy_action, rbf_eval, FittedPlanner, PlanModel, PlannerError,
    RbfGrid,
};
