// Phase timing for the eps-greedy mountain-car seed.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_lab::envs::{MountainCarEnv, MountainCarFeatures, MountainCarSpec, MountainCarTask};
use rmdp_lab::linear::{LinearAgent, LinearAgentConfig, LinearExplorationMode};
use rmdp_lab::planner::RbfGrid;
use std::time::{Duration, Instant};

fn mc_grid() -> RbfGrid {
    let pts = 30usize;
    let sp = (1.8 / 29.0, 0.14 / 29.0);
    let axes = vec![
        (0..pts).map(|i| -1.2 + sp.0 * i as f64).collect::<Vec<_>>(),
        (0..pts).map(|i| -0.07 + sp.1 * i as f64).collect::<Vec<_>>(),
    ];
    RbfGrid::tensor(axes, vec![sp.0 * 0.5, sp.1 * 0.5]).unwrap().normalized(true)
}

fn main() {
    let spec = MountainCarSpec::default();
    let task = MountainCarTask { spec: spec.clone() };
    let features = MountainCarFeatures::new(&spec, 10);
    let config = LinearAgentConfig {
        mode: LinearExplorationMode::PacRmdp { h: 0 },
        delta: 0.9, sigma: 0.001,
        fixed_delta_bound: Some(0.14),
        fixed_lipschitz: Some(1.0),
        prior_lipschitz: 10.0,
        eps_random: 0.1,
        gamma: 0.99, plan_tol: 0.01, plan_sweeps: 40,
        plan_refresh_tol: 1e-2,
        lipschitz_refresh_every: 10,
        refit_every: 8,
        pinv_rel_cutoff: 1e-6,
    };
    let planner = rmdp_lab::planner::FittedPlanner::new(mc_grid(), 0.99, 0.01, 40).unwrap();
    let mut agent = LinearAgent::new(task, features, config, planner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut env = MountainCarEnv::new(spec);
    let mut t_act = Duration::ZERO;
    let mut t_obs = Duration::ZERO;
    for _ep in 0..10 {
        env.reset();
        while !env.done() {
            let s = env.state();
            let t0 = Instant::now();
            let a = agent.act(&[s[0], s[1]], &mut rng).unwrap();
            t_act += t0.elapsed();
            env.step(a, &mut rng).unwrap();
            let ns = env.state();
            let t1 = Instant::now();
            agent.observe(&[s[0], s[1]], a, &[ns[0], ns[1]]).unwrap();
            t_obs += t1.elapsed();
        }
    }
    println!("10 eps: act {t_act:?} (plans {}), observe {t_obs:?}", agent.plans());
}
