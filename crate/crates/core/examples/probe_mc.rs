// Probe: full learning loop of the continuous agent on mountain car.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_lab::envs::{MountainCarEnv, MountainCarFeatures, MountainCarSpec, MountainCarTask};
use rmdp_lab::linear::{LinearAgent, LinearAgentConfig, LinearExplorationMode};
use rmdp_lab::planner::RbfGrid;
use std::time::Instant;

fn mc_grid() -> RbfGrid {
    let pts = 30usize;
    let (plo, phi, vlo, vhi) = (-1.2f64, 0.6, -0.07, 0.07);
    let sp = ((phi - plo) / 29.0, (vhi - vlo) / 29.0);
    let axes = vec![
        (0..pts).map(|i| plo + sp.0 * i as f64).collect::<Vec<_>>(),
        (0..pts).map(|i| vlo + sp.1 * i as f64).collect::<Vec<_>>(),
    ];
    RbfGrid::tensor(axes, vec![sp.0 * 0.5, sp.1 * 0.5]).unwrap().normalized(true)
}

fn run(mode: LinearExplorationMode, eps: f64, episodes: usize, seed: u64) {
    let spec = MountainCarSpec::default();
    let task = MountainCarTask { spec: spec.clone() };
    let features = MountainCarFeatures::new(&spec, 10);
    let refresh = if eps > 0.0 { 1e-2 } else { 2e-3 };
    let config = LinearAgentConfig {
        mode,
        delta: 0.9,
        sigma: 0.001,
        fixed_delta_bound: Some(0.14),
        fixed_lipschitz: Some(1.0),
        prior_lipschitz: 10.0,
        eps_random: eps,
        gamma: 0.99,
        plan_tol: 0.01,
        plan_sweeps: 40,
        plan_refresh_tol: refresh,
        lipschitz_refresh_every: 10,
        refit_every: 8,
        pinv_rel_cutoff: 1e-6,
    };
    let planner = rmdp_lab::planner::FittedPlanner::new(mc_grid(), 0.99, 0.01, 60).unwrap();
    let mut agent = LinearAgent::new(task, features, config, planner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = MountainCarEnv::new(spec);
    let t0 = Instant::now();
    let mut goals = 0;
    for ep in 0..episodes {
        env.reset();
        let mut total = 0.0;
        let mut steps = 0;
        while !env.done() {
            let s = env.state();
            let a = agent.act(&[s[0], s[1]], &mut rng).unwrap();
            let r = env.step(a, &mut rng).unwrap();
            let ns = env.state();
            agent.observe(&[s[0], s[1]], a, &[ns[0], ns[1]]).unwrap();
            total += r;
            steps += 1;
        }
        if env.reached_goal() { goals += 1; }
        if ep < 8 || ep % 10 == 0 {
            println!("  ep {ep}: total {total:.1}, steps {steps}, goal {}, plans so far {}, L {:.1}", env.reached_goal(), agent.plans(), agent.lipschitz());
        }
    }
    println!("mode {mode:?} eps {eps}: {goals}/{episodes} goals, elapsed {:?}", t0.elapsed());
}

fn main() {
    println!("--- PAC-RMDP(10) ---");
    run(LinearExplorationMode::PacRmdp { h: 10 }, 0.0, 12, 7);
    println!("--- eps-greedy(0.1) ---");
    run(LinearExplorationMode::PacRmdp { h: 0 }, 0.1, 20, 7);
}
