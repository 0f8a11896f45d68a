// Probe: chain reproduction table at desk scale.
use rmdp_lab::harness::*;
use rmdp_lab::ChainSpec;
use std::time::Instant;

fn main() {
    let runs: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let modified = std::env::args().nth(2).as_deref() == Some("modified");
    let environment = if modified {
        EnvironmentConfig::ModifiedChain { spec: ChainSpec::default() }
    } else {
        EnvironmentConfig::Chain { spec: ChainSpec::default() }
    };
    let config = ExperimentConfig {
        environment,
        algorithms: vec![
            AlgorithmConfig::PacRmdp { h: 1 },
            AlgorithmConfig::PacRmdp { h: 8 },
            AlgorithmConfig::PacRmdp { h: 16 },
            AlgorithmConfig::Mbie { eps: 1e4, delta: 0.2, m: None },
            AlgorithmConfig::Bolt { eta: 148 },
            AlgorithmConfig::Vbe { delta: 1e3 },
            AlgorithmConfig::Mbie { eps: 0.01, delta: 0.1, m: None },
            AlgorithmConfig::Beb { beta: 43808.0 },
        ],
        runs,
        horizon: 3000,
        gamma: 0.95,
        planning_tol: 0.01,
        base_seed: 0,
        diagnostics: DiagnosticsConfig::default(),
    };
    let t0 = Instant::now();
    let records = run_experiment(&config).unwrap();
    let stats = aggregate(&records, 3000).unwrap();
    println!("elapsed {:?} for {} runs", t0.elapsed(), runs);
    let paper: &[(&str, f64)] = if modified {
        &[("PAC-RMDP(1)", 0.339), ("PAC-RMDP(8)", 0.715), ("PAC-RMDP(16)", 0.678),
          ("MBIE(10000, 0.2)", 0.697), ("BOLT(148)", 0.377), ("VBE(1000)", 0.334),
          ("MBIE(0.01, 0.1)", 0.270), ("BEB(43808)", 0.108)]
    } else {
        &[("PAC-RMDP(1)", 0.357), ("PAC-RMDP(8)", 0.343), ("PAC-RMDP(16)", 0.328),
          ("MBIE(10000, 0.2)", 0.267), ("BOLT(148)", 0.240), ("VBE(1000)", 0.220),
          ("MBIE(0.01, 0.1)", 0.160), ("BEB(43808)", 0.148)]
    };
    for s in &stats.per_algorithm {
        let target = paper.iter().find(|(n, _)| *n == s.algorithm).map(|(_, v)| *v).unwrap_or(f64::NAN);
        println!("{:20} mean {:.3} p10 {:.3} p90 {:.3}   (paper {:.3}, diff {:+.3})",
                 s.algorithm, s.mean, s.p10, s.p90, target, s.mean - target);
    }
}
