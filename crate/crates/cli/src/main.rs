//! Experiment runner CLI: execute configured runs, tabulate stored records,
//! and plot reward curves.

use clap::{Parser, Subcommand};
use rmdp_lab::harness::{
    aggregate, emit_records_csv, emit_summary_csv, emit_svg_curves, format_summary_table,
    parse_records_csv, resolve_threads, run_experiment_with_threads, ExperimentConfig,
    HarnessError, RunRecord,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rmdp-lab",
    about = "Exploration laboratory for bounded-optimal reinforcement learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and write records,
    /// summary, and curves into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for runs; RMDP_LAB_THREADS overrides this.
        #[arg(long)]
        parallel: Option<usize>,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate stored records at a time step and print the
    /// Average | 10% | 90% table.
    Table {
        #[arg(long)]
        records: PathBuf,
        #[arg(long = "at-step")]
        at_step: usize,
    },
    /// Render per-algorithm mean curves of a metric to SVG.
    Plot {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        metric: String,
    },
}

fn mean_metric_curves(
    records: &[RunRecord],
    metric: &str,
) -> Result<Vec<(String, Vec<(f64, f64)>)>, HarnessError> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    let mut curves = Vec::new();
    for name in order {
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == name).collect();
        let horizon = group.iter().map(|r| r.rewards.len()).min().unwrap_or(0);
        let pts: Vec<(f64, f64)> = match metric {
            "cum_reward_per_step" => (1..=horizon)
                .map(|t| {
                    let mean = group
                        .iter()
                        .map(|r| r.cumulative_reward_per_step(t))
                        .sum::<f64>()
                        / group.len() as f64;
                    (t as f64, mean)
                })
                .collect(),
            "reward" => (1..=horizon)
                .map(|t| {
                    let mean =
                        group.iter().map(|r| r.rewards[t - 1]).sum::<f64>() / group.len() as f64;
                    (t as f64, mean)
                })
                .collect(),
            "explore_gap" => {
                let steps = group.iter().map(|r| r.explore_gaps.len()).min().unwrap_or(0);
                (1..=steps)
                    .map(|t| {
                        let mean = group.iter().map(|r| r.explore_gaps[t - 1]).sum::<f64>()
                            / group.len() as f64;
                        (t as f64, mean)
                    })
                    .collect()
            }
            "anytime_error" => {
                // sparse series: average the samples that share a step
                let mut by_step: std::collections::BTreeMap<usize, (f64, usize)> =
                    std::collections::BTreeMap::new();
                for r in &group {
                    for &(t, e) in &r.anytime_errors {
                        let entry = by_step.entry(t).or_insert((0.0, 0));
                        entry.0 += e;
                        entry.1 += 1;
                    }
                }
                by_step
                    .into_iter()
                    .map(|(t, (sum, n))| (t as f64, sum / n as f64))
                    .collect()
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown metric '{other}' (expected cum_reward_per_step, reward, \
                     anytime_error, or explore_gap)"
                )))
            }
        };
        curves.push((name.to_string(), pts));
    }
    Ok(curves)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, out, parallel, seed } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            let threads = resolve_threads(parallel);
            let records = run_experiment_with_threads(&config, threads)?;
            std::fs::create_dir_all(&out)
                .map_err(|source| HarnessError::Io { path: out.clone(), source })?;
            emit_records_csv(&records, &out.join("records.csv"))?;
            let final_step = records.iter().map(|r| r.rewards.len()).min().unwrap_or(0);
            let stats = aggregate(&records, final_step)?;
            emit_summary_csv(&stats, &out.join("summary.csv"))?;
            let curves = mean_metric_curves(&records, "cum_reward_per_step")?;
            emit_svg_curves(
                &curves,
                "mean cumulative reward per step",
                &out.join("curves.svg"),
            )?;
            println!("{}", format_summary_table(&stats));
            Ok(())
        }
        Command::Table { records, at_step } => {
            let parsed = parse_records_csv(&records.join("records.csv"))?;
            let stats = aggregate(&parsed, at_step)?;
            print!("{}", format_summary_table(&stats));
            Ok(())
        }
        Command::Plot { records, metric } => {
            let parsed = parse_records_csv(&records.join("records.csv"))?;
            let curves = mean_metric_curves(&parsed, &metric)?;
            let out = records.join(format!("{metric}.svg"));
            emit_svg_curves(&curves, &metric, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
