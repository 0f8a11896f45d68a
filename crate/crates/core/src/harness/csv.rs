//! Byte-deterministic CSV output for run records and summary tables, plus
//! the parser used by the table/plot commands.

use super::{HarnessError, RunRecord, SummaryStats};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Floats carry 9 significant digits; integers stay plain.
pub(crate) fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    file.write_all(bytes)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// One row per `(algorithm, run, t)` with LF line endings. The two
/// diagnostic columns appear only when some record carries them; unsampled
/// cells stay empty.
pub fn emit_records_csv(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    let has_anytime = records.iter().any(|r| !r.anytime_errors.is_empty());
    let has_gap = records.iter().any(|r| !r.explore_gaps.is_empty());
    let mut out = String::new();
    out.push_str("algorithm,run,t,reward,cum_reward_per_step");
    if has_anytime {
        out.push_str(",anytime_error");
    }
    if has_gap {
        out.push_str(",explore_gap");
    }
    out.push('\n');
    for r in records {
        let anytime: BTreeMap<usize, f64> = r.anytime_errors.iter().cloned().collect();
        let mut cum = 0.0;
        for (i, &reward) in r.rewards.iter().enumerate() {
            let t = i + 1;
            cum += reward;
            out.push_str(&r.algorithm);
            out.push(',');
            out.push_str(&r.run.to_string());
            out.push(',');
            out.push_str(&t.to_string());
            out.push(',');
            out.push_str(&format_float(reward));
            out.push(',');
            out.push_str(&format_float(cum / t as f64));
            if has_anytime {
                out.push(',');
                if let Some(e) = anytime.get(&t) {
                    out.push_str(&format_float(*e));
                }
            }
            if has_gap {
                out.push(',');
                if let Some(g) = r.explore_gaps.get(i) {
                    out.push_str(&format_float(*g));
                }
            }
            out.push('\n');
        }
    }
    write_file(path, out.as_bytes())
}

/// Summary table: one row per algorithm with mean/p10/p90 at the stats'
/// step.
pub fn emit_summary_csv(stats: &SummaryStats, path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("algorithm,at_step,mean,p10,p90\n");
    for s in &stats.per_algorithm {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.algorithm,
            stats.at_step,
            format_float(s.mean),
            format_float(s.p10),
            format_float(s.p90)
        ));
    }
    write_file(path, out.as_bytes())
}

/// Parses a records CSV back into [`RunRecord`]s (goal flags are not part
/// of the file format and come back empty).
pub fn parse_records_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("empty file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 5
        || columns[..5]
            != ["algorithm", "run", "t", "reward", "cum_reward_per_step"]
    {
        return Err(HarnessError::Csv(format!("unexpected header: {header}")));
    }
    let anytime_col = columns.iter().position(|&c| c == "anytime_error");
    let gap_col = columns.iter().position(|&c| c == "explore_gap");
    let mut records: Vec<RunRecord> = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(HarnessError::Csv(format!(
                "line {}: {} fields, expected {}",
                line_no + 2,
                fields.len(),
                columns.len()
            )));
        }
        let parse_f64 = |s: &str| -> Result<f64, HarnessError> {
            s.parse::<f64>()
                .map_err(|_| HarnessError::Csv(format!("line {}: bad float {s}", line_no + 2)))
        };
        let run: u32 = fields[1]
            .parse()
            .map_err(|_| HarnessError::Csv(format!("line {}: bad run index", line_no + 2)))?;
        let t: usize = fields[2]
            .parse()
            .map_err(|_| HarnessError::Csv(format!("line {}: bad step index", line_no + 2)))?;
        let reward = parse_f64(fields[3])?;
        let need_new = records
            .last()
            .map(|r| r.algorithm != fields[0] || r.run != run)
            .unwrap_or(true);
        if need_new {
            records.push(RunRecord {
                algorithm: fields[0].to_string(),
                run,
                rewards: Vec::new(),
                anytime_errors: Vec::new(),
                explore_gaps: Vec::new(),
                episode_goals: Vec::new(),
            });
        }
        let record = records.last_mut().expect("record exists");
        if t != record.rewards.len() + 1 {
            return Err(HarnessError::Csv(format!(
                "line {}: step {} out of order",
                line_no + 2,
                t
            )));
        }
        record.rewards.push(reward);
        if let Some(c) = anytime_col {
            if !fields[c].is_empty() {
                record.anytime_errors.push((t, parse_f64(fields[c])?));
            }
        }
        if let Some(c) = gap_col {
            if !fields[c].is_empty() {
                record.explore_gaps.push(parse_f64(fields[c])?);
            }
        }
    }
    Ok(records)
}
