//! Repeated seeded runs, medians, and CSV records. Timing covers the
//! solver only; parsing and model construction happen before the clock
//! starts. Fixed seed bases give byte-identical CSV except `time_ms`.

use std::fmt;
use std::time::{Duration, Instant};

use reachmc_core::{
    interval_iteration, value_iteration, Brtdp, Mcts, MctsConfig, MctsVariant, Mdp,
    SamplerConfig, SolverConfig, SolverResult, Status, SuccessorRule,
};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Vi,
    Ii,
    Brtdp,
    Mcts,
    Bmcts,
    MctsBrtdp,
    BrtdpUcb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Vi,
        Algorithm::Ii,
        Algorithm::Brtdp,
        Algorithm::Mcts,
        Algorithm::Bmcts,
        Algorithm::MctsBrtdp,
        Algorithm::BrtdpUcb,
    ];

    /// The five engines whose intervals certify the answer.
    pub const GUARANTEED: [Algorithm; 5] = [
        Algorithm::Ii,
        Algorithm::Brtdp,
        Algorithm::Bmcts,
        Algorithm::MctsBrtdp,
        Algorithm::BrtdpUcb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vi => "vi",
            Algorithm::Ii => "ii",
            Algorithm::Brtdp => "brtdp",
            Algorithm::Mcts => "mcts",
            Algorithm::Bmcts => "bmcts",
            Algorithm::MctsBrtdp => "mcts-brtdp",
            Algorithm::BrtdpUcb => "brtdp-ucb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`; expected one of vi, ii, brtdp, mcts, bmcts, mcts-brtdp, brtdp-ucb"))
    }
}

/// Everything a single run needs besides the model and the seed.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub epsilon: f64,
    pub exploration_constant: f64,
    pub timeout: Option<Duration>,
    pub max_iterations: u64,
    pub mec_period: u64,
    pub step_cap: Option<usize>,
    pub successor_rule: SuccessorRule,
    pub collapse_first: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            epsilon: 1e-6,
            exploration_constant: 25.0,
            timeout: Some(Duration::from_secs(600)),
            max_iterations: u64::MAX,
            mec_period: 1000,
            step_cap: None,
            successor_rule: SuccessorRule::WeightedByGap,
            collapse_first: true,
        }
    }
}

/// One solver invocation.
pub fn solve_once(mdp: &Mdp, algorithm: Algorithm, seed: u64, p: &RunParams) -> SolverResult {
    match algorithm {
        Algorithm::Vi => value_iteration(
            mdp,
            &SolverConfig {
                epsilon: p.epsilon,
                max_iterations: p.max_iterations,
                timeout: p.timeout,
                audit: None,
            },
        ),
        Algorithm::Ii => interval_iteration(
            mdp,
            &SolverConfig {
                epsilon: p.epsilon,
                max_iterations: p.max_iterations,
                timeout: p.timeout,
                audit: None,
            },
            p.collapse_first,
        ),
        Algorithm::Brtdp => Brtdp::new(
            mdp,
            SamplerConfig {
                epsilon: p.epsilon,
                max_episode_length: p.step_cap,
                mec_check_period: p.mec_period,
                seed,
                successor_rule: p.successor_rule,
                max_episodes: p.max_iterations,
                timeout: p.timeout,
                audit: None,
            },
        )
        .run(),
        Algorithm::Mcts | Algorithm::Bmcts | Algorithm::MctsBrtdp | Algorithm::BrtdpUcb => {
            let variant = match algorithm {
                Algorithm::Mcts => MctsVariant::Plain,
                Algorithm::Bmcts => MctsVariant::Bounded,
                Algorithm::MctsBrtdp => MctsVariant::BrtdpRollout,
                _ => MctsVariant::FlatUcb,
            };
            Mcts::new(
                mdp,
                MctsConfig {
                    exploration_constant: p.exploration_constant,
                    epsilon: p.epsilon,
                    seed,
                    variant,
                    max_iterations: p.max_iterations,
                    timeout: p.timeout,
                    mec_check_period: p.mec_period,
                    step_cap: p.step_cap,
                    successor_rule: p.successor_rule,
                    ..MctsConfig::default()
                },
            )
            .run()
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub model: String,
    pub algorithm: String,
    pub exploration_constant: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub repetition: u32,
    pub time_ms: u128,
    pub iterations: u64,
    pub explored_states: usize,
    pub lower: f64,
    pub upper: f64,
    pub status: String,
}

/// Median time and exploration over the non-timeout runs; `status` is
/// the most frequent status among them, or `Timeout` when every single
/// run timed out (the medians then cover all runs, for what they are
/// worth).
#[derive(Debug, Clone)]
pub struct Summary {
    pub median_time_ms: u128,
    pub median_explored: usize,
    pub status: Status,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("sweep needs at least one exploration constant")]
    EmptySweep,
}

/// Runs `repetitions` independent solves with seeds `seed_base`,
/// `seed_base + 1`, ... and collects records plus the summary.
pub fn run_experiment(
    model_name: &str,
    mdp: &Mdp,
    algorithm: Algorithm,
    params: &RunParams,
    seed_base: u64,
    repetitions: u32,
) -> Result<(Vec<ExperimentRecord>, Summary), HarnessError> {
    if repetitions == 0 {
        return Err(HarnessError::NoRepetitions);
    }
    let mut records = Vec::with_capacity(repetitions as usize);
    let mut results = Vec::with_capacity(repetitions as usize);
    for rep in 0..repetitions {
        let seed = seed_base + rep as u64;
        let t0 = Instant::now();
        let r = solve_once(mdp, algorithm, seed, params);
        let time_ms = t0.elapsed().as_millis();
        records.push(ExperimentRecord {
            model: model_name.to_string(),
            algorithm: algorithm.name().to_string(),
            exploration_constant: params.exploration_constant,
            epsilon: params.epsilon,
            seed,
            repetition: rep,
            time_ms,
            iterations: r.iterations,
            explored_states: r.explored_states,
            lower: r.lower,
            upper: r.upper,
            status: r.status.to_string(),
        });
        results.push(r);
    }
    let summary = summarize(&records, &results);
    Ok((records, summary))
}

fn summarize(records: &[ExperimentRecord], results: &[SolverResult]) -> Summary {
    let ok: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].status != Status::Timeout)
        .collect();
    let pool: Vec<usize> = if ok.is_empty() { (0..results.len()).collect() } else { ok };
    let mut times: Vec<u128> = pool.iter().map(|&i| records[i].time_ms).collect();
    let mut explored: Vec<usize> = pool.iter().map(|&i| records[i].explored_states).collect();
    let status = if results.iter().all(|r| r.status == Status::Timeout) {
        Status::Timeout
    } else {
        // Most frequent non-timeout status, earliest run breaking ties.
        let mut best = results[pool[0]].status;
        let mut best_count = 0usize;
        for &i in &pool {
            let c = pool.iter().filter(|&&j| results[j].status == results[i].status).count();
            if c > best_count {
                best_count = c;
                best = results[i].status;
            }
        }
        best
    };
    Summary { median_time_ms: median(&mut times), median_explored: median(&mut explored), status }
}

/// Lower median: middle element after sorting (the smaller of the two
/// middles for even counts), so medians of integer quantities stay
/// integers.
pub fn median<T: Ord + Copy>(xs: &mut [T]) -> T {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort_unstable();
    xs[(xs.len() - 1) / 2]
}

/// One row of a sweep over the exploration constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub exploration_constant: f64,
    pub median_time_ms: u128,
    pub median_iterations: u64,
    pub median_explored: usize,
}

/// Runs `seeds` runs per constant and reports medians over all
/// completed runs, whatever their status; iteration and exploration
/// medians are deterministic for a fixed seed base.
pub fn sweep_constant(
    mdp: &Mdp,
    algorithm: Algorithm,
    params: &RunParams,
    constants: &[f64],
    seed_base: u64,
    seeds: u32,
) -> Result<Vec<SweepRow>, HarnessError> {
    if constants.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    if seeds == 0 {
        return Err(HarnessError::NoRepetitions);
    }
    let mut rows = Vec::with_capacity(constants.len());
    for &c in constants {
        let mut p = params.clone();
        p.exploration_constant = c;
        let mut times = Vec::new();
        let mut iterations = Vec::new();
        let mut explored = Vec::new();
        for s in 0..seeds {
            let t0 = Instant::now();
            let r = solve_once(mdp, algorithm, seed_base + s as u64, &p);
            times.push(t0.elapsed().as_millis());
            iterations.push(r.iterations);
            explored.push(r.explored_states);
        }
        rows.push(SweepRow {
            exploration_constant: c,
            median_time_ms: median(&mut times),
            median_iterations: median(&mut iterations),
            median_explored: median(&mut explored),
        });
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "model,algorithm,C,epsilon,seed,repetition,time_ms,iterations,explored_states,L_init,U_init,status";

/// RFC-4180-style quoting for the model column, whose generator
/// expressions routinely contain commas.
fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Serializes records with the fixed header, decimal points and LF
/// endings. Floats print in shortest round-trip form.
pub fn emit_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            quote(&r.model),
            r.algorithm,
            r.exploration_constant,
            r.epsilon,
            r.seed,
            r.repetition,
            r.time_ms,
            r.iterations,
            r.explored_states,
            r.lower,
            r.upper,
            r.status,
        ));
    }
    out
}

pub const SWEEP_HEADER: &str = "C,median_time_ms,median_iterations,median_explored";

pub fn emit_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.exploration_constant, r.median_time_ms, r.median_iterations, r.median_explored
        ));
    }
    out
}

/// Parses what [`emit_csv`] produced; the round trip is exact because
/// floats are printed in shortest round-trip form.
pub fn parse_csv(text: &str) -> Result<Vec<ExperimentRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => return Err(format!("unexpected header `{h}`")),
        None => return Err("empty input".to_string()),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line).map_err(|e| format!("line {}: {e}", i + 2))?;
        if fields.len() != 12 {
            return Err(format!("line {}: {} fields, expected 12", i + 2, fields.len()));
        }
        let f = |k: usize, what: &str| -> Result<f64, String> {
            fields[k].parse().map_err(|_| format!("line {}: bad {what}", i + 2))
        };
        records.push(ExperimentRecord {
            model: fields[0].clone(),
            algorithm: fields[1].clone(),
            exploration_constant: f(2, "C")?,
            epsilon: f(3, "epsilon")?,
            seed: fields[4].parse().map_err(|_| format!("line {}: bad seed", i + 2))?,
            repetition: fields[5]
                .parse()
                .map_err(|_| format!("line {}: bad repetition", i + 2))?,
            time_ms: fields[6].parse().map_err(|_| format!("line {}: bad time", i + 2))?,
            iterations: fields[7]
                .parse()
                .map_err(|_| format!("line {}: bad iterations", i + 2))?,
            explored_states: fields[8]
                .parse()
                .map_err(|_| format!("line {}: bad explored_states", i + 2))?,
            lower: f(9, "L_init")?,
            upper: f(10, "U_init")?,
            status: fields[11].clone(),
        });
    }
    Ok(records)
}

fn split_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(ch) = chars.next() {
        if quoted {
            match ch {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    cur.push('"');
                }
                '"' => quoted = false,
                _ => cur.push(ch),
            }
        } else {
            match ch {
                '"' if cur.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(ch),
            }
        }
    }
    if quoted {
        return Err("unterminated quote".to_string());
    }
    fields.push(cur);
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(model: &str, seed: u64) -> ExperimentRecord {
        ExperimentRecord {
            model: model.to_string(),
            algorithm: "brtdp".to_string(),
            exploration_constant: 25.0,
            epsilon: 1e-6,
            seed,
            repetition: 0,
            time_ms: 13,
            iterations: 4242,
            explored_states: 17,
            lower: 0.4999995,
            upper: 0.5000001,
            status: "converged".to_string(),
        }
    }

    #[test]
    fn csv_round_trips_including_commas() {
        let records =
            vec![record("adversary(3,0.01)", 1), record("models/plain.mdp", 2)];
        let text = emit_csv(&records);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
        assert_eq!(parse_csv(&text).unwrap(), records);
    }

    #[test]
    fn empty_record_list_is_header_only() {
        let text = emit_csv(&[]);
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert_eq!(parse_csv(&text).unwrap(), vec![]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(parse_csv("model,algorithm\n").is_err());
    }

    #[test]
    fn lower_median_is_deterministic() {
        assert_eq!(median(&mut [3u64, 1, 2]), 2);
        assert_eq!(median(&mut [4u64, 1, 2, 3]), 2);
        assert_eq!(median(&mut [7u64]), 7);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bfs".parse::<Algorithm>().is_err());
    }
}
