//! `reachmc`: maximum reachability probabilities in MDPs with
//! certified error bounds.
//!
//! Exit codes: 0 converged; 2 timeout, exhausted budget, or detected
//! non-convergence; 3 terminated without a guarantee; 4 input error.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use reachmc_core::benchgen::GoalRule;
use reachmc_core::{Status, SuccessorRule};
use reachmc_cli::harness::{
    emit_csv, emit_sweep_csv, run_experiment, solve_once, sweep_constant, Algorithm, RunParams,
};
use reachmc_cli::modelref::{is_generator, load_model};

#[derive(Parser)]
#[command(
    name = "reachmc",
    version,
    about = "Maximum reachability probabilities in MDPs with certified error bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model once and print the verdict.
    Check(SolveOpts),
    /// Run repetitions over consecutive seeds and emit CSV records.
    Experiment(ExperimentOpts),
    /// Sweep the exploration constant and emit median rows per value.
    Sweep(SweepOpts),
    /// Materialize a model reference as a model file.
    Generate(GenerateOpts),
}

#[derive(Args)]
struct SolveOpts {
    /// Model file or generator expression such as `adversary(3,0.01)`,
    /// `random(50,3,4,0.2,1)`, `upper-trap`, `branch(a,b)`,
    /// `compose(a,b[,first|either])`.
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "ii", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 25.0)]
    exploration_constant: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-run wall-clock limit in seconds; 0 disables it.
    #[arg(long, default_value_t = 600.0)]
    timeout_s: f64,
    /// Iteration/episode/sweep budget.
    #[arg(long)]
    max_iterations: Option<u64>,
    /// Periodic end-component check, in iterations.
    #[arg(long, default_value_t = 1000)]
    mec_period: u64,
    /// Episode and rollout step cap.
    #[arg(long)]
    step_cap: Option<usize>,
    /// `gap` (probability times bound gap) or `probability`.
    #[arg(long, default_value = "gap", value_parser = parse_rule)]
    successor_rule: SuccessorRule,
    /// Collapse end components up front (interval iteration only).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    collapse_first: bool,
    /// Goal rule for `compose(a,b)` references without an explicit one.
    #[arg(long, default_value = "first", value_parser = parse_goal_rule)]
    goal_rule: GoalRule,
}

#[derive(Args)]
struct ExperimentOpts {
    #[command(flatten)]
    solve: SolveOpts,
    #[arg(long, default_value_t = 15)]
    repetitions: u32,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepOpts {
    #[command(flatten)]
    solve: SolveOpts,
    /// Comma-separated exploration constants, e.g. `0.5,4,25`.
    #[arg(long, value_delimiter = ',', required = true)]
    constants: Vec<f64>,
    /// Runs per constant, seeded `seed`, `seed+1`, ...
    #[arg(long, default_value_t = 10)]
    seeds: u32,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateOpts {
    /// Generator expression (or a file, which round-trips it).
    #[arg(long)]
    model: String,
    /// Goal rule for `compose(a,b)` references without an explicit one.
    #[arg(long, default_value = "first", value_parser = parse_goal_rule)]
    goal_rule: GoalRule,
    /// Model destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_rule(s: &str) -> Result<SuccessorRule, String> {
    match s {
        "gap" => Ok(SuccessorRule::WeightedByGap),
        "probability" | "prob" => Ok(SuccessorRule::ByTransitionProbability),
        other => Err(format!("unknown successor rule `{other}`; expected gap or probability")),
    }
}

fn parse_goal_rule(s: &str) -> Result<GoalRule, String> {
    match s {
        "first" => Ok(GoalRule::FirstComponent),
        "either" => Ok(GoalRule::EitherComponent),
        other => Err(format!("unknown goal rule `{other}`; expected first or either")),
    }
}

impl SolveOpts {
    fn params(&self) -> RunParams {
        RunParams {
            epsilon: self.epsilon,
            exploration_constant: self.exploration_constant,
            timeout: if self.timeout_s > 0.0 {
                Some(Duration::from_secs_f64(self.timeout_s))
            } else {
                None
            },
            max_iterations: self.max_iterations.unwrap_or(u64::MAX),
            mec_period: self.mec_period,
            step_cap: self.step_cap,
            successor_rule: self.successor_rule,
            collapse_first: self.collapse_first,
        }
    }
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Converged => 0,
        Status::Timeout | Status::BudgetExhausted | Status::NoConvergence => 2,
        Status::Unguaranteed => 3,
    }
}

fn write_or_print(output: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Check(opts) => check(&opts),
        Command::Experiment(opts) => experiment(&opts),
        Command::Sweep(opts) => sweep(&opts),
        Command::Generate(opts) => generate(&opts),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            4
        }
    }
}

fn check(opts: &SolveOpts) -> Result<i32, String> {
    let mdp = load_model(&opts.model, opts.goal_rule).map_err(|e| e.to_string())?;
    let r = solve_once(&mdp, opts.algorithm, opts.seed, &opts.params());
    println!(
        "model: {} ({} states, {} transitions)",
        opts.model,
        mdp.num_states(),
        mdp.num_transitions()
    );
    println!("algorithm: {}  seed: {}  epsilon: {}", opts.algorithm, opts.seed, opts.epsilon);
    println!("status: {}", r.status);
    match r.estimate {
        Some(e) => println!("P(init): estimate {e} (bounds [{}, {}])", r.lower, r.upper),
        None => println!("P(init): [{}, {}] (width {})", r.lower, r.upper, r.upper - r.lower),
    }
    println!("iterations: {}  explored: {}", r.iterations, r.explored_states);
    Ok(status_code(r.status))
}

fn experiment(opts: &ExperimentOpts) -> Result<i32, String> {
    let s = &opts.solve;
    let mdp = load_model(&s.model, s.goal_rule).map_err(|e| e.to_string())?;
    let (records, summary) = run_experiment(
        &s.model,
        &mdp,
        s.algorithm,
        &s.params(),
        s.seed,
        opts.repetitions,
    )
    .map_err(|e| e.to_string())?;
    write_or_print(&opts.output, &emit_csv(&records))?;
    eprintln!(
        "summary: status {}  median_time_ms {}  median_explored {}",
        summary.status, summary.median_time_ms, summary.median_explored
    );
    Ok(status_code(summary.status))
}

fn sweep(opts: &SweepOpts) -> Result<i32, String> {
    let s = &opts.solve;
    let mdp = load_model(&s.model, s.goal_rule).map_err(|e| e.to_string())?;
    let rows = sweep_constant(&mdp, s.algorithm, &s.params(), &opts.constants, s.seed, opts.seeds)
        .map_err(|e| e.to_string())?;
    write_or_print(&opts.output, &emit_sweep_csv(&rows))?;
    Ok(0)
}

fn generate(opts: &GenerateOpts) -> Result<i32, String> {
    let mdp = load_model(&opts.model, opts.goal_rule).map_err(|e| e.to_string())?;
    if !is_generator(&opts.model) && opts.output.is_none() {
        eprintln!("note: `{}` is a file; echoing its canonical form", opts.model);
    }
    write_or_print(&opts.output, &reachmc_core::format::serialize_model(&mdp))?;
    Ok(0)
}
