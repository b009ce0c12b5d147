//! Bounded real-time dynamic programming: sample a path under the
//! optimistic policy (highest upper bound wins), back the bounds up
//! along the path in reverse, and collapse end components of the
//! explored region whenever a sampled path bites its own tail. The
//! interval at the initial state is sound at every point in time, so
//! stopping at width epsilon certifies the answer.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::Audit;
use crate::model::{Mdp, Path, StateId};
use crate::solvers::{SolverResult, Status, Ticker};
use crate::working::WorkingModel;

/// How a sampled episode picks among the successors of the chosen
/// action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuccessorRule {
    /// Weight each successor by transition probability times its
    /// current bound gap, falling back to plain probabilities when the
    /// whole support is already tight. Steers work towards undecided
    /// states.
    WeightedByGap,
    /// Plain transition probabilities.
    ByTransitionProbability,
}

/// Knobs shared by the path-sampling solvers.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Stop once the interval at the initial state is narrower.
    pub epsilon: f64,
    /// Episode step cap; `None` means `10 * states + 10_000` on the
    /// current working model.
    pub max_episode_length: Option<usize>,
    /// Also look for end components every this many episodes, besides
    /// the cycle-triggered checks. `0` disables the periodic check.
    pub mec_check_period: u64,
    pub seed: u64,
    pub successor_rule: SuccessorRule,
    pub max_episodes: u64,
    pub timeout: Option<Duration>,
    /// Optional per-update soundness check against known exact values.
    pub audit: Option<Audit>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            epsilon: 1e-6,
            max_episode_length: None,
            mec_check_period: 1000,
            seed: 0,
            successor_rule: SuccessorRule::WeightedByGap,
            max_episodes: u64::MAX,
            timeout: None,
            audit: None,
        }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    /// Reached goal or sink.
    Terminal,
    /// Revisited a state within the same episode; the path may be
    /// stuck in an end component, so a collapse check follows.
    CycleSuspect,
    /// Hit the step cap.
    CapHit,
}

pub struct Brtdp<'a> {
    work: WorkingModel<'a>,
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
    path: Path,
    episodes: u64,
}

impl<'a> Brtdp<'a> {
    pub fn new(mdp: &'a Mdp, cfg: SamplerConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let work = WorkingModel::new(mdp, cfg.audit.clone());
        let path = Path::new(work.init_cur());
        Brtdp { work, cfg, rng, path, episodes: 0 }
    }

    pub fn bounds_at_init(&self) -> (f64, f64) {
        self.work.bounds_at_init()
    }

    pub fn explored(&self) -> usize {
        self.work.explored_count()
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// One sampled episode with its backups and collapse checks.
    pub fn episode(&mut self) -> EpisodeEnd {
        let cap = self
            .cfg
            .max_episode_length
            .unwrap_or(10 * self.work.cur().num_states() + 10_000);
        let start = self.work.init_cur();
        let end = sample_episode(
            &mut self.work,
            &mut self.rng,
            self.cfg.successor_rule,
            start,
            cap,
            &mut self.path,
        );
        backup_path(&mut self.work, &self.path);
        self.episodes += 1;
        let periodic = self.cfg.mec_check_period > 0
            && self.episodes % self.cfg.mec_check_period == 0;
        if end == EpisodeEnd::CycleSuspect || periodic {
            self.work.maybe_collapse();
        }
        end
    }

    pub fn run(mut self) -> SolverResult {
        let mut ticker = Ticker::new(self.cfg.timeout);
        let status = loop {
            if self.work.gap_at_init() < self.cfg.epsilon {
                break Status::Converged;
            }
            if self.episodes >= self.cfg.max_episodes {
                break Status::BudgetExhausted;
            }
            if ticker.expired(self.path.len() as u64 + 8) {
                break Status::Timeout;
            }
            self.episode();
        };
        let (lower, upper) = self.work.bounds_at_init();
        SolverResult {
            lower,
            upper,
            iterations: self.episodes,
            explored_states: self.work.explored_count(),
            status,
            policy: Some(self.work.finish_policy()),
            estimate: None,
        }
    }
}

/// Samples one path from `start`: pick the action with the highest
/// upper bound (ties uniform), then a successor per `rule`; stop on a
/// terminal, a within-episode revisit, or the step cap.
pub(crate) fn sample_episode(
    work: &mut WorkingModel,
    rng: &mut ChaCha8Rng,
    rule: SuccessorRule,
    start: StateId,
    cap: usize,
    path: &mut Path,
) -> EpisodeEnd {
    path.clear(start);
    work.begin_episode();
    let mut s = start;
    loop {
        work.visit(s);
        if work.cur().is_terminal(s) {
            return EpisodeEnd::Terminal;
        }
        if work.seen_this_episode(s) {
            return EpisodeEnd::CycleSuspect;
        }
        work.note_seen(s);
        if path.len() >= cap {
            return EpisodeEnd::CapHit;
        }
        let a = optimistic_action(work, rng, s);
        let next = sample_successor(work, rng, s, a, rule);
        path.push(a, next);
        s = next;
    }
}

/// Reverse-order Bellman backups over the states of a sampled path.
pub(crate) fn backup_path(work: &mut WorkingModel, path: &Path) {
    for step in path.steps.iter().rev() {
        work.bellman(step.state);
    }
}

fn optimistic_action(work: &WorkingModel, rng: &mut ChaCha8Rng, s: StateId) -> usize {
    let bounds = work.bounds();
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0u32;
    let mut pick = 0usize;
    for a in 0..work.cur().actions(s).len() {
        let u = bounds.pair(s, a).1;
        if u > best {
            best = u;
            ties = 1;
            pick = a;
        } else if u == best {
            // Reservoir draw keeps the tie-break uniform in one pass.
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                pick = a;
            }
        }
    }
    pick
}

pub(crate) fn sample_successor(
    work: &WorkingModel,
    rng: &mut ChaCha8Rng,
    s: StateId,
    a: usize,
    rule: SuccessorRule,
) -> StateId {
    let entries = work.cur().actions(s)[a].distribution.entries();
    if entries.len() == 1 {
        return entries[0].0;
    }
    let bounds = work.bounds();
    let weight = |&(t, p): &(StateId, f64)| match rule {
        SuccessorRule::ByTransitionProbability => p,
        SuccessorRule::WeightedByGap => p * bounds.gap(t),
    };
    let total: f64 = entries.iter().map(weight).sum();
    if total <= 0.0 {
        // Whole support already tight; fall back to the distribution.
        return roulette(entries, rng, |&(_, p)| p, 1.0);
    }
    roulette(entries, rng, weight, total)
}

fn roulette<F: Fn(&(StateId, f64)) -> f64>(
    entries: &[(StateId, f64)],
    rng: &mut ChaCha8Rng,
    weight: F,
    total: f64,
) -> StateId {
    let mut r = rng.gen::<f64>() * total;
    for e in entries {
        r -= weight(e);
        if r < 0.0 {
            return e.0;
        }
    }
    entries[entries.len() - 1].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::{gen_adversary, gen_random_mdp, gen_upper_trap, AdversaryParams};
    use crate::oracle::{exact_oracle, policy_value};

    fn cfg(seed: u64) -> SamplerConfig {
        SamplerConfig { seed, ..SamplerConfig::default() }
    }

    #[test]
    fn converges_on_leaky_random_model() {
        let m = gen_random_mdp(30, 3, 4, 0.0, 5);
        let v = exact_oracle(&m).unwrap()[m.init().0];
        let r = Brtdp::new(&m, cfg(1)).run();
        assert_eq!(r.status, Status::Converged);
        assert!(r.upper - r.lower < 1e-6);
        assert!(r.lower <= v + 1e-9 && v <= r.upper + 1e-9, "{v} in [{}, {}]", r.lower, r.upper);
        let induced = policy_value(&m, r.policy.as_ref().unwrap()).unwrap();
        assert!(induced[m.init().0] >= r.lower - 1e-9);
    }

    #[test]
    fn collapses_through_the_trap() {
        let m = gen_upper_trap();
        let r = Brtdp::new(&m, cfg(3)).run();
        assert_eq!(r.status, Status::Converged);
        assert!(r.lower <= 0.5 && 0.5 <= r.upper);
        assert!(r.upper - r.lower < 1e-6);
        // One terminal visit after the collapse suffices, so the other
        // terminal may legitimately stay unexplored.
        assert!(r.explored_states >= 3, "explored {}", r.explored_states);
        let induced = policy_value(&m, r.policy.as_ref().unwrap()).unwrap();
        assert_eq!(induced[0], 0.5);
    }

    #[test]
    fn unreachable_sink_keeps_upper_at_one() {
        let m = gen_adversary(&AdversaryParams { segments: 2, advance_probability: 0.5 });
        let mut c = cfg(7);
        c.epsilon = 1e-3;
        let r = Brtdp::new(&m, c).run();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.upper, 1.0, "no sink mass anywhere, so U never leaves 1");
        assert!(r.lower > 1.0 - 1e-3);
    }

    #[test]
    fn respects_episode_budget() {
        let m = gen_adversary(&AdversaryParams { segments: 3, advance_probability: 0.01 });
        let mut c = cfg(0);
        c.max_episodes = 50;
        let r = Brtdp::new(&m, c).run();
        assert_eq!(r.status, Status::BudgetExhausted);
        assert_eq!(r.iterations, 50);
        assert!(r.lower < 1.0 && r.upper == 1.0);
    }

    #[test]
    fn respects_timeout() {
        let m = gen_adversary(&AdversaryParams { segments: 5, advance_probability: 0.01 });
        let mut c = cfg(0);
        c.timeout = Some(Duration::from_millis(200));
        let t0 = std::time::Instant::now();
        let r = Brtdp::new(&m, c).run();
        assert_eq!(r.status, Status::Timeout);
        assert!(t0.elapsed() < Duration::from_secs(5));
        assert!(r.lower < 1.0);
    }

    #[test]
    fn probability_rule_reaches_the_same_interval() {
        let m = gen_random_mdp(25, 2, 3, 0.2, 9);
        let v = exact_oracle(&m).unwrap()[m.init().0];
        let mut c = cfg(2);
        c.successor_rule = SuccessorRule::ByTransitionProbability;
        let r = Brtdp::new(&m, c).run();
        assert_eq!(r.status, Status::Converged);
        assert!(r.lower <= v + 1e-9 && v <= r.upper + 1e-9);
    }

    #[test]
    fn runs_are_reproducible() {
        let m = gen_random_mdp(20, 3, 3, 0.2, 4);
        let a = Brtdp::new(&m, cfg(11)).run();
        let b = Brtdp::new(&m, cfg(11)).run();
        assert_eq!((a.lower, a.upper, a.iterations, a.explored_states), (
            b.lower,
            b.upper,
            b.iterations,
            b.explored_states
        ));
    }

    #[test]
    fn episode_reports_cap_hits() {
        let m = crate::format::parse_model(
            "states 8\ninit 0\ngoal 6\nsink 7\n\
             action 0 f 1:1\naction 1 f 2:1\naction 2 f 3:1\n\
             action 3 f 4:1\naction 4 f 5:1\naction 5 f 6:1\n",
        )
        .unwrap();
        let mut c = cfg(0);
        c.max_episode_length = Some(3);
        let mut b = Brtdp::new(&m, c);
        assert_eq!(b.episode(), EpisodeEnd::CapHit);
        assert_eq!(b.explored(), 4, "start plus three steps");
    }

    #[test]
    #[should_panic(expected = "bound soundness")]
    fn audit_catches_corrupt_reference() {
        let m = gen_upper_trap();
        let mut c = cfg(0);
        // Claim the value is zero everywhere; the first real backup at
        // the initial state must trip the audit.
        c.audit = Some(Audit { reference: vec![0.0; 4], slack: 1e-12 });
        let mut b = Brtdp::new(&m, c);
        for _ in 0..64 {
            b.episode();
        }
    }
}
