//! Monte Carlo tree search over the working model, in four flavours:
//! the plain unguaranteed estimator, a bounded variant whose tree walk
//! feeds the same certified interval machinery as the iterative
//! solvers, a hybrid that replaces the uniform rollout with optimistic
//! path sampling, and a treeless variant that picks actions by bandit
//! statistics during otherwise ordinary sampled episodes.
//!
//! The guaranteed variants stop when the interval at the initial state
//! is narrower than epsilon; the certificate comes from the Bellman
//! backups alone, the visit statistics only steer where they happen.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::Audit;
use crate::brtdp::{backup_path, sample_episode, EpisodeEnd, SuccessorRule};
use crate::model::{Mdp, Path, StateId};
use crate::solvers::{SolverResult, Status, Ticker};
use crate::working::WorkingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MctsVariant {
    /// Classic UCB tree with uniform rollouts; point estimate only, no
    /// error guarantee of any kind.
    Plain,
    /// UCB tree plus certified interval backups along tree and rollout
    /// paths (uniform rollouts).
    Bounded,
    /// UCB tree whose rollouts are optimistic sampled episodes.
    BrtdpRollout,
    /// No tree: per state-action bandit statistics choose the action
    /// inside sampled episodes.
    FlatUcb,
}

#[derive(Debug, Clone)]
pub struct MctsConfig {
    /// UCB exploration constant; large values explore, small exploit.
    pub exploration_constant: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub variant: MctsVariant,
    pub max_iterations: u64,
    pub timeout: Option<Duration>,
    /// Periodic end-component check, in iterations; cycle-suspect
    /// rollouts trigger one regardless. `0` disables the periodic one.
    pub mec_check_period: u64,
    /// Rollout step cap; `None` means `10 * states + 10_000`.
    pub step_cap: Option<usize>,
    /// Tree size guard: the tree is dropped and regrown past this.
    pub max_tree_nodes: usize,
    /// Successor sampling inside optimistic rollouts.
    pub successor_rule: SuccessorRule,
    pub audit: Option<Audit>,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            exploration_constant: 25.0,
            epsilon: 1e-6,
            seed: 0,
            variant: MctsVariant::Bounded,
            max_iterations: u64::MAX,
            timeout: None,
            mec_check_period: 1000,
            step_cap: None,
            max_tree_nodes: 500_000,
            successor_rule: SuccessorRule::WeightedByGap,
            audit: None,
        }
    }
}

/// One tree edge bundle: statistics of an action at a node plus the
/// child nodes materialized for its successors.
#[derive(Debug, Clone)]
struct Arm {
    tried: bool,
    visits: u64,
    sum: f64,
    children: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Node {
    state: StateId,
    visits: u64,
    arms: Vec<Arm>,
}

/// Flat bandit cell, keyed by input-model state-action pairs so the
/// statistics survive collapses untouched.
#[derive(Debug, Clone, Copy, Default)]
struct ArmStat {
    visits: u64,
    sum: f64,
}

pub struct Mcts<'a> {
    work: WorkingModel<'a>,
    cfg: MctsConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// Flat statistics, `[input state][input action]`.
    flat: Vec<Vec<ArmStat>>,
    path: Path,
    iterations: u64,
    outcome_sum: f64,
    /// Updates since the last deadline check.
    pending_ops: u64,
}

impl<'a> Mcts<'a> {
    pub fn new(mdp: &'a Mdp, cfg: MctsConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let work = WorkingModel::new(mdp, cfg.audit.clone());
        let root = new_node(work.cur(), work.init_cur());
        let flat = if cfg.variant == MctsVariant::FlatUcb {
            (0..mdp.num_states())
                .map(|s| vec![ArmStat::default(); mdp.actions(StateId(s)).len()])
                .collect()
        } else {
            Vec::new()
        };
        let path = Path::new(work.init_cur());
        Mcts { work, cfg, rng, nodes: vec![root], flat, path, iterations: 0, outcome_sum: 0.0, pending_ops: 0 }
    }

    pub fn bounds_at_init(&self) -> (f64, f64) {
        self.work.bounds_at_init()
    }

    pub fn explored(&self) -> usize {
        self.work.explored_count()
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Whether the tree has a node standing for the given input state.
    pub fn tree_contains(&self, s: StateId) -> bool {
        let c = self.work.cur_of(s);
        self.nodes.iter().any(|n| n.state == c)
    }

    /// One iteration: selection, expansion, rollout, backup, plus the
    /// collapse bookkeeping.
    pub fn iterate(&mut self) {
        let collapsed = if self.cfg.variant == MctsVariant::FlatUcb {
            self.flat_episode()
        } else {
            self.tree_iteration()
        };
        self.iterations += 1;
        let periodic = self.cfg.mec_check_period > 0
            && self.iterations % self.cfg.mec_check_period == 0;
        if (collapsed || periodic) && self.work.maybe_collapse() {
            self.rebuild_tree();
        } else if self.nodes.len() >= self.cfg.max_tree_nodes {
            self.rebuild_tree();
        }
    }

    fn rebuild_tree(&mut self) {
        self.nodes.clear();
        self.nodes.push(new_node(self.work.cur(), self.work.init_cur()));
    }

    fn step_cap(&self) -> usize {
        self.cfg.step_cap.unwrap_or(10 * self.work.cur().num_states() + 10_000)
    }

    /// Tree-based iteration; returns whether a collapse check is due.
    fn tree_iteration(&mut self) -> bool {
        let bounded = self.cfg.variant != MctsVariant::Plain;
        let cap = self.step_cap();
        let mut node_id = 0usize;
        let mut sel_nodes: Vec<usize> = vec![0];
        let mut sel_arms: Vec<(usize, usize)> = Vec::new();
        let mut ancestors: Vec<StateId> = vec![self.nodes[0].state];
        self.work.visit(self.nodes[0].state);

        // Selection and expansion: walk down until a terminal node, a
        // freshly expanded arm, or an arm with no in-tree children.
        let mut rollout_from: Option<StateId> = None;
        loop {
            let state = self.nodes[node_id].state;
            if self.work.cur().is_terminal(state) {
                break;
            }
            let arm_idx = match self.nodes[node_id].arms.iter().position(|a| !a.tried) {
                Some(a) => a,
                None => self.select_ucb(node_id),
            };
            let expanding = !self.nodes[node_id].arms[arm_idx].tried;
            if expanding {
                self.expand(node_id, arm_idx, &ancestors);
            }
            sel_arms.push((node_id, arm_idx));
            match self.sample_child(node_id, arm_idx) {
                Some(child) => {
                    node_id = child;
                    let cs = self.nodes[child].state;
                    self.work.visit(cs);
                    sel_nodes.push(child);
                    ancestors.push(cs);
                    if expanding {
                        break;
                    }
                }
                None => {
                    // All successors of this arm sit on the path above
                    // us; roll out from a fresh sample instead.
                    let s = self.nodes[node_id].state;
                    let next = sample_by_probability(self.work.cur(), s, arm_idx, &mut self.rng);
                    rollout_from = Some(next);
                    break;
                }
            }
        }

        // Rollout.
        let leaf_state = rollout_from.unwrap_or(self.nodes[node_id].state);
        let (outcome, cycle) = if self.work.cur().is_terminal(leaf_state) && rollout_from.is_none()
        {
            (if leaf_state == self.work.cur().goal() { 1.0 } else { 0.0 }, false)
        } else {
            self.rollout(leaf_state, cap, bounded)
        };

        // Backup: rollout path first (deeper), then the tree path.
        if bounded {
            for &(nid, _) in sel_arms.iter().rev() {
                let s = self.nodes[nid].state;
                self.work.bellman(s);
            }
        }
        for &(nid, aid) in sel_arms.iter().rev() {
            let arm = &mut self.nodes[nid].arms[aid];
            arm.visits += 1;
            arm.sum += outcome;
        }
        for &nid in &sel_nodes {
            self.nodes[nid].visits += 1;
        }
        self.outcome_sum += outcome;
        self.pending_ops += sel_arms.len() as u64 + 1;
        cycle
    }

    /// Rollout from `start`; backs the sampled path up when bounded.
    /// Returns 1 for goal and 0 otherwise, plus whether the walk bit
    /// its own tail (which makes a collapse check due).
    fn rollout(&mut self, start: StateId, cap: usize, bounded: bool) -> (f64, bool) {
        let end = match self.cfg.variant {
            MctsVariant::BrtdpRollout => sample_episode(
                &mut self.work,
                &mut self.rng,
                self.cfg.successor_rule,
                start,
                cap,
                &mut self.path,
            ),
            _ => self.uniform_walk(start, cap),
        };
        if bounded {
            backup_path(&mut self.work, &self.path);
        }
        self.pending_ops += self.path.len() as u64;
        let outcome = if end == EpisodeEnd::Terminal && self.path.last == self.work.cur().goal() {
            1.0
        } else {
            0.0
        };
        (outcome, end == EpisodeEnd::CycleSuspect)
    }

    /// Uniform random walk used by the plain and bounded variants;
    /// stops on terminals, revisits, or the cap, like the optimistic
    /// episodes do.
    fn uniform_walk(&mut self, start: StateId, cap: usize) -> EpisodeEnd {
        self.path.clear(start);
        self.work.begin_episode();
        let mut s = start;
        loop {
            self.work.visit(s);
            if self.work.cur().is_terminal(s) {
                return EpisodeEnd::Terminal;
            }
            if self.work.seen_this_episode(s) {
                return EpisodeEnd::CycleSuspect;
            }
            self.work.note_seen(s);
            if self.path.len() >= cap {
                return EpisodeEnd::CapHit;
            }
            let k = self.work.cur().actions(s).len();
            let a = self.rng.gen_range(0..k);
            let next = sample_by_probability(self.work.cur(), s, a, &mut self.rng);
            self.path.push(a, next);
            s = next;
        }
    }

    fn select_ucb(&mut self, node_id: usize) -> usize {
        let node = &self.nodes[node_id];
        let ln_n = (node.visits.max(1) as f64).ln();
        let c = self.cfg.exploration_constant;
        let mut best = f64::NEG_INFINITY;
        let mut ties = 0u32;
        let mut pick = 0usize;
        for (a, arm) in node.arms.iter().enumerate() {
            let score = if arm.visits == 0 {
                f64::INFINITY
            } else {
                arm.sum / arm.visits as f64 + c * (ln_n / arm.visits as f64).sqrt()
            };
            if score > best {
                best = score;
                ties = 1;
                pick = a;
            } else if score == best {
                ties += 1;
                if self.rng.gen_range(0..ties) == 0 {
                    pick = a;
                }
            }
        }
        pick
    }

    /// Materializes the arm's children: every distinct successor that
    /// is not already a state on the path from the root (keeping
    /// ancestors out bounds the tree on cyclic models).
    fn expand(&mut self, node_id: usize, arm_idx: usize, ancestors: &[StateId]) {
        let state = self.nodes[node_id].state;
        let succs: Vec<StateId> = self.work.cur().actions(state)[arm_idx]
            .distribution
            .entries()
            .iter()
            .map(|&(t, _)| t)
            .filter(|t| !ancestors.contains(t))
            .collect();
        let mut children = Vec::with_capacity(succs.len());
        for t in succs {
            self.work.visit(t);
            children.push(self.nodes.len());
            let n = new_node(self.work.cur(), t);
            self.nodes.push(n);
        }
        let arm = &mut self.nodes[node_id].arms[arm_idx];
        arm.children = children;
        arm.tried = true;
    }

    /// Samples among an arm's in-tree children proportionally to the
    /// transition probabilities, or `None` when it has none.
    fn sample_child(&mut self, node_id: usize, arm_idx: usize) -> Option<usize> {
        let state = self.nodes[node_id].state;
        let arm = &self.nodes[node_id].arms[arm_idx];
        if arm.children.is_empty() {
            return None;
        }
        if arm.children.len() == 1 {
            return Some(arm.children[0]);
        }
        let entries = self.work.cur().actions(state)[arm_idx].distribution.entries();
        let p_of = |child: usize| {
            let cs = self.nodes[child].state;
            entries.iter().find(|&&(t, _)| t == cs).map_or(0.0, |&(_, p)| p)
        };
        let total: f64 = arm.children.iter().map(|&ch| p_of(ch)).sum();
        let mut r = self.rng.gen::<f64>() * total;
        for &ch in &arm.children {
            r -= p_of(ch);
            if r < 0.0 {
                return Some(ch);
            }
        }
        arm.children.last().copied()
    }

    /// Treeless episode under flat UCB action selection; returns
    /// whether a collapse check is due.
    fn flat_episode(&mut self) -> bool {
        let cap = self.step_cap();
        let start = self.work.init_cur();
        self.path.clear(start);
        self.work.begin_episode();
        let mut s = start;
        let end = loop {
            self.work.visit(s);
            if self.work.cur().is_terminal(s) {
                break EpisodeEnd::Terminal;
            }
            if self.work.seen_this_episode(s) {
                break EpisodeEnd::CycleSuspect;
            }
            self.work.note_seen(s);
            if self.path.len() >= cap {
                break EpisodeEnd::CapHit;
            }
            let a = self.select_flat(s);
            let next = crate::brtdp::sample_successor(
                &self.work,
                &mut self.rng,
                s,
                a,
                self.cfg.successor_rule,
            );
            self.path.push(a, next);
            s = next;
        };
        let outcome =
            if end == EpisodeEnd::Terminal && s == self.work.cur().goal() { 1.0 } else { 0.0 };
        backup_path(&mut self.work, &self.path);
        for step in &self.path.steps {
            let origin = self.work.action_origin(step.state, step.action);
            let cell = &mut self.flat[origin.state.0][origin.action];
            cell.visits += 1;
            cell.sum += outcome;
        }
        self.outcome_sum += outcome;
        self.pending_ops += self.path.len() as u64 + 1;
        end == EpisodeEnd::CycleSuspect
    }

    fn select_flat(&mut self, s: StateId) -> usize {
        let k = self.work.cur().actions(s).len();
        let n: u64 = (0..k)
            .map(|a| {
                let o = self.work.action_origin(s, a);
                self.flat[o.state.0][o.action].visits
            })
            .sum();
        let ln_n = (n.max(1) as f64).ln();
        let c = self.cfg.exploration_constant;
        let mut best = f64::NEG_INFINITY;
        let mut ties = 0u32;
        let mut pick = 0usize;
        for a in 0..k {
            let o = self.work.action_origin(s, a);
            let cell = self.flat[o.state.0][o.action];
            let score = if cell.visits == 0 {
                f64::INFINITY
            } else {
                cell.sum / cell.visits as f64 + c * (ln_n / cell.visits as f64).sqrt()
            };
            if score > best {
                best = score;
                ties = 1;
                pick = a;
            } else if score == best {
                ties += 1;
                if self.rng.gen_range(0..ties) == 0 {
                    pick = a;
                }
            }
        }
        pick
    }

    pub fn run(mut self) -> SolverResult {
        let guaranteed = self.cfg.variant != MctsVariant::Plain;
        let mut ticker = Ticker::new(self.cfg.timeout);
        let status = loop {
            if guaranteed && self.work.gap_at_init() < self.cfg.epsilon {
                break Status::Converged;
            }
            if self.iterations >= self.cfg.max_iterations {
                break Status::BudgetExhausted;
            }
            if ticker.expired(self.pending_ops + 8) {
                break Status::Timeout;
            }
            self.pending_ops = 0;
            self.iterate();
        };
        let (lower, upper) = self.work.bounds_at_init();
        let estimate = if self.iterations > 0 {
            Some(self.outcome_sum / self.iterations as f64)
        } else {
            Some(if lower >= 1.0 { 1.0 } else { 0.0 })
        };
        SolverResult {
            lower,
            upper,
            iterations: self.iterations,
            explored_states: self.work.explored_count(),
            status,
            policy: if guaranteed { Some(self.work.finish_policy()) } else { None },
            estimate: if self.cfg.variant == MctsVariant::Plain { estimate } else { None },
        }
    }
}

fn new_node(cur: &Mdp, state: StateId) -> Node {
    let arms = (0..cur.actions(state).len())
        .map(|_| Arm { tried: false, visits: 0, sum: 0.0, children: Vec::new() })
        .collect();
    Node { state, visits: 0, arms }
}

fn sample_by_probability(cur: &Mdp, s: StateId, a: usize, rng: &mut ChaCha8Rng) -> StateId {
    let entries = cur.actions(s)[a].distribution.entries();
    if entries.len() == 1 {
        return entries[0].0;
    }
    let mut r = rng.gen::<f64>();
    for &(t, p) in entries {
        r -= p;
        if r < 0.0 {
            return t;
        }
    }
    entries[entries.len() - 1].0
}
