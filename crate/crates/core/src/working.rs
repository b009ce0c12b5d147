//! Shared runtime for the simulation-guided solvers. Owns the current
//! working model (the input model, progressively replaced by quotients
//! of its explored region), carries bounds across collapses, and keeps
//! all exploration accounting in terms of the input model's states.

use crate::bounds::{Audit, Bounds};
use crate::mec::{collapse_with, find_mecs};
use crate::model::{ActionRef, Mdp, Policy, StateId};

pub(crate) struct WorkingModel<'a> {
    orig: &'a Mdp,
    cur: Mdp,
    bounds: Bounds,
    /// Input state -> current state (composition of all collapses).
    to_cur: Vec<usize>,
    /// Current state -> the one input state that visiting it newly
    /// touches, if any. Members of collapsed components were all
    /// explored before the collapse (collapsing is restricted to the
    /// explored region), so at most one such state exists per cluster.
    mark: Vec<Option<StateId>>,
    /// Current state -> per action, the input state-action pair it
    /// descends from.
    action_orig: Vec<Vec<ActionRef>>,
    /// Explored flags on the current model (drives collapse scope).
    explored_cur: Vec<bool>,
    /// Explored flags and count on the input model (reported).
    explored: Vec<bool>,
    explored_count: usize,
    /// Explored count when components were last searched; collapsing
    /// is skipped until the explored set grows past it.
    checked_at: usize,
    /// Episode-local visit stamps; `stamp[s] == epoch` means seen in
    /// the current episode.
    stamp: Vec<u64>,
    epoch: u64,
}

impl<'a> WorkingModel<'a> {
    pub fn new(orig: &'a Mdp, audit: Option<Audit>) -> Self {
        let n = orig.num_states();
        let mut bounds = Bounds::new(orig);
        if let Some(audit) = audit {
            bounds.set_audit(audit);
        }
        WorkingModel {
            orig,
            cur: orig.clone(),
            bounds,
            to_cur: (0..n).collect(),
            mark: (0..n).map(|s| Some(StateId(s))).collect(),
            action_orig: (0..n)
                .map(|s| {
                    (0..orig.actions(StateId(s)).len())
                        .map(|a| ActionRef { state: StateId(s), action: a })
                        .collect()
                })
                .collect(),
            explored_cur: vec![false; n],
            explored: vec![false; n],
            explored_count: 0,
            checked_at: 0,
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    pub fn cur(&self) -> &Mdp {
        &self.cur
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn init_cur(&self) -> StateId {
        StateId(self.to_cur[self.orig.init().0])
    }

    /// Current-model state standing for an input state.
    pub fn cur_of(&self, orig: StateId) -> StateId {
        StateId(self.to_cur[orig.0])
    }

    /// Input state-action pair a current action descends from. Stable
    /// across collapses, so it can key statistics that must survive
    /// model replacement.
    pub fn action_origin(&self, s: StateId, a: usize) -> ActionRef {
        self.action_orig[s.0][a]
    }

    pub fn bounds_at_init(&self) -> (f64, f64) {
        let i = self.init_cur();
        (self.bounds.lower(i), self.bounds.upper(i))
    }

    pub fn gap_at_init(&self) -> f64 {
        self.bounds.gap(self.init_cur())
    }

    pub fn explored_count(&self) -> usize {
        self.explored_count
    }

    pub fn bellman(&mut self, s: StateId) -> (f64, f64) {
        self.bounds.bellman_update(&self.cur, s)
    }

    /// Marks a current-model state as touched.
    pub fn visit(&mut self, c: StateId) {
        self.explored_cur[c.0] = true;
        if let Some(o) = self.mark[c.0] {
            if !self.explored[o.0] {
                self.explored[o.0] = true;
                self.explored_count += 1;
            }
        }
    }

    pub fn begin_episode(&mut self) {
        self.epoch += 1;
    }

    pub fn seen_this_episode(&self, c: StateId) -> bool {
        self.stamp[c.0] == self.epoch
    }

    pub fn note_seen(&mut self, c: StateId) {
        self.stamp[c.0] = self.epoch;
    }

    /// Searches the explored region for end components and replaces the
    /// working model by its quotient when one exists. Memoized on the
    /// explored count: a set that has not grown since the last search
    /// cannot contain new components. Returns whether the model was
    /// replaced (tree-based solvers must then drop state indexed by it).
    pub fn maybe_collapse(&mut self) -> bool {
        if self.explored_count == self.checked_at {
            return false;
        }
        self.checked_at = self.explored_count;
        let decomp = find_mecs(&self.cur, Some(&self.explored_cur));
        if decomp.nontrivial(&self.cur).next().is_none() {
            return false;
        }
        let (qm, qb) = collapse_with(&self.cur, &decomp, &self.bounds);
        let qn = qm.quotient.num_states();
        for slot in self.to_cur.iter_mut() {
            *slot = qm.map[*slot].0;
        }
        let mut mark = vec![None; qn];
        for (c, m) in self.mark.iter().enumerate() {
            if let Some(o) = m {
                if !self.explored[o.0] {
                    mark[qm.map[c].0] = Some(*o);
                }
            }
        }
        let mut explored_cur = vec![false; qn];
        for (c, &e) in self.explored_cur.iter().enumerate() {
            if e {
                explored_cur[qm.map[c].0] = true;
            }
        }
        self.action_orig = qm
            .action_sources
            .iter()
            .map(|srcs| {
                srcs.iter().map(|r| self.action_orig[r.state.0][r.action]).collect()
            })
            .collect();
        self.cur = qm.quotient;
        self.bounds = qb;
        self.mark = mark;
        self.explored_cur = explored_cur;
        self.stamp = vec![0; qn];
        true
    }

    /// Greedy policy on the working model, translated back to the input
    /// model. Collapsed clusters route every member towards the owner
    /// of the chosen exit action via actions that stay inside the
    /// cluster (clusters of ordinary states are end components of the
    /// input model, so such routes exist and succeed almost surely).
    pub fn finish_policy(&self) -> Policy {
        let qpolicy = self.bounds.extract_policy(&self.cur);
        let n = self.orig.num_states();
        let mut choices = vec![0usize; n];
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); self.cur.num_states()];
        for (o, &q) in self.to_cur.iter().enumerate() {
            clusters[q].push(o);
        }
        for (q, members) in clusters.iter().enumerate() {
            let qs = StateId(q);
            if members.is_empty() || self.cur.is_terminal(qs) {
                continue;
            }
            let src = self.action_orig[q][qpolicy.choices[q]];
            choices[src.state.0] = src.action;
            if members.len() > 1 {
                route_cluster(self.orig, members, src.state, &mut choices);
            }
        }
        Policy { choices }
    }
}

/// Backward BFS from `target` inside `members`, following only actions
/// whose whole support stays in the cluster. Every reached member gets
/// the action that found it, which moves one BFS layer closer to the
/// target with positive probability while never leaving the cluster.
fn route_cluster(orig: &Mdp, members: &[usize], target: StateId, choices: &mut [usize]) {
    let in_cluster = |s: StateId| members.binary_search(&s.0).is_ok();
    let pos = |s: usize| members.binary_search(&s).expect("member");
    let mut reached = vec![false; members.len()];
    reached[pos(target.0)] = true;
    let mut frontier = vec![target.0];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &m in members {
            if reached[pos(m)] {
                continue;
            }
            'actions: for (a, action) in orig.actions(StateId(m)).iter().enumerate() {
                let mut hits_frontier = false;
                for &(t, _) in action.distribution.entries() {
                    if !in_cluster(t) {
                        continue 'actions;
                    }
                    if frontier.contains(&t.0) {
                        hits_frontier = true;
                    }
                }
                if hits_frontier {
                    reached[pos(m)] = true;
                    choices[m] = a;
                    next.push(m);
                    break;
                }
            }
        }
        frontier = next;
    }
}
