//! Maximal end component analysis, quotient construction, and
//! on-the-fly collapsing of end components discovered in a partially
//! explored model.
//!
//! An end component is a set of states plus, for every member, a
//! non-empty set of its actions whose supports stay inside the set,
//! such that the induced graph is strongly connected. All states of an
//! end component share the same maximum reachability value, which is
//! what makes collapsing them into one representative value-preserving.
//! Upper bounds computed by Bellman updates stall at 1 on end
//! components that cannot reach the goal, so collapsing is also what
//! makes certified upper bounds converge at all.

use crate::bounds::{Audit, Bounds};
use crate::model::{Action, ActionRef, Distribution, Mdp, Policy, StateId};

/// One maximal end component: member states and the member actions
/// whose support stays inside. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mec {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionRef>,
}

impl Mec {
    pub fn is_singleton_of(&self, s: StateId) -> bool {
        self.states.len() == 1 && self.states[0] == s
    }
}

#[derive(Debug, Clone)]
pub struct MecDecomposition {
    /// Sorted by smallest member state.
    pub mecs: Vec<Mec>,
    /// For each state of the analysed model, the index into `mecs` it
    /// belongs to, if any.
    pub mec_of: Vec<Option<usize>>,
}

impl MecDecomposition {
    /// End components other than the goal and sink self-loops.
    pub fn nontrivial<'a>(&'a self, mdp: &'a Mdp) -> impl Iterator<Item = &'a Mec> {
        self.mecs
            .iter()
            .filter(|m| !m.is_singleton_of(mdp.goal()) && !m.is_singleton_of(mdp.sink()))
    }
}

/// Computes all maximal end components, optionally restricted to a
/// state subset. Under restriction, only actions whose full support
/// lies inside the subset participate; end components of that
/// restricted sub-MDP are genuine end components of the full model.
///
/// Iterated SCC refinement: compute SCCs, drop actions that leave
/// their component, drop states left without actions, repeat until
/// stable.
pub fn find_mecs(mdp: &Mdp, restricted_to: Option<&[bool]>) -> MecDecomposition {
    let n = mdp.num_states();
    let mut alive: Vec<bool> = match restricted_to {
        Some(r) => {
            assert_eq!(r.len(), n);
            r.to_vec()
        }
        None => vec![true; n],
    };
    let mut allowed: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            let sid = StateId(s);
            mdp.actions(sid)
                .iter()
                .map(|a| {
                    alive[s]
                        && a.distribution
                            .entries()
                            .iter()
                            .all(|&(t, _)| alive[t.0])
                })
                .collect()
        })
        .collect();
    // States whose every action leaves the restriction drop out before
    // the first SCC pass; cascades are handled by the main loop.
    for s in 0..n {
        if alive[s] && allowed[s].iter().all(|&x| !x) {
            alive[s] = false;
        }
    }

    let mut comp = vec![usize::MAX; n];
    loop {
        sccs(mdp, &alive, &allowed, &mut comp);
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let sid = StateId(s);
            for (a, action) in mdp.actions(sid).iter().enumerate() {
                if !allowed[s][a] {
                    continue;
                }
                let leaves = action
                    .distribution
                    .entries()
                    .iter()
                    .any(|&(t, _)| !alive[t.0] || comp[t.0] != comp[s]);
                if leaves {
                    allowed[s][a] = false;
                    changed = true;
                }
            }
            if allowed[s].iter().all(|&x| !x) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Group surviving states by component; each group is one MEC.
    let mut order: Vec<usize> = (0..n).filter(|&s| alive[s]).collect();
    order.sort_by_key(|&s| (comp[s], s));
    let mut mecs: Vec<Mec> = Vec::new();
    let mut mec_of = vec![None; n];
    let mut i = 0;
    while i < order.len() {
        let c = comp[order[i]];
        let mut states = Vec::new();
        let mut actions = Vec::new();
        while i < order.len() && comp[order[i]] == c {
            let s = order[i];
            states.push(StateId(s));
            for (a, &ok) in allowed[s].iter().enumerate() {
                if ok {
                    actions.push(ActionRef { state: StateId(s), action: a });
                }
            }
            i += 1;
        }
        mecs.push(Mec { states, actions });
    }
    mecs.sort_by_key(|m| m.states[0]);
    for (idx, m) in mecs.iter().enumerate() {
        for &s in &m.states {
            mec_of[s.0] = Some(idx);
        }
    }
    MecDecomposition { mecs, mec_of }
}

/// Iterative Tarjan over the graph induced by `allowed` actions among
/// `alive` states. Writes component ids into `comp` (stale for dead
/// states).
fn sccs(mdp: &Mdp, alive: &[bool], allowed: &[Vec<bool>], comp: &mut [usize]) {
    let n = mdp.num_states();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        if !alive[s] {
            continue;
        }
        for (a, action) in mdp.actions(StateId(s)).iter().enumerate() {
            if allowed[s][a] {
                for &(t, _) in action.distribution.entries() {
                    adj[s].push(t.0);
                }
            }
        }
        adj[s].sort_unstable();
        adj[s].dedup();
    }

    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    // (state, next child position) frames replacing recursion.
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0usize;
    let mut next_comp = 0usize;

    for root in 0..n {
        if !alive[root] || index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        while !call.is_empty() {
            enum Step {
                Recurse(usize),
                Done(usize),
            }
            let step = {
                let top = call.last_mut().expect("nonempty");
                let v = top.0;
                if top.1 == 0 {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                }
                let mut step = Step::Done(v);
                while top.1 < adj[v].len() {
                    let w = adj[v][top.1];
                    top.1 += 1;
                    if index[w] == UNSET {
                        step = Step::Recurse(w);
                        break;
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                }
                step
            };
            match step {
                Step::Recurse(w) => call.push((w, 0)),
                Step::Done(v) => {
                    call.pop();
                    if let Some(top) = call.last() {
                        let parent = top.0;
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp[w] = next_comp;
                            if w == v {
                                break;
                            }
                        }
                        next_comp += 1;
                    }
                }
            }
        }
    }
}

/// Result of collapsing end components: the quotient model plus enough
/// bookkeeping to translate states, actions and bounds between the two.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    pub quotient: Mdp,
    /// Original state -> quotient state.
    pub map: Vec<StateId>,
    /// Quotient state -> one original state it stands for (the smallest
    /// member for collapsed components, the state itself otherwise).
    pub representatives: Vec<StateId>,
    /// Quotient state -> per quotient action, the original state-action
    /// pair it was inherited from.
    pub action_sources: Vec<Vec<ActionRef>>,
}

impl QuotientMap {
    /// Translates a policy on the quotient into one on the original
    /// model. For a collapsed component the chosen quotient action
    /// belongs to one member; every other member is routed towards that
    /// member through component-internal actions (which reach it with
    /// probability 1), so the lifted policy attains the same value.
    pub fn lift_policy(&self, original: &Mdp, qpolicy: &Policy) -> Policy {
        let n = original.num_states();
        let mut choices = vec![0usize; n];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.quotient.num_states()];
        for s in 0..n {
            members[self.map[s].0].push(s);
        }
        for q in 0..self.quotient.num_states() {
            let qs = StateId(q);
            if self.quotient.is_terminal(qs) {
                // Absorbing in the quotient: value 1 or 0 regardless of
                // the members' choices; leave the default.
                continue;
            }
            let src = self.action_sources[q][qpolicy.choices[q]];
            choices[src.state.0] = src.action;
            if members[q].len() <= 1 {
                continue;
            }
            // Backward BFS from the chosen member over internal
            // actions; internal = member actions not kept as quotient
            // actions. Strong connectivity guarantees full coverage.
            let kept = &self.action_sources[q];
            let mut done: Vec<usize> = vec![src.state.0];
            let mut frontier: Vec<usize> = vec![src.state.0];
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for &m in &members[q] {
                    if done.contains(&m) {
                        continue;
                    }
                    let found = original.actions(StateId(m)).iter().enumerate().find(|(a, act)| {
                        !kept.contains(&ActionRef { state: StateId(m), action: *a })
                            && act
                                .distribution
                                .entries()
                                .iter()
                                .any(|(t, _)| frontier.contains(&t.0))
                    });
                    if let Some((a, _)) = found {
                        choices[m] = a;
                        done.push(m);
                        next.push(m);
                    }
                }
                frontier = next;
            }
            debug_assert_eq!(done.len(), members[q].len(), "component not covered");
        }
        Policy { choices }
    }
}

/// Builds the quotient of `mdp` under `decomp`.
///
/// * the component containing the goal becomes the quotient goal,
///   likewise for the sink;
/// * every other component becomes a single representative state that
///   keeps exactly the members' actions leaving the component, with
///   labels qualified as `<original state>.<label>`;
/// * a component with no leaving actions cannot reach the goal, so it
///   is merged into the sink;
/// * states outside any component carry over unchanged.
pub fn build_quotient(mdp: &Mdp, decomp: &MecDecomposition) -> QuotientMap {
    let n = mdp.num_states();
    let goal_mec = decomp.mec_of[mdp.goal().0];
    let sink_mec = decomp.mec_of[mdp.sink().0];

    // External actions per component (member actions leaving it); a
    // component without any merges into the sink.
    let mut mec_external: Vec<Vec<ActionRef>> = vec![Vec::new(); decomp.mecs.len()];
    for (idx, mec) in decomp.mecs.iter().enumerate() {
        for &s in &mec.states {
            for a in 0..mdp.actions(s).len() {
                let r = ActionRef { state: s, action: a };
                if !mec.actions.contains(&r) {
                    mec_external[idx].push(r);
                }
            }
        }
    }

    // Cluster of each original state: the sink cluster swallows the
    // sink itself, its component, and every dead component.
    #[derive(Clone, Copy, PartialEq)]
    enum Cluster {
        Sink,
        Carried(usize),
        Component(usize),
    }
    let cluster_of = |s: usize| -> Cluster {
        if s == mdp.sink().0 {
            return Cluster::Sink;
        }
        match decomp.mec_of[s] {
            None => Cluster::Carried(s),
            Some(m) => {
                if Some(m) == sink_mec || (Some(m) != goal_mec && mec_external[m].is_empty()) {
                    Cluster::Sink
                } else {
                    Cluster::Component(m)
                }
            }
        }
    };

    const PENDING: usize = usize::MAX;
    let mut map = vec![StateId(PENDING); n];
    let mut mec_qid = vec![PENDING; decomp.mecs.len()];
    let mut sink_qid = PENDING;
    let mut representatives: Vec<StateId> = Vec::new();
    let mut next = 0usize;
    for s in 0..n {
        match cluster_of(s) {
            Cluster::Carried(_) => {
                map[s] = StateId(next);
                representatives.push(StateId(s));
                next += 1;
            }
            Cluster::Sink => {
                if sink_qid == PENDING {
                    sink_qid = next;
                    representatives.push(mdp.sink());
                    next += 1;
                }
                map[s] = StateId(sink_qid);
            }
            Cluster::Component(m) => {
                if mec_qid[m] == PENDING {
                    mec_qid[m] = next;
                    representatives.push(decomp.mecs[m].states[0]);
                    next += 1;
                }
                map[s] = StateId(mec_qid[m]);
            }
        }
    }

    let q_goal = map[mdp.goal().0];
    let q_sink = StateId(sink_qid);
    let q_init = map[mdp.init().0];

    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); next];
    let mut action_sources: Vec<Vec<ActionRef>> = vec![Vec::new(); next];
    {
        let mut push_action = |q: StateId, label: String, src: ActionRef| {
            // Remap successors and merge entries that now coincide.
            let dist = mdp.action(src).distribution.entries();
            let mut entries: Vec<(StateId, f64)> = Vec::with_capacity(dist.len());
            for &(t, p) in dist {
                let qt = map[t.0];
                match entries.iter_mut().find(|(e, _)| *e == qt) {
                    Some((_, mass)) => *mass += p,
                    None => entries.push((qt, p)),
                }
            }
            actions[q.0].push(Action { label, distribution: Distribution::new(entries) });
            action_sources[q.0].push(src);
        };

        for s in 0..n {
            let sid = StateId(s);
            let q = map[s];
            if q == q_goal || q == q_sink {
                continue;
            }
            match decomp.mec_of[s] {
                None => {
                    for (a, action) in mdp.actions(sid).iter().enumerate() {
                        push_action(q, action.label.clone(), ActionRef { state: sid, action: a });
                    }
                }
                Some(m) => {
                    // Emit the component's leaving actions once, when
                    // its first member comes up.
                    if decomp.mecs[m].states[0] != sid {
                        continue;
                    }
                    for &r in &mec_external[m] {
                        push_action(q, format!("{}.{}", r.state, mdp.action(r).label), r);
                    }
                }
            }
        }
    }
    for (q, orig) in [(q_goal, mdp.goal()), (q_sink, mdp.sink())] {
        actions[q.0].push(Action { label: "loop".into(), distribution: Distribution::dirac(q) });
        action_sources[q.0].push(ActionRef { state: orig, action: 0 });
    }

    let quotient = Mdp::from_parts(actions, q_init, q_goal, q_sink);
    QuotientMap { quotient, map, representatives, action_sources }
}

/// Finds end components restricted to `explored`, collapses them, and
/// transfers bounds onto the quotient.
///
/// Pair bounds carry over verbatim from the original pair each quotient
/// action was inherited from; that keeps every per-pair invariant
/// intact because collapsing preserves the Q-value of every surviving
/// pair. State values are recomputed from the transferred pairs. An
/// attached audit is remapped through the representatives.
pub fn collapse_explored(mdp: &Mdp, explored: &[bool], bounds: &Bounds) -> (QuotientMap, Bounds) {
    let decomp = find_mecs(mdp, Some(explored));
    collapse_with(mdp, &decomp, bounds)
}

/// [`collapse_explored`] for callers that already hold the
/// decomposition (to first check whether collapsing is worth it).
pub(crate) fn collapse_with(
    mdp: &Mdp,
    decomp: &MecDecomposition,
    bounds: &Bounds,
) -> (QuotientMap, Bounds) {
    let qm = build_quotient(mdp, decomp);
    let mut qb = Bounds::new(&qm.quotient);
    for q in 0..qm.quotient.num_states() {
        let qs = StateId(q);
        if qm.quotient.is_terminal(qs) {
            continue;
        }
        for (a, &src) in qm.action_sources[q].iter().enumerate() {
            qb.set_pair_raw(qs, a, bounds.pair(src.state, src.action));
        }
        qb.recompute_state(qs);
    }
    if let Some(audit) = bounds.audit() {
        let reference = qm
            .representatives
            .iter()
            .map(|r| audit.reference[r.0])
            .collect();
        qb.set_audit(Audit { reference, slack: audit.slack });
    }
    (qm, qb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_model;

    /// Two-state controllable loop with a coin-flip exit.
    fn looper() -> Mdp {
        parse_model(
            "states 4\ninit 0\ngoal 2\nsink 3\n\
             action 0 stay 1:1\n\
             action 0 exit 2:0.5 3:0.5\n\
             action 1 back 0:1\n",
        )
        .unwrap()
    }

    #[test]
    fn finds_loop_goal_and_sink_components() {
        let m = looper();
        let d = find_mecs(&m, None);
        assert_eq!(d.mecs.len(), 3);
        let loop_mec = &d.mecs[0];
        assert_eq!(loop_mec.states, vec![StateId(0), StateId(1)]);
        // `exit` leaves the component, `stay`/`back` remain.
        assert_eq!(
            loop_mec.actions,
            vec![
                ActionRef { state: StateId(0), action: 0 },
                ActionRef { state: StateId(1), action: 0 },
            ]
        );
        assert!(d.mecs[1].is_singleton_of(m.goal()));
        assert!(d.mecs[2].is_singleton_of(m.sink()));
        assert_eq!(d.nontrivial(&m).count(), 1);
    }

    #[test]
    fn chain_has_no_nontrivial_components() {
        let m = parse_model(
            "states 4\ninit 0\ngoal 2\nsink 3\naction 0 a 1:1\naction 1 a 2:0.5 3:0.5\n",
        )
        .unwrap();
        let d = find_mecs(&m, None);
        assert_eq!(d.nontrivial(&m).count(), 0);
        assert_eq!(d.mecs.len(), 2);
    }

    #[test]
    fn restriction_excludes_actions_leaving_the_set() {
        let m = looper();
        // Only the loop states are explored: both loop actions stay in.
        let d = find_mecs(&m, Some(&[true, true, false, false]));
        assert_eq!(d.mecs.len(), 1);
        assert_eq!(d.mecs[0].states, vec![StateId(0), StateId(1)]);
        // Restrict to just state 0: `stay` leaves, no component.
        let d = find_mecs(&m, Some(&[true, false, false, false]));
        assert!(d.mecs.is_empty());
    }

    #[test]
    fn quotient_collapses_loop_to_representative() {
        let m = looper();
        let d = find_mecs(&m, None);
        let qm = build_quotient(&m, &d);
        // {0,1} -> rep, goal, sink.
        assert_eq!(qm.quotient.num_states(), 3);
        assert_eq!(qm.map[0], qm.map[1]);
        let rep = qm.map[0];
        assert_eq!(qm.representatives[rep.0], StateId(0));
        let acts = qm.quotient.actions(rep);
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].label, "0.exit");
        assert_eq!(qm.quotient.init(), rep);
        // No end components left besides goal and sink.
        let dq = find_mecs(&qm.quotient, None);
        assert_eq!(dq.nontrivial(&qm.quotient).count(), 0);
    }

    #[test]
    fn closed_component_merges_into_sink() {
        // States 1,2 loop with no way out; value 0.
        let m = parse_model(
            "states 5\ninit 0\ngoal 3\nsink 4\n\
             action 0 a 1:0.5 3:0.5\n\
             action 1 go 2:1\naction 2 back 1:1\n",
        )
        .unwrap();
        let d = find_mecs(&m, None);
        let qm = build_quotient(&m, &d);
        assert_eq!(qm.map[1], qm.quotient.sink());
        assert_eq!(qm.map[2], qm.quotient.sink());
        assert_eq!(qm.map[4], qm.quotient.sink());
        assert_eq!(qm.quotient.num_states(), 3);
    }

    #[test]
    fn quotient_merges_duplicate_successors() {
        // Action from 0 splits mass between both loop states; in the
        // quotient the entries merge into a single successor.
        let m = parse_model(
            "states 5\ninit 0\ngoal 3\nsink 4\n\
             action 0 a 1:0.25 2:0.25 3:0.5\n\
             action 1 go 2:1\naction 2 back 1:1\naction 1 out 4:1\n",
        )
        .unwrap();
        let d = find_mecs(&m, None);
        let qm = build_quotient(&m, &d);
        let a0 = &qm.quotient.actions(qm.map[0])[0];
        let rep = qm.map[1];
        assert_eq!(a0.distribution.probability_of(rep), 0.5);
        assert_eq!(a0.distribution.entries().len(), 2);
    }

    #[test]
    fn collapse_transfers_pair_bounds_verbatim() {
        let m = looper();
        let mut b = Bounds::new(&m);
        // Tighten the exit action a bit first.
        b.bellman_update(&m, StateId(0));
        let exit_pair = b.pair(StateId(0), 1);
        assert_eq!(exit_pair, (0.5, 0.5));
        let explored = vec![true; 4];
        let (qm, qb) = collapse_explored(&m, &explored, &b);
        let rep = qm.map[0];
        assert_eq!(qb.pair(rep, 0), exit_pair);
        assert_eq!((qb.lower(rep), qb.upper(rep)), (0.5, 0.5));
    }

    #[test]
    fn collapse_with_unexplored_sink_carries_it() {
        let m = looper();
        let b = Bounds::new(&m);
        // Loop explored, goal and sink untouched.
        let (qm, _) = collapse_explored(&m, &[true, true, false, false], &b);
        assert_eq!(qm.quotient.num_states(), 3);
        assert_eq!(qm.map[0], qm.map[1]);
        assert_ne!(qm.quotient.goal(), qm.quotient.sink());
        // The carried sink keeps its identity and pinning.
        assert_eq!(qm.representatives[qm.quotient.sink().0], m.sink());
    }

    /// Brute force reference: enumerate all state subsets, keep end
    /// components, filter maximal ones.
    fn brute_force_mecs(mdp: &Mdp) -> Vec<Vec<StateId>> {
        let n = mdp.num_states();
        assert!(n <= 12);
        let mut ecs: Vec<u32> = Vec::new();
        'subset: for mask in 1u32..(1 << n) {
            let inside = |s: StateId| mask & (1 << s.0) != 0;
            // Every member needs an action staying inside.
            let mut adj = vec![Vec::new(); n];
            for s in 0..n {
                if !inside(StateId(s)) {
                    continue;
                }
                let mut has = false;
                for a in mdp.actions(StateId(s)) {
                    if a.distribution.entries().iter().all(|&(t, _)| inside(t)) {
                        has = true;
                        for &(t, _) in a.distribution.entries() {
                            adj[s].push(t.0);
                        }
                    }
                }
                if !has {
                    continue 'subset;
                }
            }
            // Strong connectivity via per-state reachability.
            for s in 0..n {
                if !inside(StateId(s)) {
                    continue;
                }
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(v) = stack.pop() {
                    for &w in &adj[v] {
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
                for t in 0..n {
                    if inside(StateId(t)) && !seen[t] {
                        continue 'subset;
                    }
                }
            }
            ecs.push(mask);
        }
        let maximal: Vec<u32> = ecs
            .iter()
            .copied()
            .filter(|&m| !ecs.iter().any(|&o| o != m && o & m == m))
            .collect();
        let mut out: Vec<Vec<StateId>> = maximal
            .into_iter()
            .map(|m| (0..n).filter(|s| m & (1 << s) != 0).map(StateId).collect())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn matches_brute_force_on_handcrafted_models() {
        for text in [
            "states 4\ninit 0\ngoal 2\nsink 3\naction 0 stay 1:1\naction 0 exit 2:0.5 3:0.5\naction 1 back 0:1\n",
            "states 5\ninit 0\ngoal 3\nsink 4\naction 0 a 1:0.5 3:0.5\naction 1 go 2:1\naction 2 back 1:1\n",
            "states 6\ninit 0\ngoal 4\nsink 5\naction 0 a 1:1\naction 1 b 2:0.5 0:0.5\naction 2 c 0:1\naction 2 d 3:1\naction 3 e 4:0.5 5:0.5\naction 3 f 3:1\n",
        ] {
            let m = parse_model(text).unwrap();
            let expected = brute_force_mecs(&m);
            let got: Vec<Vec<StateId>> =
                find_mecs(&m, None).mecs.iter().map(|m| m.states.clone()).collect();
            assert_eq!(got, expected, "model: {text}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_models() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(3..8usize);
            let mut raw = crate::model::RawModel {
                states: n,
                init: 0,
                goal: n - 2,
                sink: Some(n - 1),
                actions: Vec::new(),
            };
            for s in 0..n - 2 {
                for a in 0..rng.gen_range(1..3usize) {
                    // Dirac edges only: plenty of cycles, exact sums.
                    let t = rng.gen_range(0..n);
                    raw.actions.push(crate::model::RawAction {
                        state: s,
                        label: format!("a{a}"),
                        entries: vec![(t, 1.0)],
                    });
                }
            }
            let m = raw.validate().unwrap();
            let expected = brute_force_mecs(&m);
            let got: Vec<Vec<StateId>> =
                find_mecs(&m, None).mecs.iter().map(|m| m.states.clone()).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn lifted_policy_routes_members_to_the_exit() {
        let m = looper();
        let qm = build_quotient(&m, &find_mecs(&m, None));
        let rep = qm.map[0];
        // Quotient policy: take the sole action (0.exit) at the rep.
        let mut qpolicy = Policy::uniform_first(qm.quotient.num_states());
        qpolicy.choices[rep.0] = 0;
        let lifted = qm.lift_policy(&m, &qpolicy);
        // State 0 takes `exit` directly; state 1 routes back to 0.
        assert_eq!(lifted.choices[0], 1);
        assert_eq!(lifted.choices[1], 0);
    }

    #[test]
    fn quotient_of_quotient_is_stable() {
        let m = looper();
        let qm = build_quotient(&m, &find_mecs(&m, None));
        let qm2 = build_quotient(&qm.quotient, &find_mecs(&qm.quotient, None));
        assert_eq!(qm2.quotient.num_states(), qm.quotient.num_states());
    }
}
