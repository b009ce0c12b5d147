//! Core MDP representation: states, probabilistic actions, and the
//! validated immutable model the engines operate on.
//!
//! A model is a finite MDP with one initial state, one absorbing goal
//! state and one absorbing sink state. Reachability values are always
//! taken with respect to the goal state.

use std::fmt;

use thiserror::Error;

/// Index of a state. Plain `usize` under the hood; states are dense
/// `0..num_states`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies one action of one state: the `action`-th entry of
/// `mdp.actions(state)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionRef {
    pub state: StateId,
    pub action: usize,
}

/// A probability distribution over successor states.
///
/// Invariants (established by [`RawModel::validate`] or the generators):
/// entries are non-empty, successors are distinct, probabilities are in
/// `(0, 1]` and sum to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(StateId, f64)>,
}

impl Distribution {
    pub fn new(entries: Vec<(StateId, f64)>) -> Self {
        debug_assert!(!entries.is_empty());
        Distribution { entries }
    }

    /// Dirac distribution: all mass on `target`.
    pub fn dirac(target: StateId) -> Self {
        Distribution { entries: vec![(target, 1.0)] }
    }

    #[inline]
    pub fn entries(&self) -> &[(StateId, f64)] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_dirac_to(&self, target: StateId) -> bool {
        self.entries.len() == 1 && self.entries[0].0 == target
    }

    /// Probability assigned to `target` (0 if not in the support).
    pub fn probability_of(&self, target: StateId) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| *s == target)
            .map_or(0.0, |&(_, p)| p)
    }
}

/// One labelled action with its successor distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub label: String,
    pub distribution: Distribution,
}

/// Validated, immutable MDP. Construct via [`RawModel::validate`] or
/// one of the generators in [`crate::benchgen`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    actions: Vec<Vec<Action>>,
    init: StateId,
    goal: StateId,
    sink: StateId,
}

impl Mdp {
    /// Internal constructor for code that builds models it already
    /// knows are valid (generators, quotient construction). Checked in
    /// debug builds only.
    pub(crate) fn from_parts(
        actions: Vec<Vec<Action>>,
        init: StateId,
        goal: StateId,
        sink: StateId,
    ) -> Self {
        let m = Mdp { actions, init, goal, sink };
        debug_assert!(m.check_invariants().is_ok(), "{:?}", m.check_invariants());
        m
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn init(&self) -> StateId {
        self.init
    }

    #[inline]
    pub fn goal(&self) -> StateId {
        self.goal
    }

    #[inline]
    pub fn sink(&self) -> StateId {
        self.sink
    }

    #[inline]
    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.actions[s.0]
    }

    #[inline]
    pub fn action(&self, a: ActionRef) -> &Action {
        &self.actions[a.state.0][a.action]
    }

    #[inline]
    pub fn is_terminal(&self, s: StateId) -> bool {
        s == self.goal || s == self.sink
    }

    pub fn num_transitions(&self) -> usize {
        self.actions
            .iter()
            .flat_map(|acts| acts.iter().map(|a| a.distribution.len()))
            .sum()
    }

    pub fn num_actions_total(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    fn check_invariants(&self) -> Result<(), String> {
        let n = self.num_states();
        for s in [self.init, self.goal, self.sink] {
            if s.0 >= n {
                return Err(format!("special state {s} out of range"));
            }
        }
        if self.goal == self.sink {
            return Err("goal and sink coincide".into());
        }
        for (s, acts) in self.actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(format!("state {s} has no actions"));
            }
            for a in acts {
                let mut sum = 0.0;
                for &(t, p) in a.distribution.entries() {
                    if t.0 >= n {
                        return Err(format!("successor {t} out of range"));
                    }
                    if !(p > 0.0 && p <= 1.0 + 1e-9) {
                        return Err(format!("probability {p} out of range"));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(format!("distribution of {s}/{} sums to {sum}", a.label));
                }
            }
        }
        Ok(())
    }
}

/// A finite path: the actions taken and the state the path currently
/// ends in. `steps[i].state` is the i-th state on the path.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub steps: Vec<ActionRef>,
    pub last: StateId,
}

impl Path {
    pub fn new(init: StateId) -> Self {
        Path { steps: Vec::new(), last: init }
    }

    pub fn push(&mut self, action: usize, next: StateId) {
        self.steps.push(ActionRef { state: self.last, action });
        self.last = next;
    }

    /// Number of transitions taken.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// All states on the path in visit order, including `last`.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.steps.iter().map(|a| a.state).chain(std::iter::once(self.last))
    }

    pub fn clear(&mut self, init: StateId) {
        self.steps.clear();
        self.last = init;
    }
}

/// Memoryless deterministic policy: `choices[s]` is an index into
/// `mdp.actions(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub choices: Vec<usize>,
}

impl Policy {
    pub fn uniform_first(num_states: usize) -> Self {
        Policy { choices: vec![0; num_states] }
    }

    #[inline]
    pub fn action(&self, s: StateId) -> usize {
        self.choices[s.0]
    }
}

/// Validation and parse errors for textual models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{role} state {id} out of range")]
    BadStateRef { role: &'static str, id: usize },
    #[error("state {state} has no actions")]
    NoActions { state: usize },
    #[error("state {state}: duplicate action label {label:?}")]
    DuplicateAction { state: usize, label: String },
    #[error("state {state}, action {label:?}: successor {succ} listed twice")]
    DuplicateSuccessor { state: usize, label: String, succ: usize },
    #[error("state {state}, action {label:?}: probability {value} not in (0, 1]")]
    InvalidProbability { state: usize, label: String, value: f64 },
    #[error("state {state}, action {label:?}: probabilities sum to {sum}, expected 1")]
    DistributionSum { state: usize, label: String, sum: f64 },
    #[error("state {state} is goal or sink but has a non-self-loop action")]
    NonAbsorbing { state: usize },
    #[error("goal and sink are the same state")]
    GoalSinkOverlap,
}

/// Unvalidated model as read from a file or assembled by hand.
#[derive(Debug, Clone, Default)]
pub struct RawModel {
    pub states: usize,
    pub init: usize,
    pub goal: usize,
    /// Absent sink means "add a fresh absorbing sink state".
    pub sink: Option<usize>,
    pub actions: Vec<RawAction>,
}

#[derive(Debug, Clone)]
pub struct RawAction {
    pub state: usize,
    pub label: String,
    pub entries: Vec<(usize, f64)>,
}

/// Sum tolerance for distributions.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

impl RawModel {
    /// Checks all structural constraints and produces the immutable
    /// model. All violations are reported, not just the first.
    ///
    /// Goal and sink states may be declared without actions; a `loop`
    /// self-loop is synthesised for them. A missing sink declaration
    /// appends a fresh absorbing state.
    pub fn validate(mut self) -> Result<Mdp, Vec<ModelError>> {
        let mut errors = Vec::new();

        let sink = match self.sink {
            Some(s) => s,
            None => {
                let fresh = self.states;
                self.states += 1;
                fresh
            }
        };

        let n = self.states;
        for (role, id) in [("init", self.init), ("goal", self.goal), ("sink", sink)] {
            if id >= n {
                errors.push(ModelError::BadStateRef { role, id });
            }
        }
        if self.goal == sink {
            errors.push(ModelError::GoalSinkOverlap);
        }
        if !errors.is_empty() {
            // Everything below indexes by state; bail before that.
            return Err(errors);
        }

        let mut actions: Vec<Vec<Action>> = vec![Vec::new(); n];
        for raw in &self.actions {
            if raw.state >= n {
                errors.push(ModelError::BadStateRef { role: "action owner", id: raw.state });
                continue;
            }
            if actions[raw.state].iter().any(|a| a.label == raw.label) {
                errors.push(ModelError::DuplicateAction {
                    state: raw.state,
                    label: raw.label.clone(),
                });
                continue;
            }

            let mut ok = true;
            let mut sum = 0.0;
            let mut entries = Vec::with_capacity(raw.entries.len());
            for &(succ, p) in &raw.entries {
                if succ >= n {
                    errors.push(ModelError::BadStateRef { role: "successor", id: succ });
                    ok = false;
                    continue;
                }
                if entries.iter().any(|&(t, _)| t == StateId(succ)) {
                    errors.push(ModelError::DuplicateSuccessor {
                        state: raw.state,
                        label: raw.label.clone(),
                        succ,
                    });
                    ok = false;
                    continue;
                }
                if !p.is_finite() || p <= 0.0 || p > 1.0 {
                    errors.push(ModelError::InvalidProbability {
                        state: raw.state,
                        label: raw.label.clone(),
                        value: p,
                    });
                    ok = false;
                    continue;
                }
                sum += p;
                entries.push((StateId(succ), p));
            }
            if raw.entries.is_empty() {
                errors.push(ModelError::DistributionSum {
                    state: raw.state,
                    label: raw.label.clone(),
                    sum: 0.0,
                });
                continue;
            }
            if ok && (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
                errors.push(ModelError::DistributionSum {
                    state: raw.state,
                    label: raw.label.clone(),
                    sum,
                });
                ok = false;
            }
            if ok {
                actions[raw.state].push(Action {
                    label: raw.label.clone(),
                    distribution: Distribution::new(entries),
                });
            }
        }

        // Goal and sink must be absorbing; synthesise loops if absent.
        for special in [self.goal, sink] {
            if actions[special].is_empty() {
                actions[special].push(Action {
                    label: "loop".into(),
                    distribution: Distribution::dirac(StateId(special)),
                });
            } else if actions[special]
                .iter()
                .any(|a| !a.distribution.is_dirac_to(StateId(special)))
            {
                errors.push(ModelError::NonAbsorbing { state: special });
            }
        }

        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                errors.push(ModelError::NoActions { state: s });
            }
        }

        if errors.is_empty() {
            Ok(Mdp {
                actions,
                init: StateId(self.init),
                goal: StateId(self.goal),
                sink: StateId(sink),
            })
        } else {
            Err(errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_two_state() -> RawModel {
        RawModel {
            states: 3,
            init: 0,
            goal: 1,
            sink: Some(2),
            actions: vec![RawAction {
                state: 0,
                label: "a".into(),
                entries: vec![(1, 0.5), (2, 0.5)],
            }],
        }
    }

    #[test]
    fn validate_accepts_minimal_model() {
        let m = raw_two_state().validate().expect("valid");
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.actions(StateId(0)).len(), 1);
        // Synthesised loops on goal and sink.
        assert!(m.actions(StateId(1))[0].distribution.is_dirac_to(StateId(1)));
        assert!(m.actions(StateId(2))[0].distribution.is_dirac_to(StateId(2)));
    }

    #[test]
    fn missing_sink_appends_fresh_state() {
        let mut raw = raw_two_state();
        raw.sink = None;
        raw.states = 2;
        raw.actions[0].entries = vec![(1, 1.0)];
        let m = raw.validate().expect("valid");
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.sink(), StateId(2));
    }

    #[test]
    fn overfull_distribution_reports_sum() {
        let mut raw = raw_two_state();
        raw.actions[0].entries = vec![(1, 0.6), (2, 0.41)];
        let errs = raw.validate().unwrap_err();
        assert!(matches!(
            errs[0],
            ModelError::DistributionSum { state: 0, ref label, .. } if label == "a"
        ));
    }

    #[test]
    fn out_of_range_probabilities_rejected() {
        let mut raw = raw_two_state();
        raw.actions[0].entries = vec![(1, -0.5), (2, 1.5)];
        let errs = raw.validate().unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ModelError::InvalidProbability { value, .. } if *value < 0.0)));
        assert!(errs
            .iter()
            .any(|e| matches!(e, ModelError::InvalidProbability { value, .. } if *value > 1.0)));
    }

    #[test]
    fn duplicate_successor_rejected() {
        let mut raw = raw_two_state();
        raw.actions[0].entries = vec![(1, 0.5), (1, 0.5)];
        let errs = raw.validate().unwrap_err();
        assert!(matches!(errs[0], ModelError::DuplicateSuccessor { succ: 1, .. }));
    }

    #[test]
    fn duplicate_action_label_rejected() {
        let mut raw = raw_two_state();
        raw.actions.push(RawAction {
            state: 0,
            label: "a".into(),
            entries: vec![(2, 1.0)],
        });
        let errs = raw.validate().unwrap_err();
        assert!(matches!(errs[0], ModelError::DuplicateAction { state: 0, .. }));
    }

    #[test]
    fn stateless_action_owner_rejected() {
        let mut raw = raw_two_state();
        raw.actions.push(RawAction {
            state: 9,
            label: "x".into(),
            entries: vec![(0, 1.0)],
        });
        let errs = raw.validate().unwrap_err();
        assert!(matches!(errs[0], ModelError::BadStateRef { role: "action owner", id: 9 }));
    }

    #[test]
    fn goal_with_outgoing_action_rejected() {
        let mut raw = raw_two_state();
        raw.actions.push(RawAction {
            state: 1,
            label: "escape".into(),
            entries: vec![(0, 1.0)],
        });
        let errs = raw.validate().unwrap_err();
        assert!(errs.contains(&ModelError::NonAbsorbing { state: 1 }));
    }

    #[test]
    fn ordinary_state_without_actions_rejected() {
        let mut raw = raw_two_state();
        raw.states = 4;
        let errs = raw.validate().unwrap_err();
        assert!(errs.contains(&ModelError::NoActions { state: 3 }));
    }

    #[test]
    fn goal_sink_overlap_rejected() {
        let mut raw = raw_two_state();
        raw.sink = Some(1);
        let errs = raw.validate().unwrap_err();
        assert!(errs.contains(&ModelError::GoalSinkOverlap));
    }

    #[test]
    fn path_tracks_states_in_order() {
        let mut p = Path::new(StateId(0));
        p.push(0, StateId(2));
        p.push(1, StateId(0));
        let states: Vec<_> = p.states().collect();
        assert_eq!(states, vec![StateId(0), StateId(2), StateId(0)]);
        assert_eq!(p.len(), 2);
    }
}
