//! Certified lower/upper bound storage and the Bellman update.
//!
//! Bounds are kept per state-action pair; per-state values are the max
//! over the pairs and are cached so updates are O(support). The
//! inviolable invariant is `L(s,a) <= V(s,a) <= U(s,a)` for the true
//! Q-values, which updates preserve because they only ever tighten
//! monotonically against values that are themselves sound.

use crate::model::{Mdp, Policy, StateId};

/// Optional runtime soundness check: a reference value vector (usually
/// from [`crate::oracle::exact_oracle`]) that every update is checked
/// against, together with range (`0 <= L <= U <= 1`) and per-state
/// monotonicity (`L` never drops, `U` never rises). Panics on
/// violation, so tests catch unsound updates at the exact step that
/// produced them.
#[derive(Debug, Clone)]
pub struct Audit {
    /// Exact value per state.
    pub reference: Vec<f64>,
    /// Allowed numeric slack in the containment check.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct Bounds {
    /// `(L, U)` per state-action pair, indexed like `Mdp::actions`.
    pairs: Vec<Vec<(f64, f64)>>,
    state_l: Vec<f64>,
    state_u: Vec<f64>,
    audit: Option<Audit>,
}

impl Bounds {
    /// Initial bounds: `[0, 1]` everywhere, goal pinned to `[1, 1]`,
    /// sink pinned to `[0, 0]`.
    pub fn new(mdp: &Mdp) -> Self {
        let n = mdp.num_states();
        let pairs = (0..n)
            .map(|s| vec![(0.0, 1.0); mdp.actions(StateId(s)).len()])
            .collect();
        let mut b = Bounds {
            pairs,
            state_l: vec![0.0; n],
            state_u: vec![1.0; n],
            audit: None,
        };
        b.pin_terminals(mdp);
        b
    }

    fn pin_terminals(&mut self, mdp: &Mdp) {
        let g = mdp.goal().0;
        let k = mdp.sink().0;
        self.state_l[g] = 1.0;
        self.state_u[g] = 1.0;
        for p in &mut self.pairs[g] {
            *p = (1.0, 1.0);
        }
        self.state_l[k] = 0.0;
        self.state_u[k] = 0.0;
        for p in &mut self.pairs[k] {
            *p = (0.0, 0.0);
        }
    }

    /// Attaches a reference-value audit. Every subsequent update panics
    /// if it would break `L <= reference <= U` at the updated state.
    pub fn set_audit(&mut self, audit: Audit) {
        self.audit = Some(audit);
    }

    pub fn audit(&self) -> Option<&Audit> {
        self.audit.as_ref()
    }

    pub fn take_audit(&mut self) -> Option<Audit> {
        self.audit.take()
    }

    #[inline]
    pub fn lower(&self, s: StateId) -> f64 {
        self.state_l[s.0]
    }

    #[inline]
    pub fn upper(&self, s: StateId) -> f64 {
        self.state_u[s.0]
    }

    #[inline]
    pub fn gap(&self, s: StateId) -> f64 {
        self.state_u[s.0] - self.state_l[s.0]
    }

    #[inline]
    pub fn pair(&self, s: StateId, a: usize) -> (f64, f64) {
        self.pairs[s.0][a]
    }

    pub fn num_states(&self) -> usize {
        self.state_l.len()
    }

    /// Replaces the stored pair verbatim and recomputes the state's
    /// cached values. Used when bounds are transferred across a
    /// quotient, never by ordinary updates.
    pub(crate) fn set_pair_raw(&mut self, s: StateId, a: usize, pair: (f64, f64)) {
        self.pairs[s.0][a] = pair;
    }

    pub(crate) fn recompute_state(&mut self, s: StateId) {
        let mut l = 0.0f64;
        let mut u = 0.0f64;
        for &(pl, pu) in &self.pairs[s.0] {
            l = l.max(pl);
            u = u.max(pu);
        }
        self.state_l[s.0] = l;
        self.state_u[s.0] = u;
    }

    /// One Bellman backup of every action of `s`, tightening
    /// monotonically: `L` never decreases, `U` never increases. Returns
    /// the new `(L, U)` of the state. Goal and sink are fixed points.
    pub fn bellman_update(&mut self, mdp: &Mdp, s: StateId) -> (f64, f64) {
        if mdp.is_terminal(s) {
            return (self.state_l[s.0], self.state_u[s.0]);
        }
        let (prev_l, prev_u) = (self.state_l[s.0], self.state_u[s.0]);
        let mut best_l = 0.0f64;
        let mut best_u = 0.0f64;
        for (a, action) in mdp.actions(s).iter().enumerate() {
            let mut sum_l = 0.0;
            let mut sum_u = 0.0;
            for &(t, p) in action.distribution.entries() {
                sum_l += p * self.state_l[t.0];
                sum_u += p * self.state_u[t.0];
            }
            let (old_l, old_u) = self.pairs[s.0][a];
            let l = old_l.max(sum_l.min(1.0));
            let mut u = old_u.min(sum_u.max(0.0));
            // Rounding can push the freshly computed values past each
            // other by an ulp; keep the pair ordered.
            if u < l {
                u = l;
            }
            self.pairs[s.0][a] = (l, u);
            best_l = best_l.max(l);
            best_u = best_u.max(u);
        }
        self.state_l[s.0] = best_l;
        self.state_u[s.0] = best_u;
        if let Some(audit) = &self.audit {
            let v = audit.reference[s.0];
            assert!(
                best_l <= v + audit.slack && v <= best_u + audit.slack,
                "bound soundness violated at state {s}: L={best_l} U={best_u} V={v}"
            );
            assert!(
                0.0 <= best_l && best_l <= best_u && best_u <= 1.0,
                "bound range violated at state {s}: L={best_l} U={best_u}"
            );
            assert!(
                best_l >= prev_l && best_u <= prev_u,
                "bound monotonicity violated at state {s}: \
                 L {prev_l} -> {best_l}, U {prev_u} -> {best_u}"
            );
        }
        (best_l, best_u)
    }

    /// Greedy policy w.r.t. the lower bounds (the certified part of the
    /// interval), ties broken by lowest action declaration index.
    pub fn extract_policy(&self, mdp: &Mdp) -> Policy {
        let mut choices = Vec::with_capacity(self.num_states());
        for s in 0..self.num_states() {
            let mut best = 0;
            let mut best_l = f64::NEG_INFINITY;
            for (a, _) in mdp.actions(StateId(s)).iter().enumerate() {
                let (l, _) = self.pairs[s][a];
                if l > best_l {
                    best_l = l;
                    best = a;
                }
            }
            choices.push(best);
        }
        Policy { choices }
    }
}
