//! Baseline solvers and the configuration/result types shared by every
//! engine in the crate: plain value iteration (point estimate, no
//! guarantee) and interval iteration (certified enclosure, optionally
//! on the end-component quotient).

use std::fmt;
use std::time::{Duration, Instant};

use crate::bounds::{Audit, Bounds};
use crate::mec::{build_quotient, find_mecs, QuotientMap};
use crate::model::{Mdp, Policy, StateId};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Absolute precision target on `U(init) - L(init)`.
    pub epsilon: f64,
    /// Sweep budget.
    pub max_iterations: u64,
    pub timeout: Option<Duration>,
    /// Optional runtime soundness check; every Bellman update asserts
    /// that the bounds still contain these reference values.
    pub audit: Option<Audit>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-6,
            max_iterations: u64::MAX,
            timeout: None,
            audit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Certified: `U(init) - L(init) < epsilon` held at termination.
    Converged,
    Timeout,
    BudgetExhausted,
    /// The bounds reached an exact fixpoint with a gap still at or
    /// above epsilon; the upper bound stalled on an end component.
    NoConvergence,
    /// The method terminated by its own criterion but cannot certify an
    /// error bound (plain value iteration, plain MCTS).
    Unguaranteed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::Timeout => "timeout",
            Status::BudgetExhausted => "budget-exhausted",
            Status::NoConvergence => "no-convergence",
            Status::Unguaranteed => "unguaranteed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Certified lower bound at the initial state.
    pub lower: f64,
    /// Certified upper bound at the initial state.
    pub upper: f64,
    /// Sweeps for the iterative solvers, episodes or tree iterations
    /// for the sampling engines.
    pub iterations: u64,
    /// States the solver actually touched, in terms of the input model.
    pub explored_states: usize,
    pub status: Status,
    /// Greedy policy on the input model, where the solver produced one.
    pub policy: Option<Policy>,
    /// Point estimate for methods whose headline answer is not a bound.
    pub estimate: Option<f64>,
}

/// Deadline watcher that amortises clock reads: callers feed it an
/// operation count and it consults the clock roughly every 2^16 ops.
pub(crate) struct Ticker {
    deadline: Option<Instant>,
    credit: u64,
}

impl Ticker {
    pub fn new(timeout: Option<Duration>) -> Self {
        Ticker { deadline: timeout.map(|t| Instant::now() + t), credit: 0 }
    }

    pub fn expired(&mut self, ops: u64) -> bool {
        let Some(d) = self.deadline else { return false };
        self.credit = self.credit.saturating_add(ops);
        if self.credit < (1 << 16) {
            return false;
        }
        self.credit = 0;
        Instant::now() >= d
    }
}

fn terminal_result(mdp: &Mdp) -> SolverResult {
    let v = if mdp.init() == mdp.goal() { 1.0 } else { 0.0 };
    SolverResult {
        lower: v,
        upper: v,
        iterations: 0,
        explored_states: 1,
        status: Status::Converged,
        policy: Some(Policy::uniform_first(mdp.num_states())),
        estimate: Some(v),
    }
}

/// Plain value iteration: synchronous sweeps on the lower bound only,
/// stopping when the max-norm change drops below epsilon. That residual
/// criterion is not an error bound, so unless the trivial enclosure
/// `[L, 1]` happens to be tight the result is [`Status::Unguaranteed`].
pub fn value_iteration(mdp: &Mdp, config: &SolverConfig) -> SolverResult {
    if mdp.is_terminal(mdp.init()) {
        return terminal_result(mdp);
    }
    let n = mdp.num_states();
    let mut prev = vec![0.0f64; n];
    prev[mdp.goal().0] = 1.0;
    let mut next = prev.clone();
    let mut ticker = Ticker::new(config.timeout);
    let mut iterations = 0u64;
    let mut status = Status::BudgetExhausted;
    while iterations < config.max_iterations {
        if ticker.expired(n as u64) {
            status = Status::Timeout;
            break;
        }
        let mut delta = 0.0f64;
        for s in 0..n {
            let sid = StateId(s);
            if mdp.is_terminal(sid) {
                continue;
            }
            let mut best = 0.0f64;
            for action in mdp.actions(sid) {
                let mut sum = 0.0;
                for &(t, p) in action.distribution.entries() {
                    sum += p * prev[t.0];
                }
                best = best.max(sum.min(1.0));
            }
            let v = best.max(prev[s]);
            delta = delta.max(v - prev[s]);
            next[s] = v;
        }
        std::mem::swap(&mut prev, &mut next);
        iterations += 1;
        if delta < config.epsilon {
            status = Status::Unguaranteed;
            break;
        }
    }

    let lower = prev[mdp.init().0];
    let upper = if mdp.init() == mdp.sink() { 0.0 } else { 1.0 };
    if status == Status::Unguaranteed && upper - lower < config.epsilon {
        status = Status::Converged;
    }
    let mut choices = Vec::with_capacity(n);
    for s in 0..n {
        let sid = StateId(s);
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (a, action) in mdp.actions(sid).iter().enumerate() {
            let mut sum = 0.0;
            for &(t, p) in action.distribution.entries() {
                sum += p * prev[t.0];
            }
            if sum > best_v {
                best_v = sum;
                best = a;
            }
        }
        choices.push(best);
    }
    SolverResult {
        lower,
        upper,
        iterations,
        explored_states: n,
        status,
        policy: Some(Policy { choices }),
        estimate: Some(lower),
    }
}

/// Interval iteration: asynchronous Bellman sweeps in backward state
/// order on both bounds. With `collapse_first` the full end-component
/// quotient is built up front, which is what makes the upper bound able
/// to converge on models with end components; without it the upper
/// bound provably stalls there and the run ends in
/// [`Status::NoConvergence`] once the bounds stop moving.
pub fn interval_iteration(mdp: &Mdp, config: &SolverConfig, collapse_first: bool) -> SolverResult {
    if mdp.is_terminal(mdp.init()) {
        return terminal_result(mdp);
    }
    let qm: Option<QuotientMap> = if collapse_first {
        Some(build_quotient(mdp, &find_mecs(mdp, None)))
    } else {
        None
    };
    let work: &Mdp = qm.as_ref().map_or(mdp, |q| &q.quotient);
    let init = qm.as_ref().map_or(mdp.init(), |q| q.map[mdp.init().0]);
    let n = work.num_states();

    let mut bounds = Bounds::new(work);
    if let Some(audit) = &config.audit {
        let audit = match &qm {
            Some(q) => Audit {
                reference: q.representatives.iter().map(|r| audit.reference[r.0]).collect(),
                slack: audit.slack,
            },
            None => audit.clone(),
        };
        bounds.set_audit(audit);
    }

    let mut ticker = Ticker::new(config.timeout);
    let mut iterations = 0u64;
    let mut last_delta_u = f64::INFINITY;
    let status = loop {
        if bounds.upper(init) - bounds.lower(init) < config.epsilon {
            break Status::Converged;
        }
        if iterations >= config.max_iterations {
            // Spent the whole budget; distinguish a stalled upper bound
            // from one that was still moving.
            break if last_delta_u == 0.0 {
                Status::NoConvergence
            } else {
                Status::BudgetExhausted
            };
        }
        if ticker.expired(n as u64) {
            break Status::Timeout;
        }
        let mut dl = 0.0f64;
        let mut du = 0.0f64;
        for s in (0..n).rev() {
            let sid = StateId(s);
            if work.is_terminal(sid) {
                continue;
            }
            let (ol, ou) = (bounds.lower(sid), bounds.upper(sid));
            let (nl, nu) = bounds.bellman_update(work, sid);
            dl = dl.max(nl - ol);
            du = du.max(ou - nu);
        }
        iterations += 1;
        last_delta_u = du;
        if dl == 0.0 && du == 0.0 {
            // Exact fixpoint: nothing will ever move again.
            break if bounds.upper(init) - bounds.lower(init) < config.epsilon {
                Status::Converged
            } else {
                Status::NoConvergence
            };
        }
    };

    let qpolicy = bounds.extract_policy(work);
    let policy = match &qm {
        Some(q) => q.lift_policy(mdp, &qpolicy),
        None => qpolicy,
    };
    SolverResult {
        lower: bounds.lower(init),
        upper: bounds.upper(init),
        iterations,
        explored_states: mdp.num_states(),
        status,
        policy: Some(policy),
        estimate: None,
    }
}
