//! Exact reference solver for small models.
//!
//! Works on the end-component quotient and first classifies states
//! qualitatively: `prob0` (no policy reaches the goal) and `prob1e`
//! (some policy reaches it with probability one). Only the remaining
//! states go through policy iteration with direct linear solves. The
//! qualitative step matters for more than speed: on models whose value
//! is exactly 1 via a slow chain, the linear systems are so
//! ill-conditioned that a purely numeric answer would be off by far
//! more than the advertised tolerance, while the graph-based
//! classification is exact.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mec::{build_quotient, find_mecs};
use crate::model::{Mdp, Policy, StateId};

/// Hard cap for the dense linear algebra.
pub const ORACLE_SIZE_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("model has {states} states, oracle limit is {ORACLE_SIZE_LIMIT}")]
    SizeLimit { states: usize },
}

/// Exact maximum reachability value for every state, up to linear
/// solver tolerance (~1e-12; exact on qualitatively decided states).
pub fn exact_oracle(mdp: &Mdp) -> Result<Vec<f64>, OracleError> {
    if mdp.num_states() > ORACLE_SIZE_LIMIT {
        return Err(OracleError::SizeLimit { states: mdp.num_states() });
    }
    let qm = build_quotient(mdp, &find_mecs(mdp, None));
    let q = &qm.quotient;
    let n = q.num_states();

    let reach = can_reach_goal(q);
    let almost_sure = prob1e(q);

    // Unknowns: states that reach the goal with positive but possibly
    // sub-one probability.
    let mut midx = vec![usize::MAX; n];
    let mut m_states = Vec::new();
    for s in 0..n {
        if reach[s] && !almost_sure[s] {
            midx[s] = m_states.len();
            m_states.push(s);
        }
    }

    let mut val = vec![0.0f64; n];
    for s in 0..n {
        if almost_sure[s] {
            val[s] = 1.0;
        }
    }

    if !m_states.is_empty() {
        // Policy iteration over the unknown block. The quotient has no
        // end components besides goal and sink, so every policy's
        // restriction to the block is transient and the system is
        // nonsingular.
        let m = m_states.len();
        let mut policy = vec![0usize; m];
        loop {
            let x = evaluate(q, &m_states, &midx, &policy, &almost_sure);
            for (i, &s) in m_states.iter().enumerate() {
                val[s] = x[i];
            }
            let mut improved = false;
            for (i, &s) in m_states.iter().enumerate() {
                let mut best = policy[i];
                let mut best_q = action_value(q, StateId(s), policy[i], &val);
                for a in 0..q.actions(StateId(s)).len() {
                    let qa = action_value(q, StateId(s), a, &val);
                    if qa > best_q + 1e-12 {
                        best_q = qa;
                        best = a;
                    }
                }
                if best != policy[i] {
                    policy[i] = best;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }

    Ok((0..mdp.num_states()).map(|s| val[qm.map[s].0]).collect())
}

/// Exact reachability value of every state under a fixed policy.
pub fn policy_value(mdp: &Mdp, policy: &Policy) -> Result<Vec<f64>, OracleError> {
    let n = mdp.num_states();
    if n > ORACLE_SIZE_LIMIT {
        return Err(OracleError::SizeLimit { states: n });
    }
    // Backward reachability in the induced chain; only states that can
    // reach the goal at all enter the linear system, which makes it
    // nonsingular even when the policy loops forever elsewhere.
    let goal = mdp.goal().0;
    let mut reach = vec![false; n];
    reach[goal] = true;
    loop {
        let mut grew = false;
        for s in 0..n {
            if reach[s] || mdp.is_terminal(StateId(s)) {
                continue;
            }
            let action = &mdp.actions(StateId(s))[policy.choices[s]];
            if action.distribution.entries().iter().any(|(t, _)| reach[t.0]) {
                reach[s] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }

    let mut tidx = vec![usize::MAX; n];
    let mut t_states = Vec::new();
    for s in 0..n {
        if reach[s] && s != goal {
            tidx[s] = t_states.len();
            t_states.push(s);
        }
    }
    let mut val = vec![0.0f64; n];
    val[goal] = 1.0;
    if t_states.is_empty() {
        return Ok(val);
    }

    let m = t_states.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in t_states.iter().enumerate() {
        let action = &mdp.actions(StateId(s))[policy.choices[s]];
        for &(t, p) in action.distribution.entries() {
            if t.0 == goal {
                b[i] += p;
            } else if tidx[t.0] != usize::MAX {
                a[(i, tidx[t.0])] -= p;
            }
        }
    }
    let x = solve_refined(&a, &b);
    for (i, &s) in t_states.iter().enumerate() {
        val[s] = x[i].clamp(0.0, 1.0);
    }
    Ok(val)
}

/// States with any path to the goal (edge = any action, any successor).
fn can_reach_goal(mdp: &Mdp) -> Vec<bool> {
    let n = mdp.num_states();
    let mut reach = vec![false; n];
    reach[mdp.goal().0] = true;
    loop {
        let mut grew = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            let hit = mdp.actions(StateId(s)).iter().any(|a| {
                a.distribution.entries().iter().any(|(t, _)| reach[t.0])
            });
            if hit {
                reach[s] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    reach
}

/// States from which some policy reaches the goal with probability 1:
/// greatest fixpoint over Z of a least fixpoint over Y, where a state
/// enters Y if some action stays inside Z and touches Y.
fn prob1e(mdp: &Mdp) -> Vec<bool> {
    let n = mdp.num_states();
    let goal = mdp.goal().0;
    let mut z = vec![true; n];
    loop {
        let mut y = vec![false; n];
        y[goal] = true;
        loop {
            let mut grew = false;
            for s in 0..n {
                if y[s] || !z[s] {
                    continue;
                }
                let ok = mdp.actions(StateId(s)).iter().any(|a| {
                    let e = a.distribution.entries();
                    e.iter().all(|(t, _)| z[t.0]) && e.iter().any(|(t, _)| y[t.0])
                });
                if ok {
                    y[s] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        if y == z {
            return z;
        }
        z = y;
    }
}

fn action_value(mdp: &Mdp, s: StateId, a: usize, val: &[f64]) -> f64 {
    mdp.actions(s)[a]
        .distribution
        .entries()
        .iter()
        .map(|&(t, p)| p * val[t.0])
        .sum()
}

/// Evaluates the current policy on the unknown block: solves
/// `(I - P) x = b` where `b` collects the mass entering almost-sure
/// states.
fn evaluate(
    mdp: &Mdp,
    m_states: &[usize],
    midx: &[usize],
    policy: &[usize],
    almost_sure: &[bool],
) -> Vec<f64> {
    let m = m_states.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in m_states.iter().enumerate() {
        let action = &mdp.actions(StateId(s))[policy[i]];
        for &(t, p) in action.distribution.entries() {
            if almost_sure[t.0] {
                b[i] += p;
            } else if midx[t.0] != usize::MAX {
                a[(i, midx[t.0])] -= p;
            }
        }
    }
    let x = solve_refined(&a, &b);
    x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// LU solve with two rounds of iterative refinement in f64.
fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b).expect("transient block must be nonsingular");
    for _ in 0..2 {
        let r = b - a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    x
}
