//! Benchmark model generators: the adversary chain that starves
//! simulation-guided solvers, the two-state trap that stalls upper
//! bounds, branching and interleaving compositions, and a seeded random
//! model generator for property tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Mdp, RawAction, RawModel, StateId};

/// Parameters of the adversary chain.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryParams {
    /// Number of chain segments before the goal; must be >= 1.
    pub segments: usize,
    /// Probability of advancing one segment; the rest of the mass
    /// resets the walk to the start. Must be in (0, 1).
    pub advance_probability: f64,
}

/// Chain of `n` segments where each step advances with a small
/// probability and otherwise resets to the initial state. The value is
/// exactly 1 (the goal is reached eventually with certainty), but every
/// method that propagates bounds along sampled paths inches towards it
/// at a rate of roughly `p^n` per update, which makes this the standard
/// stress test for simulation-guided solvers. The sink exists but is
/// unreachable.
pub fn gen_adversary(params: &AdversaryParams) -> Mdp {
    let n = params.segments;
    let p = params.advance_probability;
    assert!(n >= 1, "need at least one segment");
    assert!(p > 0.0 && p < 1.0, "advance probability must be in (0, 1)");
    let mut raw = RawModel {
        states: n + 2,
        init: 0,
        goal: n,
        sink: Some(n + 1),
        actions: Vec::with_capacity(n),
    };
    for i in 0..n {
        // i + 1 == n lands on the goal.
        raw.actions.push(RawAction {
            state: i,
            label: segment_label(i),
            entries: vec![(i + 1, p), (0, 1.0 - p)],
        });
    }
    raw.validate().expect("adversary chain is valid by construction")
}

fn segment_label(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("x{i}")
    }
}

/// Two controllable states looping into each other, with a single exit
/// that is a fair coin between goal and sink. The value is 0.5; the
/// upper bound of any Bellman iteration stays exactly 1 on the loop
/// until the end component is collapsed, which makes this the minimal
/// regression model for collapse-free non-convergence.
pub fn gen_upper_trap() -> Mdp {
    RawModel {
        states: 4,
        init: 0,
        goal: 2,
        sink: Some(3),
        actions: vec![
            RawAction { state: 0, label: "stay".into(), entries: vec![(1, 1.0)] },
            RawAction {
                state: 0,
                label: "exit".into(),
                entries: vec![(2, 0.5), (3, 0.5)],
            },
            RawAction { state: 1, label: "back".into(), entries: vec![(0, 1.0)] },
        ],
    }
    .validate()
    .expect("trap model is valid by construction")
}

/// Branching composition: one initial state offering action `a` into
/// the first component and `b` into the second.
///
/// The first component's initial state is fused with the composite
/// initial state: `a` carries the distribution of its first action, and
/// every transition targeting it (the chain resets, say) is redirected
/// to the composite init, where the branch choice is open again. Goals
/// of both components merge into one goal, sinks likewise, so the
/// composite value is the max of the component values. State count is
/// exactly `|first| + |second| - 2`.
pub fn branch_compose(first: &Mdp, second: &Mdp) -> Mdp {
    let n1 = first.num_states();
    let n2 = second.num_states();
    let states = n1 + n2 - 2;
    let goal = states - 2;
    let sink = states - 1;

    // Composite ids: 0 = fused init, then the first component's other
    // ordinary states in id order, then the second component's ordinary
    // states, then goal, then sink.
    let mut map1 = vec![usize::MAX; n1];
    let mut next = 1usize;
    for s in 0..n1 {
        let sid = StateId(s);
        map1[s] = if sid == first.goal() {
            goal
        } else if sid == first.sink() {
            sink
        } else if sid == first.init() {
            0
        } else {
            next += 1;
            next - 1
        };
    }
    let mut map2 = vec![usize::MAX; n2];
    for s in 0..n2 {
        let sid = StateId(s);
        map2[s] = if sid == second.goal() {
            goal
        } else if sid == second.sink() {
            sink
        } else {
            next += 1;
            next - 1
        };
    }
    debug_assert_eq!(next, goal);

    let mut raw = RawModel { states, init: 0, goal, sink: Some(sink), actions: Vec::new() };
    let remap = |map: &[usize], action: &crate::model::Action, state: usize, label: String| {
        RawAction {
            state,
            label,
            entries: action
                .distribution
                .entries()
                .iter()
                .map(|&(t, p)| (map[t.0], p))
                .collect(),
        }
    };

    // Fused init: `a` from the first component's init, `b` into the
    // second component.
    raw.actions.push(remap(&map1, &first.actions(first.init())[0], 0, "a".into()));
    raw.actions.push(RawAction {
        state: 0,
        label: "b".into(),
        entries: vec![(map2[second.init().0], 1.0)],
    });

    for s in 0..n1 {
        let sid = StateId(s);
        if sid == first.init() || sid == first.goal() || sid == first.sink() {
            continue;
        }
        for action in first.actions(sid) {
            raw.actions.push(remap(&map1, action, map1[s], action.label.clone()));
        }
    }
    for s in 0..n2 {
        let sid = StateId(s);
        if sid == second.goal() || sid == second.sink() {
            continue;
        }
        for action in second.actions(sid) {
            raw.actions.push(remap(&map2, action, map2[s], action.label.clone()));
        }
    }
    raw.validate().expect("branch composition is valid by construction")
}

/// When a product state counts as the composite goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalRule {
    /// First component's goal reached, second coordinate arbitrary.
    FirstComponent,
    /// Either component's goal reached.
    EitherComponent,
}

/// Asynchronous (interleaving) product: each composite action moves one
/// coordinate and freezes the other; no synchronization. Only states
/// reachable from the pair of initial states are materialized. Product
/// states satisfying `rule` collapse into one composite goal; the pair
/// of both sinks becomes the composite sink. Component self-loops are
/// kept as-is, so products routinely contain end components even when
/// the factors have none.
pub fn parallel_compose(m1: &Mdp, m2: &Mdp, rule: GoalRule) -> Mdp {
    use std::collections::HashMap;

    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        Goal,
        Sink,
        Live(usize),
    }
    let classify = |s1: StateId, s2: StateId, live: &HashMap<(usize, usize), usize>| -> Option<Class> {
        let is_goal = match rule {
            GoalRule::FirstComponent => s1 == m1.goal(),
            GoalRule::EitherComponent => s1 == m1.goal() || s2 == m2.goal(),
        };
        if is_goal {
            Some(Class::Goal)
        } else if s1 == m1.sink() && s2 == m2.sink() {
            Some(Class::Sink)
        } else {
            live.get(&(s1.0, s2.0)).copied().map(Class::Live)
        }
    };

    // Pass 1: BFS over live product states, ids in discovery order.
    let mut live: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order: Vec<(StateId, StateId)> = Vec::new();
    let root = (m1.init(), m2.init());
    if classify(root.0, root.1, &live).is_none() {
        live.insert((root.0 .0, root.1 .0), 0);
        order.push(root);
    }
    let mut head = 0;
    while head < order.len() {
        let (s1, s2) = order[head];
        head += 1;
        let visit = |t1: StateId, t2: StateId, live: &mut HashMap<(usize, usize), usize>, order: &mut Vec<(StateId, StateId)>| {
            if classify(t1, t2, live).is_none() {
                live.insert((t1.0, t2.0), order.len());
                order.push((t1, t2));
            }
        };
        for action in m1.actions(s1) {
            for &(t1, _) in action.distribution.entries() {
                visit(t1, s2, &mut live, &mut order);
            }
        }
        for action in m2.actions(s2) {
            for &(t2, _) in action.distribution.entries() {
                visit(s1, t2, &mut live, &mut order);
            }
        }
    }

    let goal = order.len();
    let sink = goal + 1;
    let id_of = |c: Class| match c {
        Class::Goal => goal,
        Class::Sink => sink,
        Class::Live(i) => i,
    };

    // Pass 2: emit actions.
    let mut raw = RawModel {
        states: order.len() + 2,
        init: match classify(root.0, root.1, &live) {
            Some(c) => id_of(c),
            None => unreachable!("root is classified after pass 1"),
        },
        goal,
        sink: Some(sink),
        actions: Vec::new(),
    };
    for (i, &(s1, s2)) in order.iter().enumerate() {
        for (which, comp_state, m) in [(1, s1, m1), (2, s2, m2)] {
            for action in m.actions(comp_state) {
                let entries = action
                    .distribution
                    .entries()
                    .iter()
                    .map(|&(t, p)| {
                        let (t1, t2) = if which == 1 { (t, s2) } else { (s1, t) };
                        let class = classify(t1, t2, &live).expect("successor seen in pass 1");
                        (id_of(class), p)
                    })
                    .collect::<Vec<_>>();
                // Both coordinates moving into goal-class states can
                // merge entries; fold duplicates.
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (t, p) in entries {
                    match merged.iter_mut().find(|(e, _)| *e == t) {
                        Some((_, mass)) => *mass += p,
                        None => merged.push((t, p)),
                    }
                }
                raw.actions.push(RawAction {
                    state: i,
                    label: format!("{which}.{}", action.label),
                    entries: merged,
                });
            }
        }
    }
    raw.validate().expect("interleaving product is valid by construction")
}

/// Seeded random MDP for property tests.
///
/// Layout: init 0, goal `states-2`, sink `states-1`. Every ordinary
/// state gets 1..=`max_actions` actions with up to `max_branching`
/// distinct successors. Each base action leaks a random 2-10% of its
/// mass to the sink, which both guarantees the value is strictly below
/// 1 and rules out end components among base actions (every support
/// touches the sink). The first action of every state targets some
/// higher-numbered state, so the goal is reachable from everywhere.
///
/// `ec_density` in [0, 1] plants `round(density * ordinary/2)` disjoint
/// two-state cycles of extra `ec`-labelled Dirac actions; those are
/// exactly the nontrivial maximal end components of the result.
pub fn gen_random_mdp(
    states: usize,
    max_actions: usize,
    max_branching: usize,
    ec_density: f64,
    seed: u64,
) -> Mdp {
    assert!(states >= 3, "need init, goal and sink");
    assert!(max_actions >= 1 && max_branching >= 1);
    assert!((0.0..=1.0).contains(&ec_density));
    let goal = states - 2;
    let sink = states - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = RawModel { states, init: 0, goal, sink: Some(sink), actions: Vec::new() };

    for s in 0..goal {
        let n_actions = rng.gen_range(1..=max_actions);
        for j in 0..n_actions {
            let branching = rng.gen_range(1..=max_branching);
            let mut targets: Vec<usize> = Vec::with_capacity(branching);
            // Forward edge first: keeps the goal reachable from every
            // state by induction on the id.
            targets.push(if j == 0 {
                rng.gen_range(s + 1..=goal)
            } else {
                rng.gen_range(0..=goal)
            });
            for _ in 1..branching {
                let t = rng.gen_range(0..=goal);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            let leak = rng.gen_range(0.02..0.1);
            let weights: Vec<f64> =
                targets.iter().map(|_| rng.gen_range(0.05..1.05)).collect();
            let total: f64 = weights.iter().sum();
            let mut entries: Vec<(usize, f64)> = targets
                .iter()
                .zip(&weights)
                .map(|(&t, w)| (t, (1.0 - leak) * w / total))
                .collect();
            // Exact complement: the sink takes whatever is left, so the
            // distribution sums to 1 bit-for-bit within an ulp.
            let assigned: f64 = entries.iter().map(|&(_, p)| p).sum();
            entries.push((sink, 1.0 - assigned));
            raw.actions.push(RawAction { state: s, label: format!("a{j}"), entries });
        }
    }

    let ordinary = goal; // states 0..goal
    let pairs = (ec_density * ordinary as f64 / 2.0).round() as usize;
    if pairs > 0 {
        let mut ids: Vec<usize> = (0..ordinary).collect();
        ids.shuffle(&mut rng);
        for k in 0..pairs.min(ordinary / 2) {
            let (x, y) = (ids[2 * k], ids[2 * k + 1]);
            raw.actions.push(RawAction { state: x, label: "ec".into(), entries: vec![(y, 1.0)] });
            raw.actions.push(RawAction { state: y, label: "ec".into(), entries: vec![(x, 1.0)] });
        }
    }

    raw.validate().expect("random model is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::serialize_model;
    use crate::mec::find_mecs;
    use crate::oracle::exact_oracle;

    #[test]
    fn adversary_has_documented_shape() {
        let m = gen_adversary(&AdversaryParams { segments: 3, advance_probability: 0.01 });
        assert_eq!(m.num_states(), 5);
        assert_eq!(m.goal(), StateId(3));
        assert_eq!(m.sink(), StateId(4));
        let a0 = &m.actions(StateId(0))[0];
        assert_eq!(a0.label, "a");
        assert_eq!(a0.distribution.entries(), &[(StateId(1), 0.01), (StateId(0), 0.99)]);
        assert_eq!(m.actions(StateId(2))[0].label, "c");
        assert_eq!(m.actions(StateId(2))[0].distribution.probability_of(StateId(3)), 0.01);
    }

    #[test]
    fn adversary_value_is_one_across_sizes() {
        for n in 1..=10 {
            for p in [0.5, 0.01] {
                let m = gen_adversary(&AdversaryParams { segments: n, advance_probability: p });
                let v = exact_oracle(&m).unwrap();
                assert_eq!(v[0], 1.0, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn trap_matches_its_textual_form() {
        let text = "states 4\ninit 0\ngoal 2\nsink 3\n\
                    action 0 stay 1:1\naction 0 exit 2:0.5 3:0.5\naction 1 back 0:1\n";
        assert_eq!(gen_upper_trap(), crate::format::parse_model(text).unwrap());
        assert_eq!(exact_oracle(&gen_upper_trap()).unwrap(), vec![0.5, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn branch_count_and_value() {
        let adv = gen_adversary(&AdversaryParams { segments: 3, advance_probability: 0.01 });
        let other = gen_random_mdp(8, 2, 3, 0.0, 11);
        let m = branch_compose(&adv, &other);
        assert_eq!(m.num_states(), adv.num_states() + other.num_states() - 2);
        let v = exact_oracle(&m).unwrap();
        let v_other = exact_oracle(&other).unwrap();
        assert!(v_other[other.init().0] < 1.0);
        // Composite value = max of the components; the chain gives 1.
        assert_eq!(v[m.init().0], 1.0);
    }

    #[test]
    fn branch_with_trivial_goal_component() {
        let adv = gen_adversary(&AdversaryParams { segments: 3, advance_probability: 0.01 });
        // Second component: init == goal (plus the implicit sink).
        let tiny = crate::format::parse_model("states 2\ninit 0\ngoal 0\nsink 1\n").unwrap();
        let m = branch_compose(&adv, &tiny);
        assert_eq!(m.num_states(), 5);
        // Action b jumps straight to the merged goal.
        let b = &m.actions(m.init())[1];
        assert_eq!(b.label, "b");
        assert!(b.distribution.is_dirac_to(m.goal()));
    }

    #[test]
    fn branch_resets_return_to_the_branch_point() {
        let adv = gen_adversary(&AdversaryParams { segments: 2, advance_probability: 0.25 });
        let other = gen_upper_trap();
        let m = branch_compose(&adv, &other);
        // Fused init: action a advances or resets to the init itself.
        let a = &m.actions(m.init())[0];
        assert_eq!(a.label, "a");
        assert_eq!(a.distribution.probability_of(m.init()), 0.75);
        let v = exact_oracle(&m).unwrap();
        assert_eq!(v[m.init().0], 1.0);
    }

    #[test]
    fn product_respects_goal_rules() {
        let fast = crate::format::parse_model(
            "states 3\ninit 0\ngoal 1\nsink 2\naction 0 go 1:0.9 2:0.1\n",
        )
        .unwrap();
        let slow = crate::format::parse_model(
            "states 3\ninit 0\ngoal 1\nsink 2\naction 0 go 1:0.5 2:0.5\n",
        )
        .unwrap();
        let first = parallel_compose(&slow, &fast, GoalRule::FirstComponent);
        let either = parallel_compose(&slow, &fast, GoalRule::EitherComponent);
        assert!(first.num_states() <= 3 * 3 + 2);
        let vf = exact_oracle(&first).unwrap()[first.init().0];
        let ve = exact_oracle(&either).unwrap()[either.init().0];
        // First-component rule ignores the fast component's goal.
        assert!((vf - 0.5).abs() < 1e-12, "vf={vf}");
        // Either-component rule: best play reaches some goal with
        // probability 1 - 0.5*0.1 (lose only if both attempts fail).
        assert!((ve - 0.95).abs() < 1e-12, "ve={ve}");
    }

    #[test]
    fn product_with_adversary_keeps_value_one() {
        let adv = gen_adversary(&AdversaryParams { segments: 3, advance_probability: 0.01 });
        let other = gen_random_mdp(6, 2, 2, 0.2, 3);
        let m = parallel_compose(&adv, &other, GoalRule::FirstComponent);
        assert!(m.num_states() <= adv.num_states() * other.num_states() + 2);
        let v = exact_oracle(&m).unwrap();
        assert_eq!(v[m.init().0], 1.0);
    }

    #[test]
    fn random_models_are_reproducible() {
        let a = serialize_model(&gen_random_mdp(30, 3, 4, 0.2, 42));
        let b = serialize_model(&gen_random_mdp(30, 3, 4, 0.2, 42));
        let c = serialize_model(&gen_random_mdp(30, 3, 4, 0.2, 43));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn leak_free_of_cycles_without_planting() {
        for seed in 0..20 {
            let m = gen_random_mdp(12, 3, 4, 0.0, seed);
            let d = find_mecs(&m, None);
            assert_eq!(d.nontrivial(&m).count(), 0, "seed {seed}");
        }
    }

    #[test]
    fn planted_cycles_become_components() {
        for seed in 0..10 {
            let m = gen_random_mdp(20, 2, 3, 0.2, seed);
            let d = find_mecs(&m, None);
            let nontrivial: Vec<_> = d.nontrivial(&m).collect();
            assert_eq!(nontrivial.len(), 2, "seed {seed}");
            for mec in nontrivial {
                assert_eq!(mec.states.len(), 2);
            }
        }
    }

    #[test]
    fn random_value_strictly_below_one() {
        for seed in [1, 9, 77] {
            let m = gen_random_mdp(25, 3, 4, 0.2, seed);
            let v = exact_oracle(&m).unwrap();
            let init = v[m.init().0];
            assert!(init < 0.981, "leak forces value below 1, got {init}");
            assert!(init > 0.0, "goal is reachable");
        }
    }
}
