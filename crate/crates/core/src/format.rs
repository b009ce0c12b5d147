//! Plain-text model format.
//!
//! ```text
//! # comment
//! states 4
//! init 0
//! goal 2
//! sink 3
//! action 0 a 1:0.5 3:0.5
//! action 1 b 2:1
//! ```
//!
//! `states`, `init` and `goal` are required, `sink` is optional (a fresh
//! absorbing state is appended when missing). Everything after `#` is a
//! comment; blank lines are ignored. Action lines may appear in any
//! order and before or after the header lines.

use crate::model::{Mdp, ModelError, RawAction, RawModel};

/// Parses a model and validates it. All syntax errors are collected
/// first; semantic validation runs only on syntactically clean input.
pub fn parse_model(text: &str) -> Result<Mdp, Vec<ModelError>> {
    let mut errors = Vec::new();
    let mut states: Option<usize> = None;
    let mut init: Option<usize> = None;
    let mut goal: Option<usize> = None;
    let mut sink: Option<usize> = None;
    let mut actions = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };

        let mut syntax = |message: String| {
            errors.push(ModelError::Syntax { line: line_no, message });
        };

        match keyword {
            "states" | "init" | "goal" | "sink" => {
                let Some(value) = tokens.next() else {
                    syntax(format!("`{keyword}` needs a value"));
                    continue;
                };
                if tokens.next().is_some() {
                    syntax(format!("trailing tokens after `{keyword}`"));
                    continue;
                }
                let Ok(value) = value.parse::<usize>() else {
                    syntax(format!("`{keyword}` value {value:?} is not a number"));
                    continue;
                };
                let slot = match keyword {
                    "states" => &mut states,
                    "init" => &mut init,
                    "goal" => &mut goal,
                    _ => &mut sink,
                };
                if slot.is_some() {
                    syntax(format!("duplicate `{keyword}` line"));
                } else {
                    *slot = Some(value);
                }
            }
            "action" => {
                let (Some(state), Some(label)) = (tokens.next(), tokens.next()) else {
                    syntax("`action` needs a state and a label".into());
                    continue;
                };
                let Ok(state) = state.parse::<usize>() else {
                    syntax(format!("action state {state:?} is not a number"));
                    continue;
                };
                let mut entries = Vec::new();
                let mut ok = true;
                for tok in tokens {
                    let Some((succ, prob)) = tok.split_once(':') else {
                        syntax(format!("expected `state:prob`, got {tok:?}"));
                        ok = false;
                        break;
                    };
                    let Ok(succ) = succ.parse::<usize>() else {
                        syntax(format!("successor {succ:?} is not a number"));
                        ok = false;
                        break;
                    };
                    let Ok(prob) = prob.parse::<f64>() else {
                        syntax(format!("probability {prob:?} is not a number"));
                        ok = false;
                        break;
                    };
                    entries.push((succ, prob));
                }
                if ok && entries.is_empty() {
                    syntax("action has no successors".into());
                } else if ok {
                    actions.push(RawAction { state, label: label.to_string(), entries });
                }
            }
            other => syntax(format!("unknown keyword {other:?}")),
        }
    }

    for (key, value) in [("states", &states), ("init", &init), ("goal", &goal)] {
        if value.is_none() {
            errors.push(ModelError::Syntax {
                line: text.lines().count() + 1,
                message: format!("missing `{key}` line"),
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    RawModel {
        states: states.unwrap(),
        init: init.unwrap(),
        goal: goal.unwrap(),
        sink,
        actions,
    }
    .validate()
}

/// Canonical serialisation: header lines, then actions grouped by state
/// in id order. Probabilities are written with 17 significant digits so
/// parsing reproduces the exact bit pattern.
pub fn serialize_model(mdp: &Mdp) -> String {
    let mut out = String::new();
    out.push_str(&format!("states {}\n", mdp.num_states()));
    out.push_str(&format!("init {}\n", mdp.init()));
    out.push_str(&format!("goal {}\n", mdp.goal()));
    out.push_str(&format!("sink {}\n", mdp.sink()));
    for s in 0..mdp.num_states() {
        for action in mdp.actions(crate::model::StateId(s)) {
            debug_assert!(
                !action.label.contains(char::is_whitespace) && !action.label.contains(':'),
                "label {:?} would not survive a round-trip",
                action.label
            );
            out.push_str(&format!("action {s} {}", action.label));
            for &(t, p) in action.distribution.entries() {
                if p == 1.0 {
                    out.push_str(&format!(" {t}:1"));
                } else {
                    out.push_str(&format!(" {t}:{p:.16e}"));
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateId;

    const SMALL: &str = "\
# three-state chain
states 4
init 0
goal 2
sink 3

action 0 go 1:0.25 3:0.75
action 1 go 2:1
";

    #[test]
    fn parses_model_with_comments_and_blanks() {
        let m = parse_model(SMALL).expect("valid");
        assert_eq!(m.num_states(), 4);
        assert_eq!(m.init(), StateId(0));
        assert_eq!(m.actions(StateId(0))[0].distribution.entries().len(), 2);
    }

    #[test]
    fn round_trip_is_identity() {
        let m = parse_model(SMALL).expect("valid");
        let text = serialize_model(&m);
        let m2 = parse_model(&text).expect("valid");
        assert_eq!(m, m2);
    }

    #[test]
    fn round_trip_preserves_awkward_probabilities() {
        let text = "states 3\ninit 0\ngoal 1\nsink 2\naction 0 a 1:0.1 2:0.9\n";
        let m = parse_model(text).expect("valid");
        let m2 = parse_model(&serialize_model(&m)).expect("valid");
        assert_eq!(m, m2);
        let p = m2.actions(StateId(0))[0].distribution.entries()[0].1;
        assert_eq!(p, 0.1);
    }

    #[test]
    fn missing_sink_is_synthesised() {
        let text = "states 2\ninit 0\ngoal 1\naction 0 a 1:0.5 2:0.5\n";
        // State 2 is the implicit sink, referenced before it exists in
        // the declared count; the parser adds it before validation.
        let m = parse_model(text).expect("valid");
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.sink(), StateId(2));
    }

    #[test]
    fn reports_every_syntax_error_with_line_numbers() {
        let text = "states 2\ninit 0\ngoal 1\nactoin 0 a 1:1\naction 0 b 1:x\n";
        let errs = parse_model(text).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(matches!(errs[0], crate::model::ModelError::Syntax { line: 4, .. }));
        assert!(matches!(errs[1], crate::model::ModelError::Syntax { line: 5, .. }));
    }

    #[test]
    fn missing_header_reported() {
        let errs = parse_model("states 2\ngoal 1\naction 0 a 1:1\n").unwrap_err();
        assert!(errs.iter().any(
            |e| matches!(e, crate::model::ModelError::Syntax { message, .. } if message.contains("init"))
        ));
    }

    #[test]
    fn semantic_error_from_parsed_text() {
        let errs = parse_model("states 3\ninit 0\ngoal 1\nsink 2\naction 0 a 1:0.9 2:0.2\n")
            .unwrap_err();
        assert!(matches!(
            errs[0],
            crate::model::ModelError::DistributionSum { state: 0, .. }
        ));
    }
}
