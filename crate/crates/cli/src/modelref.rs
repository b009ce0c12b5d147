//! Model references: every place the CLI takes a model accepts either
//! a path to a model file or a generator expression, so experiments
//! are reproducible from the command line alone.
//!
//! ```text
//! ref  := path
//!       | "upper-trap"
//!       | "adversary(" segments "," advance-probability ")"
//!       | "random(" states "," max-actions "," max-branching "," ec-density "," seed ")"
//!       | "branch(" ref "," ref ")"
//!       | "compose(" ref "," ref [ "," ("first" | "either") ] ")"
//! ```
//!
//! Anything that does not look like a generator expression is treated
//! as a file path.

use std::path::Path;

use reachmc_core::benchgen::{
    branch_compose, gen_adversary, gen_random_mdp, gen_upper_trap, parallel_compose,
    AdversaryParams, GoalRule,
};
use reachmc_core::{Mdp, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelRefError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {count} model error(s), first: {first}")]
    Model { path: String, count: usize, first: ModelError },
    #[error("bad model reference `{spec}`: {reason}")]
    Spec { spec: String, reason: String },
}

/// Loads a model from a reference, with `default_rule` applied to
/// `compose(a,b)` expressions that do not name a rule themselves.
pub fn load_model(spec: &str, default_rule: GoalRule) -> Result<Mdp, ModelRefError> {
    let spec = spec.trim();
    if spec == "upper-trap" || generator_head(spec).is_some() {
        return parse_generator(spec, default_rule);
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|source| ModelRefError::Io { path: spec.to_string(), source })?;
    reachmc_core::format::parse_model(&text).map_err(|errors| ModelRefError::Model {
        path: spec.to_string(),
        count: errors.len(),
        first: errors.into_iter().next().expect("at least one error"),
    })
}

/// Returns `(head, args)` when the reference looks like `head(...)`
/// with a known generator head.
fn generator_head(spec: &str) -> Option<(&str, &str)> {
    let open = spec.find('(')?;
    let head = &spec[..open];
    if !matches!(head, "adversary" | "random" | "branch" | "compose") {
        return None;
    }
    if !spec.ends_with(')') {
        return None;
    }
    Some((head, &spec[open + 1..spec.len() - 1]))
}

/// Splits at commas that are not nested inside parentheses.
fn split_args(args: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in args.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(args[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(args[start..].trim());
    out
}

fn parse_generator(spec: &str, default_rule: GoalRule) -> Result<Mdp, ModelRefError> {
    let bad = |reason: &str| ModelRefError::Spec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    if spec == "upper-trap" {
        return Ok(gen_upper_trap());
    }
    let (head, args) = generator_head(spec).ok_or_else(|| bad("unbalanced parentheses"))?;
    let parts = split_args(args);
    let num = |s: &str, what: &str| -> Result<f64, ModelRefError> {
        s.parse::<f64>().map_err(|_| bad(&format!("{what}: `{s}` is not a number")))
    };
    let int = |s: &str, what: &str| -> Result<usize, ModelRefError> {
        s.parse::<usize>().map_err(|_| bad(&format!("{what}: `{s}` is not an integer")))
    };
    match head {
        "adversary" => {
            if parts.len() != 2 {
                return Err(bad("adversary takes (segments, advance-probability)"));
            }
            let segments = int(parts[0], "segments")?;
            let p = num(parts[1], "advance probability")?;
            if segments < 1 {
                return Err(bad("segments must be at least 1"));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(bad("advance probability must be in (0, 1)"));
            }
            Ok(gen_adversary(&AdversaryParams { segments, advance_probability: p }))
        }
        "random" => {
            if parts.len() != 5 {
                return Err(bad(
                    "random takes (states, max-actions, max-branching, ec-density, seed)",
                ));
            }
            let states = int(parts[0], "states")?;
            let max_actions = int(parts[1], "max-actions")?;
            let max_branching = int(parts[2], "max-branching")?;
            let density = num(parts[3], "ec-density")?;
            let seed = parts[4]
                .parse::<u64>()
                .map_err(|_| bad(&format!("seed: `{}` is not an integer", parts[4])))?;
            if states < 3 {
                return Err(bad("states must be at least 3"));
            }
            if max_actions < 1 || max_branching < 1 {
                return Err(bad("max-actions and max-branching must be at least 1"));
            }
            if !(0.0..=1.0).contains(&density) {
                return Err(bad("ec-density must be in [0, 1]"));
            }
            Ok(gen_random_mdp(states, max_actions, max_branching, density, seed))
        }
        "branch" => {
            if parts.len() != 2 {
                return Err(bad("branch takes (ref, ref)"));
            }
            let a = load_model(parts[0], default_rule)?;
            let b = load_model(parts[1], default_rule)?;
            Ok(branch_compose(&a, &b))
        }
        "compose" => {
            let rule = match parts.len() {
                2 => default_rule,
                3 => match parts[2] {
                    "first" => GoalRule::FirstComponent,
                    "either" => GoalRule::EitherComponent,
                    other => return Err(bad(&format!("unknown goal rule `{other}`"))),
                },
                _ => return Err(bad("compose takes (ref, ref[, first|either])")),
            };
            let a = load_model(parts[0], default_rule)?;
            let b = load_model(parts[1], default_rule)?;
            Ok(parallel_compose(&a, &b, rule))
        }
        _ => unreachable!("generator_head filtered the heads"),
    }
}

/// True when the reference names a generator rather than a file.
pub fn is_generator(spec: &str) -> bool {
    let spec = spec.trim();
    spec == "upper-trap" || generator_head(spec).is_some()
}

/// Writes a model file; used by the `generate` subcommand.
pub fn write_model(mdp: &Mdp, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, reachmc_core::format::serialize_model(mdp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_generators_load() {
        let m = load_model("adversary(3, 0.01)", GoalRule::FirstComponent).unwrap();
        assert_eq!(m.num_states(), 5);
        let m = load_model("upper-trap", GoalRule::FirstComponent).unwrap();
        assert_eq!(m.num_states(), 4);
        let m = load_model("random(12,2,3,0.2,7)", GoalRule::FirstComponent).unwrap();
        assert_eq!(m.num_states(), 12);
    }

    #[test]
    fn nested_references_compose() {
        let m = load_model(
            "branch(adversary(2,0.5), compose(upper-trap, upper-trap, either))",
            GoalRule::FirstComponent,
        )
        .unwrap();
        let direct = {
            let a = gen_adversary(&AdversaryParams { segments: 2, advance_probability: 0.5 });
            let b =
                parallel_compose(&gen_upper_trap(), &gen_upper_trap(), GoalRule::EitherComponent);
            branch_compose(&a, &b)
        };
        assert_eq!(m, direct);
    }

    #[test]
    fn default_rule_fills_bare_compose() {
        let with = load_model("compose(upper-trap,upper-trap,first)", GoalRule::EitherComponent);
        let bare = load_model("compose(upper-trap,upper-trap)", GoalRule::FirstComponent);
        assert_eq!(with.unwrap(), bare.unwrap());
    }

    #[test]
    fn bad_specs_are_rejected() {
        for spec in [
            "adversary(0, 0.5)",
            "adversary(3, 1.5)",
            "adversary(3)",
            "random(2,1,1,0.0,1)",
            "random(10,1,1,2.0,1)",
            "compose(upper-trap,upper-trap,sometimes)",
            "branch(upper-trap)",
            "adversary(x, 0.5)",
        ] {
            assert!(
                matches!(
                    load_model(spec, GoalRule::FirstComponent),
                    Err(ModelRefError::Spec { .. })
                ),
                "{spec} should be rejected"
            );
        }
    }

    #[test]
    fn files_round_trip() {
        let m = gen_random_mdp(15, 2, 3, 0.2, 3);
        let dir = std::env::temp_dir().join("reachmc-modelref-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.mdp");
        write_model(&m, &path).unwrap();
        let loaded = load_model(path.to_str().unwrap(), GoalRule::FirstComponent).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_model("/nonexistent/model.mdp", GoalRule::FirstComponent),
            Err(ModelRefError::Io { .. })
        ));
    }
}
