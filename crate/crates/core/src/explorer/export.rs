//! DOT rendering and explicit-format serialization of abstractions.

use std::fmt::Write;

use super::{AbsAction, AbsState, AbstractionMdp, ExploreError};
use crate::numeric::Extended;

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// GraphViz rendering; nodes are labelled with their belief, edges with
/// action, probability and (when non-zero) reward.
pub fn export_dot(abs: &AbstractionMdp) -> String {
    let mut out = String::from("digraph abstraction {\n  rankdir=LR;\n  node [shape=box];\n");
    for (s, state) in abs.states.iter().enumerate() {
        let label = match state {
            AbsState::Belief(b) => b.to_string(),
            AbsState::Cut => "cut".to_string(),
        };
        let mut attrs = format!("label=\"{}\"", escape(&label));
        if s == abs.initial {
            attrs.push_str(", style=bold");
        }
        if abs.goal[s] {
            attrs.push_str(", peripheries=2");
        }
        let _ = writeln!(out, "  n{s} [{attrs}];");
    }
    for (s, choices) in abs.choices.iter().enumerate() {
        for choice in choices {
            let name = abs.action_name(choice.action);
            for b in &choice.branches {
                let mut label = format!("{name}: {}", b.prob);
                if !b.reward.is_zero() {
                    let _ = write!(label, " / {}", b.reward);
                }
                let style = match choice.action {
                    AbsAction::Cut | AbsAction::Clip => ", style=dashed",
                    _ => "",
                };
                let _ = writeln!(
                    out,
                    "  n{s} -> n{} [label=\"{}\"{style}];",
                    b.target,
                    escape(&label)
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Renders the abstraction in the explicit model format, one observation per state.
///
/// Fails on infinite rewards, which the format cannot express.
pub fn serialize_abstraction(abs: &AbstractionMdp) -> Result<String, ExploreError> {
    let mut names: Vec<String> = abs.action_names.clone();
    let mut extra = Vec::new();
    for base in ["goal", "cut", "clip"] {
        let mut name = base.to_string();
        let mut i = 0;
        while names.contains(&name) {
            i += 1;
            name = format!("{base}_{i}");
        }
        names.push(name.clone());
        extra.push(name);
    }
    let name_of = |a: AbsAction| match a {
        AbsAction::Original(i) => names[i].clone(),
        AbsAction::Goal => extra[0].clone(),
        AbsAction::Cut => extra[1].clone(),
        AbsAction::Clip => extra[2].clone(),
    };
    let n = abs.num_states();
    let mut out = String::from("pomdp\n");
    let _ = writeln!(out, "states {n}");
    let _ = writeln!(out, "actions {}", names.join(" "));
    let obs: Vec<String> = (0..n).map(|s| format!("b{s}")).collect();
    let _ = writeln!(out, "observations {}", obs.join(" "));
    let _ = writeln!(out, "init {}", abs.initial);
    for s in 0..n {
        let _ = writeln!(out, "obs {s} b{s}");
    }
    let mut choices: Vec<(usize, String, &super::AbsChoice)> = Vec::new();
    for (s, cs) in abs.choices.iter().enumerate() {
        for c in cs {
            choices.push((s, name_of(c.action), c));
        }
    }
    for (s, name, c) in &choices {
        let mut branches: Vec<_> = c.branches.iter().collect();
        branches.sort_by_key(|b| b.target);
        for b in branches {
            let _ = writeln!(out, "trans {s} {name} {} {}", b.target, b.prob);
        }
    }
    for (s, name, c) in &choices {
        let mut branches: Vec<_> = c.branches.iter().collect();
        branches.sort_by_key(|b| b.target);
        for b in branches {
            match &b.reward {
                Extended::Finite(r) if r == &num::BigRational::from_integer(0.into()) => {}
                Extended::Finite(r) => {
                    let _ = writeln!(out, "reward {s} {name} {} {r}", b.target);
                }
                other => {
                    return Err(ExploreError::Invalid(format!(
                        "reward {other} on state {s} cannot be written in the explicit format"
                    )))
                }
            }
        }
    }
    let goals: Vec<String> = (0..n)
        .filter(|&s| abs.goal[s])
        .map(|s| s.to_string())
        .collect();
    let _ = writeln!(out, "goal {}", goals.join(" "));
    Ok(out)
}
