//! Line-oriented explicit text format.
//!
//! ```text
//! pomdp
//! states 3
//! actions alpha beta
//! observations white orange
//! init 0
//! obs 0 white
//! trans 0 alpha 1 1/2
//! reward 1 beta 2 1
//! goal-obs orange
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use num::Zero;

use super::{Choice, GoalDecl, Mdp, ModelError, Pomdp, PomdpModel, RewardStructure, StateId};
use crate::numeric::{parse_rational, Rational};

fn syntax(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        message: message.into(),
    }
}

struct Parser {
    num_states: Option<usize>,
    actions: Option<Vec<String>>,
    observations: Option<Vec<String>>,
    initial: Option<StateId>,
    obs_of: BTreeMap<StateId, usize>,
    trans: BTreeMap<(StateId, usize), BTreeMap<StateId, Rational>>,
    rewards: BTreeMap<(StateId, usize, StateId), (Rational, usize)>,
    goal: Option<GoalDecl>,
}

impl Parser {
    fn state(&self, line: usize, token: &str) -> Result<StateId, ModelError> {
        let n = self
            .num_states
            .ok_or_else(|| syntax(line, "`states` must precede state references"))?;
        let s: StateId = token
            .parse()
            .map_err(|_| syntax(line, format!("invalid state `{token}`")))?;
        if s >= n {
            return Err(syntax(line, format!("state {s} out of range (0..{n})")));
        }
        Ok(s)
    }

    fn action(&self, line: usize, token: &str) -> Result<usize, ModelError> {
        self.actions
            .as_ref()
            .ok_or_else(|| syntax(line, "`actions` must precede transitions"))?
            .iter()
            .position(|a| a == token)
            .ok_or_else(|| syntax(line, format!("unknown action `{token}`")))
    }

    fn observation(&self, line: usize, token: &str) -> Result<usize, ModelError> {
        self.observations
            .as_ref()
            .ok_or_else(|| syntax(line, "`observations` must precede their use"))?
            .iter()
            .position(|o| o == token)
            .ok_or_else(|| syntax(line, format!("unknown observation `{token}`")))
    }

    fn names(line: usize, keyword: &str, rest: &[&str]) -> Result<Vec<String>, ModelError> {
        if rest.is_empty() {
            return Err(syntax(line, format!("`{keyword}` needs at least one name")));
        }
        let mut seen = BTreeSet::new();
        for name in rest {
            if !seen.insert(*name) {
                return Err(syntax(line, format!("duplicate name `{name}`")));
            }
        }
        Ok(rest.iter().map(|s| s.to_string()).collect())
    }

    fn line(&mut self, line: usize, tokens: &[&str]) -> Result<(), ModelError> {
        let (keyword, rest) = tokens.split_first().expect("non-empty line");
        let arity = |n: usize| -> Result<(), ModelError> {
            if rest.len() != n {
                Err(syntax(line, format!("`{keyword}` expects {n} arguments")))
            } else {
                Ok(())
            }
        };
        match *keyword {
            "states" => {
                arity(1)?;
                if self.num_states.is_some() {
                    return Err(syntax(line, "`states` given twice"));
                }
                let n: usize = rest[0]
                    .parse()
                    .map_err(|_| syntax(line, "invalid state count"))?;
                if n == 0 {
                    return Err(syntax(line, "a model needs at least one state"));
                }
                self.num_states = Some(n);
            }
            "actions" => {
                if self.actions.is_some() {
                    return Err(syntax(line, "`actions` given twice"));
                }
                self.actions = Some(Self::names(line, keyword, rest)?);
            }
            "observations" => {
                if self.observations.is_some() {
                    return Err(syntax(line, "`observations` given twice"));
                }
                self.observations = Some(Self::names(line, keyword, rest)?);
            }
            "init" => {
                arity(1)?;
                if self.initial.is_some() {
                    return Err(syntax(line, "`init` given twice"));
                }
                self.initial = Some(self.state(line, rest[0])?);
            }
            "obs" => {
                arity(2)?;
                let s = self.state(line, rest[0])?;
                let z = self.observation(line, rest[1])?;
                if self.obs_of.insert(s, z).is_some() {
                    return Err(syntax(
                        line,
                        format!("observation of state {s} given twice"),
                    ));
                }
            }
            "trans" => {
                arity(4)?;
                let s = self.state(line, rest[0])?;
                let a = self.action(line, rest[1])?;
                let t = self.state(line, rest[2])?;
                let p = parse_rational(rest[3])
                    .ok_or_else(|| syntax(line, format!("invalid probability `{}`", rest[3])))?;
                if p <= Rational::zero() || p > Rational::from_integer(1.into()) {
                    return Err(syntax(line, format!("probability {p} outside (0, 1]")));
                }
                let row = self.trans.entry((s, a)).or_default();
                if row.insert(t, p).is_some() {
                    return Err(syntax(
                        line,
                        format!("duplicate transition {s} {} {t}", rest[1]),
                    ));
                }
            }
            "reward" => {
                arity(4)?;
                let s = self.state(line, rest[0])?;
                let a = self.action(line, rest[1])?;
                let t = self.state(line, rest[2])?;
                let r = parse_rational(rest[3])
                    .ok_or_else(|| syntax(line, format!("invalid reward `{}`", rest[3])))?;
                if self.rewards.insert((s, a, t), (r, line)).is_some() {
                    return Err(syntax(
                        line,
                        format!("duplicate reward {s} {} {t}", rest[1]),
                    ));
                }
            }
            "goal-obs" => {
                if self.goal.is_some() {
                    return Err(syntax(line, "goals declared twice"));
                }
                if rest.is_empty() {
                    return Err(syntax(line, "`goal-obs` needs at least one observation"));
                }
                let set = rest
                    .iter()
                    .map(|o| self.observation(line, o))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                self.goal = Some(GoalDecl::Observations(set));
            }
            "goal" => {
                if self.goal.is_some() {
                    return Err(syntax(line, "goals declared twice"));
                }
                if rest.is_empty() {
                    return Err(syntax(line, "`goal` needs at least one state"));
                }
                let set = rest
                    .iter()
                    .map(|s| self.state(line, s))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                self.goal = Some(GoalDecl::States(set));
            }
            "pomdp" => return Err(syntax(line, "header `pomdp` repeated")),
            other => return Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
        Ok(())
    }

    fn finish(self, last_line: usize) -> Result<PomdpModel, ModelError> {
        let n = self
            .num_states
            .ok_or_else(|| syntax(last_line, "missing `states`"))?;
        let actions = self
            .actions
            .ok_or_else(|| syntax(last_line, "missing `actions`"))?;
        let observations = self
            .observations
            .ok_or_else(|| syntax(last_line, "missing `observations`"))?;
        let initial = self
            .initial
            .ok_or_else(|| syntax(last_line, "missing `init`"))?;
        let mut obs_of = Vec::with_capacity(n);
        for s in 0..n {
            obs_of.push(
                *self
                    .obs_of
                    .get(&s)
                    .ok_or_else(|| syntax(last_line, format!("state {s} has no observation")))?,
            );
        }
        let mut choices = vec![Vec::new(); n];
        for ((s, a), row) in self.trans {
            choices[s].push(Choice {
                action: a,
                successors: row.into_iter().collect(),
            });
        }
        let mdp = Mdp::new(actions, choices, initial)?;
        for (&(s, a, t), (_, line)) in &self.rewards {
            if mdp.probability(s, a, t).is_zero() {
                return Err(syntax(
                    *line,
                    format!(
                        "reward on {s} {} {t}, which is not a transition",
                        mdp.actions()[a]
                    ),
                ));
            }
        }
        let rewards =
            RewardStructure::from_entries(self.rewards.into_iter().map(|(k, (r, _))| (k, r)))?;
        let pomdp = Pomdp::new(mdp, observations, obs_of)?;
        Ok(PomdpModel {
            pomdp,
            rewards,
            goal: self.goal,
        })
    }
}

pub fn parse_pomdp(text: &str) -> Result<PomdpModel, ModelError> {
    let mut parser = Parser {
        num_states: None,
        actions: None,
        observations: None,
        initial: None,
        obs_of: BTreeMap::new(),
        trans: BTreeMap::new(),
        rewards: BTreeMap::new(),
        goal: None,
    };
    let mut header = false;
    let mut last_line = 0;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !header {
            if tokens != ["pomdp"] {
                return Err(syntax(line, "expected header `pomdp`"));
            }
            header = true;
            continue;
        }
        parser.line(line, &tokens)?;
    }
    if !header {
        return Err(syntax(last_line.max(1), "empty document"));
    }
    parser.finish(last_line)
}

/// Deterministic rendering; `parse_pomdp` inverts it exactly.
pub fn serialize_pomdp(model: &PomdpModel) -> String {
    let pomdp = &model.pomdp;
    let mdp = pomdp.mdp();
    let mut out = String::new();
    out.push_str("pomdp\n");
    let _ = writeln!(out, "states {}", mdp.num_states());
    let _ = writeln!(out, "actions {}", mdp.actions().join(" "));
    let _ = writeln!(out, "observations {}", pomdp.observations().join(" "));
    let _ = writeln!(out, "init {}", mdp.initial());
    for s in 0..mdp.num_states() {
        let _ = writeln!(out, "obs {s} {}", pomdp.observations()[pomdp.obs_of(s)]);
    }
    for s in 0..mdp.num_states() {
        for choice in mdp.choices(s) {
            for (t, p) in &choice.successors {
                let _ = writeln!(out, "trans {s} {} {t} {p}", mdp.actions()[choice.action]);
            }
        }
    }
    for (&(s, a, t), r) in model.rewards.entries() {
        let _ = writeln!(out, "reward {s} {} {t} {r}", mdp.actions()[a]);
    }
    match &model.goal {
        Some(GoalDecl::Observations(obs)) => {
            let names: Vec<&str> = obs
                .iter()
                .map(|&z| pomdp.observations()[z].as_str())
                .collect();
            let _ = writeln!(out, "goal-obs {}", names.join(" "));
        }
        Some(GoalDecl::States(states)) => {
            let ids: Vec<String> = states.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "goal {}", ids.join(" "));
        }
        None => {}
    }
    out
}
