//! POMDP data model: transition structure, observations, rewards and goals.

mod format;
mod transform;

use std::collections::{BTreeMap, BTreeSet};

use num::{Signed, Zero};
use thiserror::Error;

use crate::numeric::Rational;

pub use format::{parse_pomdp, serialize_pomdp};
pub use transform::{
    encode_reachability, goals_are_observable, make_goals_observable, negate_rewards,
};

pub type StateId = usize;
pub type ActionId = usize;
pub type ObsId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("state {state}, action {action}: transition row sum {sum} != 1")]
    RowSum {
        state: StateId,
        action: String,
        sum: Rational,
    },
    #[error("state {state}, action {action}: probability {prob} outside (0, 1]")]
    Probability {
        state: StateId,
        action: String,
        prob: Rational,
    },
    #[error("state {0} has no enabled action")]
    NoEnabledAction(StateId),
    #[error(
        "observation {observation}: states {first} and {second} enable different actions \
         (same observation requires identical enabled actions)"
    )]
    ObservationActions {
        observation: String,
        first: StateId,
        second: StateId,
    },
    #[error("reward structure mixes positive and negative rewards")]
    MixedSigns,
    #[error("reward on ({state}, {action}, {target}) which is not a transition")]
    RewardWithoutTransition {
        state: StateId,
        action: String,
        target: StateId,
    },
    #[error("state {0} out of range")]
    StateOutOfRange(StateId),
    #[error("{0}")]
    Invalid(String),
}

/// One enabled action of a state with its successor distribution, sorted by successor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub action: ActionId,
    pub successors: Vec<(StateId, Rational)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mdp {
    actions: Vec<String>,
    choices: Vec<Vec<Choice>>,
    initial: StateId,
}

impl Mdp {
    /// Validates and normalises the transition structure.
    ///
    /// Choices are sorted by action, successors by state; duplicate successors are merged.
    pub fn new(
        actions: Vec<String>,
        choices: Vec<Vec<Choice>>,
        initial: StateId,
    ) -> Result<Self, ModelError> {
        let n = choices.len();
        if initial >= n {
            return Err(ModelError::StateOutOfRange(initial));
        }
        let mut normalised = Vec::with_capacity(n);
        for (state, state_choices) in choices.into_iter().enumerate() {
            if state_choices.is_empty() {
                return Err(ModelError::NoEnabledAction(state));
            }
            let mut by_action: BTreeMap<ActionId, BTreeMap<StateId, Rational>> = BTreeMap::new();
            for choice in state_choices {
                if choice.action >= actions.len() {
                    return Err(ModelError::Invalid(format!(
                        "state {state}: action index {} out of range",
                        choice.action
                    )));
                }
                if by_action.contains_key(&choice.action) {
                    return Err(ModelError::Invalid(format!(
                        "state {state}: action {} listed twice",
                        actions[choice.action]
                    )));
                }
                let row = by_action.entry(choice.action).or_default();
                for (target, prob) in choice.successors {
                    if target >= n {
                        return Err(ModelError::StateOutOfRange(target));
                    }
                    *row.entry(target).or_insert_with(Rational::zero) += prob;
                }
            }
            let mut out = Vec::with_capacity(by_action.len());
            for (action, row) in by_action {
                let mut sum = Rational::zero();
                for prob in row.values() {
                    if !prob.is_positive() || *prob > Rational::from_integer(1.into()) {
                        return Err(ModelError::Probability {
                            state,
                            action: actions[action].clone(),
                            prob: prob.clone(),
                        });
                    }
                    sum += prob;
                }
                if sum != Rational::from_integer(1.into()) {
                    return Err(ModelError::RowSum {
                        state,
                        action: actions[action].clone(),
                        sum,
                    });
                }
                out.push(Choice {
                    action,
                    successors: row.into_iter().collect(),
                });
            }
            normalised.push(out);
        }
        Ok(Mdp {
            actions,
            choices: normalised,
            initial,
        })
    }

    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn choices(&self, state: StateId) -> &[Choice] {
        &self.choices[state]
    }

    pub fn choice(&self, state: StateId, action: ActionId) -> Option<&Choice> {
        self.choices[state]
            .binary_search_by_key(&action, |c| c.action)
            .ok()
            .map(|i| &self.choices[state][i])
    }

    pub fn enabled(&self, state: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.choices[state].iter().map(|c| c.action)
    }

    pub fn is_enabled(&self, state: StateId, action: ActionId) -> bool {
        self.choice(state, action).is_some()
    }

    pub fn probability(&self, state: StateId, action: ActionId, target: StateId) -> Rational {
        self.choice(state, action)
            .and_then(|c| {
                c.successors
                    .binary_search_by_key(&target, |(t, _)| *t)
                    .ok()
                    .map(|i| c.successors[i].1.clone())
            })
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pomdp {
    mdp: Mdp,
    observations: Vec<String>,
    obs_of: Vec<ObsId>,
    classes: Vec<Vec<StateId>>,
}

impl Pomdp {
    pub fn new(
        mdp: Mdp,
        observations: Vec<String>,
        obs_of: Vec<ObsId>,
    ) -> Result<Self, ModelError> {
        if obs_of.len() != mdp.num_states() {
            return Err(ModelError::Invalid(format!(
                "{} observation labels for {} states",
                obs_of.len(),
                mdp.num_states()
            )));
        }
        let mut classes = vec![Vec::new(); observations.len()];
        for (state, &z) in obs_of.iter().enumerate() {
            if z >= observations.len() {
                return Err(ModelError::Invalid(format!(
                    "state {state}: observation index {z} out of range"
                )));
            }
            classes[z].push(state);
        }
        for (z, class) in classes.iter().enumerate() {
            if let Some((&first, rest)) = class.split_first() {
                let reference: Vec<_> = mdp.enabled(first).collect();
                for &other in rest {
                    if !mdp.enabled(other).eq(reference.iter().copied()) {
                        return Err(ModelError::ObservationActions {
                            observation: observations[z].clone(),
                            first,
                            second: other,
                        });
                    }
                }
            }
        }
        Ok(Pomdp {
            mdp,
            observations,
            obs_of,
            classes,
        })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn observation_index(&self, name: &str) -> Option<ObsId> {
        self.observations.iter().position(|o| o == name)
    }

    pub fn obs_of(&self, state: StateId) -> ObsId {
        self.obs_of[state]
    }

    pub fn states_of(&self, observation: ObsId) -> &[StateId] {
        &self.classes[observation]
    }

    /// Largest number of states sharing an observation.
    pub fn max_obs_class(&self) -> usize {
        self.classes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Actions enabled under an observation, `None` if no state carries it.
    pub fn enabled_for_obs(&self, observation: ObsId) -> Option<Vec<ActionId>> {
        self.classes[observation]
            .first()
            .map(|&s| self.mdp.enabled(s).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RewardSign {
    Positive,
    Negative,
}

impl RewardSign {
    pub fn is_positive(self) -> bool {
        self == RewardSign::Positive
    }

    pub fn flipped(self) -> Self {
        match self {
            RewardSign::Positive => RewardSign::Negative,
            RewardSign::Negative => RewardSign::Positive,
        }
    }
}

/// Transition rewards; absent entries are zero and zero entries are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardStructure {
    rewards: BTreeMap<(StateId, ActionId, StateId), Rational>,
    sign: RewardSign,
}

impl RewardStructure {
    pub fn zero(sign: RewardSign) -> Self {
        RewardStructure {
            rewards: BTreeMap::new(),
            sign,
        }
    }

    /// Builds a structure, inferring the sign; an all-zero structure counts as positive.
    pub fn from_entries(
        entries: impl IntoIterator<Item = ((StateId, ActionId, StateId), Rational)>,
    ) -> Result<Self, ModelError> {
        let mut rewards = BTreeMap::new();
        let (mut pos, mut neg) = (false, false);
        for (key, value) in entries {
            if value.is_zero() {
                continue;
            }
            pos |= value.is_positive();
            neg |= value.is_negative();
            rewards.insert(key, value);
        }
        if pos && neg {
            return Err(ModelError::MixedSigns);
        }
        let sign = if neg {
            RewardSign::Negative
        } else {
            RewardSign::Positive
        };
        Ok(RewardStructure { rewards, sign })
    }

    pub fn with_sign(mut self, sign: RewardSign) -> Result<Self, ModelError> {
        let conflicting = self.rewards.values().any(|v| match sign {
            RewardSign::Positive => v.is_negative(),
            RewardSign::Negative => v.is_positive(),
        });
        if conflicting {
            return Err(ModelError::MixedSigns);
        }
        self.sign = sign;
        Ok(self)
    }

    pub fn sign(&self) -> RewardSign {
        self.sign
    }

    pub fn get(&self, state: StateId, action: ActionId, target: StateId) -> Rational {
        self.rewards
            .get(&(state, action, target))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(StateId, ActionId, StateId), &Rational)> {
        self.rewards.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Checks that every reward sits on an existing transition.
    pub fn check_against(&self, mdp: &Mdp) -> Result<(), ModelError> {
        for &(s, a, t) in self.rewards.keys() {
            if s >= mdp.num_states()
                || a >= mdp.actions().len()
                || mdp.probability(s, a, t).is_zero()
            {
                return Err(ModelError::RewardWithoutTransition {
                    state: s,
                    action: mdp
                        .actions()
                        .get(a)
                        .cloned()
                        .unwrap_or_else(|| a.to_string()),
                    target: t,
                });
            }
        }
        Ok(())
    }
}

/// Goal observations; a state is a goal iff its observation is listed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalSpec {
    pub goal_observations: BTreeSet<ObsId>,
}

impl GoalSpec {
    pub fn goal_states(&self, pomdp: &Pomdp) -> Vec<bool> {
        (0..pomdp.num_states())
            .map(|s| self.goal_observations.contains(&pomdp.obs_of(s)))
            .collect()
    }
}

/// Goals as written in a model file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalDecl {
    Observations(BTreeSet<ObsId>),
    States(BTreeSet<StateId>),
}

impl GoalDecl {
    pub fn goal_states(&self, pomdp: &Pomdp) -> Vec<bool> {
        match self {
            GoalDecl::Observations(obs) => GoalSpec {
                goal_observations: obs.clone(),
            }
            .goal_states(pomdp),
            GoalDecl::States(states) => (0..pomdp.num_states())
                .map(|s| states.contains(&s))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PomdpModel {
    pub pomdp: Pomdp,
    pub rewards: RewardStructure,
    pub goal: Option<GoalDecl>,
}
