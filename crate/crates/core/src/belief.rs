//! Beliefs and the belief MDP's transition and reward functions.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{ActionId, ObsId, Pomdp, RewardStructure, StateId};
use crate::numeric::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BeliefError {
    #[error("action {action} is not enabled under observation {observation}")]
    ActionNotEnabled {
        action: ActionId,
        observation: ObsId,
    },
    #[error("observation {observation} has probability 0 after action {action}")]
    Undefined {
        action: ActionId,
        observation: ObsId,
    },
    #[error("invalid belief: {0}")]
    Invalid(String),
}

/// A distribution over states sharing one observation.
///
/// Entries are sorted by state, strictly positive and sum to 1, so derived
/// equality and hashing are exact equality of distributions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief {
    observation: ObsId,
    entries: Vec<(StateId, Rational)>,
}

impl Belief {
    pub fn new(
        pomdp: &Pomdp,
        entries: impl IntoIterator<Item = (StateId, Rational)>,
    ) -> Result<Self, BeliefError> {
        let mut map: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (s, p) in entries {
            if s >= pomdp.num_states() {
                return Err(BeliefError::Invalid(format!("state {s} out of range")));
            }
            if p.is_negative() {
                return Err(BeliefError::Invalid(format!("negative mass on state {s}")));
            }
            *map.entry(s).or_insert_with(Rational::zero) += p;
        }
        map.retain(|_, p| !p.is_zero());
        let total: Rational = map.values().sum();
        if !total.is_one() {
            return Err(BeliefError::Invalid(format!("mass sums to {total}")));
        }
        let mut obs = map.keys().map(|&s| pomdp.obs_of(s));
        let observation = obs.next().expect("non-empty after mass check");
        if obs.any(|z| z != observation) {
            return Err(BeliefError::Invalid(
                "support spans several observations".into(),
            ));
        }
        Ok(Belief {
            observation,
            entries: map.into_iter().collect(),
        })
    }

    pub fn dirac(pomdp: &Pomdp, state: StateId) -> Self {
        Belief {
            observation: pomdp.obs_of(state),
            entries: vec![(state, Rational::one())],
        }
    }

    /// Builds a belief without checking it against a model.
    ///
    /// Entries must be sorted, positive and sum to one.
    pub fn from_sorted(observation: ObsId, entries: Vec<(StateId, Rational)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(_, p)| p.is_positive()));
        debug_assert!(entries.iter().map(|(_, p)| p).sum::<Rational>().is_one());
        Belief {
            observation,
            entries,
        }
    }

    pub fn observation(&self) -> ObsId {
        self.observation
    }

    pub fn entries(&self) -> &[(StateId, Rational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }

    pub fn prob(&self, state: StateId) -> Rational {
        self.entries
            .binary_search_by_key(&state, |(s, _)| *s)
            .map(|i| self.entries[i].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn is_dirac(&self) -> bool {
        self.entries.len() == 1
    }

    /// Canonical textual key; equal keys iff equal distributions.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(s, p)| format!("{s}:{p}"))
            .collect();
        format!("{}|{}", self.observation, parts.join(","))
    }

    /// True iff every component is a multiple of `1/eta`.
    pub fn is_grid(&self, eta: u32) -> bool {
        let eta = num::BigInt::from(eta);
        self.entries
            .iter()
            .map(|(_, p)| p.denom())
            .all(|d| (&eta % d).is_zero())
    }

    pub fn is_goal(&self, goal: &[bool]) -> bool {
        self.support().all(|s| goal[s])
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "s{s}: {p}")?;
        }
        Ok(())
    }
}

pub fn initial_belief(pomdp: &Pomdp) -> Belief {
    Belief::dirac(pomdp, pomdp.mdp().initial())
}

/// One outgoing branch of a belief under an action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeliefTransition {
    pub observation: ObsId,
    pub probability: Rational,
    pub belief: Belief,
    pub reward: Rational,
}

fn check_enabled(pomdp: &Pomdp, b: &Belief, action: ActionId) -> Result<(), BeliefError> {
    let s = b.entries[0].0;
    if pomdp.mdp().is_enabled(s, action) {
        Ok(())
    } else {
        Err(BeliefError::ActionNotEnabled {
            action,
            observation: b.observation,
        })
    }
}

/// All successors of `b` under `action`, one per observation with positive probability,
/// ordered by observation.
pub fn transitions(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    b: &Belief,
    action: ActionId,
) -> Result<Vec<BeliefTransition>, BeliefError> {
    check_enabled(pomdp, b, action)?;
    let mdp = pomdp.mdp();
    let mut mass: BTreeMap<ObsId, (BTreeMap<StateId, Rational>, Rational)> = BTreeMap::new();
    for (s, bs) in &b.entries {
        let choice = mdp.choice(*s, action).expect("enabled by observation");
        for (t, p) in &choice.successors {
            let joint = bs * p;
            let (dist, reward) = mass
                .entry(pomdp.obs_of(*t))
                .or_insert_with(|| (BTreeMap::new(), Rational::zero()));
            let r = rewards.get(*s, action, *t);
            if !r.is_zero() {
                *reward += &joint * r;
            }
            *dist.entry(*t).or_insert_with(Rational::zero) += joint;
        }
    }
    Ok(mass
        .into_iter()
        .map(|(z, (dist, reward))| {
            let probability: Rational = dist.values().sum();
            let entries = dist
                .into_iter()
                .map(|(t, m)| (t, m / &probability))
                .collect();
            BeliefTransition {
                observation: z,
                reward: reward / &probability,
                probability,
                belief: Belief::from_sorted(z, entries),
            }
        })
        .collect())
}

pub fn obs_probability(
    pomdp: &Pomdp,
    b: &Belief,
    action: ActionId,
    observation: ObsId,
) -> Result<Rational, BeliefError> {
    check_enabled(pomdp, b, action)?;
    let mdp = pomdp.mdp();
    let mut total = Rational::zero();
    for (s, bs) in &b.entries {
        for (t, p) in &mdp.choice(*s, action).expect("enabled").successors {
            if pomdp.obs_of(*t) == observation {
                total += bs * p;
            }
        }
    }
    Ok(total)
}

fn branch(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    b: &Belief,
    action: ActionId,
    observation: ObsId,
) -> Result<BeliefTransition, BeliefError> {
    transitions(pomdp, rewards, b, action)?
        .into_iter()
        .find(|t| t.observation == observation)
        .ok_or(BeliefError::Undefined {
            action,
            observation,
        })
}

pub fn successor(
    pomdp: &Pomdp,
    b: &Belief,
    action: ActionId,
    observation: ObsId,
) -> Result<Belief, BeliefError> {
    let zero = RewardStructure::zero(crate::model::RewardSign::Positive);
    branch(pomdp, &zero, b, action, observation).map(|t| t.belief)
}

pub fn belief_reward(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    b: &Belief,
    action: ActionId,
    observation: ObsId,
) -> Result<Rational, BeliefError> {
    branch(pomdp, rewards, b, action, observation).map(|t| t.reward)
}
