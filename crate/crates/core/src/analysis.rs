//! Analysis of the fully observable underlying MDP: minimal and maximal
//! values, the heuristic observation-based policy, and cut-off values.

use crate::belief::Belief;
use crate::mdp::{self, ChoiceModel, MdpError};
use crate::model::{ActionId, Pomdp, RewardStructure};
use crate::numeric::{Extended, Rational};

/// Default size up to which values are computed exactly.
pub const EXACT_LIMIT: usize = 10_000;
const ITERATIVE_PRECISION: f64 = 1e-8;
const ITERATION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Min,
    Max,
    Policy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateValues {
    pub values: Vec<Extended>,
    pub kind: ValueKind,
    /// False when the values come from value iteration.
    pub exact: bool,
}

impl StateValues {
    pub fn get(&self, state: usize) -> &Extended {
        &self.values[state]
    }
}

/// Deterministic memoryless observation-based policy; `None` for observations without states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemorylessObsPolicy {
    pub choice: Vec<Option<ActionId>>,
}

impl MemorylessObsPolicy {
    pub fn action(&self, pomdp: &Pomdp, state: usize) -> ActionId {
        self.choice[pomdp.obs_of(state)].expect("policy defined on observed states")
    }

    /// Checks that each chosen action is enabled under its observation.
    pub fn is_valid(&self, pomdp: &Pomdp) -> bool {
        (0..pomdp.num_observations()).all(|z| match pomdp.enabled_for_obs(z) {
            Some(enabled) => self.choice[z].is_some_and(|a| enabled.contains(&a)),
            None => true,
        })
    }
}

fn solve_max(model: &ChoiceModel, limit: usize) -> Result<(Vec<Extended>, bool), MdpError> {
    if model.num_states() <= limit {
        return Ok((mdp::solve_max_exact(model)?.values, true));
    }
    let qual = mdp::analyse(model);
    let sol = mdp::value_iteration(model, &qual, ITERATIVE_PRECISION, ITERATION_CAP)?;
    let values = (0..model.num_states())
        .map(|s| {
            qual.fixed[s]
                .clone()
                .unwrap_or_else(|| Extended::from_f64(sol.values[s]).expect("finite iterate"))
        })
        .collect();
    Ok((values, false))
}

/// Minimal expected total reward until the goal in the underlying MDP.
pub fn min_expected_reward(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    goal: &[bool],
) -> Result<StateValues, MdpError> {
    let model = ChoiceModel::from_mdp(pomdp.mdp(), rewards, goal).negated();
    let (values, exact) = solve_max(&model, EXACT_LIMIT)?;
    Ok(StateValues {
        values: values.into_iter().map(|v| -v).collect(),
        kind: ValueKind::Min,
        exact,
    })
}

/// Maximal expected total reward until the goal in the underlying MDP.
pub fn max_expected_reward(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    goal: &[bool],
) -> Result<StateValues, MdpError> {
    let model = ChoiceModel::from_mdp(pomdp.mdp(), rewards, goal);
    let (values, exact) = solve_max(&model, EXACT_LIMIT)?;
    Ok(StateValues {
        values,
        kind: ValueKind::Max,
        exact,
    })
}

/// Per observation, the action with the best unweighted mean of optimal
/// underlying-MDP Q-values; ties go to the smallest action index.
pub fn heuristic_policy(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    goal: &[bool],
) -> Result<MemorylessObsPolicy, MdpError> {
    let model = ChoiceModel::from_mdp(pomdp.mdp(), rewards, goal);
    let max = max_expected_reward(pomdp, rewards, goal)?;
    let mdp = pomdp.mdp();
    let choice = (0..pomdp.num_observations())
        .map(|z| {
            let states = pomdp.states_of(z);
            let enabled = pomdp.enabled_for_obs(z)?;
            let weight = Rational::new(1.into(), states.len().into());
            let mut best: Option<(ActionId, Extended)> = None;
            for action in enabled {
                let mut mean = Extended::zero();
                for &s in states {
                    let c = mdp.choices(s).iter().position(|c| c.action == action)?;
                    mean = &mean + &model.q_value(s, c, &max.values).scale(&weight);
                }
                if best.as_ref().is_none_or(|(_, v)| mean > *v) {
                    best = Some((action, mean));
                }
            }
            best.map(|(a, _)| a)
        })
        .collect();
    Ok(MemorylessObsPolicy { choice })
}

/// Expected total reward of the chain induced by an observation-based policy.
pub fn evaluate_policy(
    pomdp: &Pomdp,
    policy: &MemorylessObsPolicy,
    rewards: &RewardStructure,
    goal: &[bool],
) -> Result<StateValues, MdpError> {
    let model = ChoiceModel::from_mdp(pomdp.mdp(), rewards, goal);
    let mdp = pomdp.mdp();
    let choices: Vec<Option<usize>> = (0..pomdp.num_states())
        .map(|s| {
            let action = policy.choice[pomdp.obs_of(s)]?;
            mdp.choices(s).iter().position(|c| c.action == action)
        })
        .collect();
    for s in 0..pomdp.num_states() {
        if !goal[s] && choices[s].is_none() {
            return Err(MdpError::MissingChoice(s));
        }
    }
    let chain = model.restrict(&choices)?;
    let single: Vec<Option<usize>> = (0..chain.num_states()).map(|_| Some(0)).collect();
    let (values, exact) = if chain.num_states() <= EXACT_LIMIT {
        (mdp::chain_values(&chain, &single, &[])?, true)
    } else {
        solve_max(&chain, 0)?
    };
    Ok(StateValues {
        values,
        kind: ValueKind::Policy,
        exact,
    })
}

/// Cut-off reward of a belief: the belief-weighted state values.
pub fn cutoff_value(b: &Belief, values: &StateValues) -> Extended {
    let mut total = Extended::zero();
    for (s, p) in b.entries() {
        total = &total + &values.values[*s].scale(p);
    }
    total
}
