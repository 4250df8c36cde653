//! Model transformations: goal observability, reachability rewards, negation.

use std::collections::{BTreeMap, BTreeSet};

use super::{Choice, GoalSpec, Mdp, ModelError, ObsId, Pomdp, RewardStructure, StateId};
use crate::numeric::{rint, Rational};

fn fresh_name(taken: &[String], base: &str) -> String {
    if !taken.iter().any(|t| t == base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|name| !taken.iter().any(|t| t == name))
        .expect("unbounded search")
}

/// Goal observations if every observation is either all-goal or goal-free.
pub fn goals_are_observable(pomdp: &Pomdp, goal: &[bool]) -> Option<BTreeSet<ObsId>> {
    let mut obs = BTreeSet::new();
    for z in 0..pomdp.num_observations() {
        let states = pomdp.states_of(z);
        let goals = states.iter().filter(|&&s| goal[s]).count();
        if goals == 0 {
            continue;
        }
        if goals != states.len() {
            return None;
        }
        obs.insert(z);
    }
    Some(obs)
}

/// Makes goal states observable.
///
/// Each goal state is replaced by a copy carrying a fresh goal observation and
/// a single zero-reward `goal` self-loop; transitions into the goal keep their
/// reward. If the goals already coincide with a set of observations, only the
/// labelling is returned.
pub fn make_goals_observable(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    goal: &[bool],
) -> Result<(Pomdp, RewardStructure, GoalSpec), ModelError> {
    if goal.len() != pomdp.num_states() {
        return Err(ModelError::Invalid("goal vector length mismatch".into()));
    }
    if !goal.iter().any(|&g| g) {
        return Err(ModelError::Invalid("goal set is empty".into()));
    }
    if let Some(goal_observations) = goals_are_observable(pomdp, goal) {
        return Ok((
            pomdp.clone(),
            rewards.clone(),
            GoalSpec { goal_observations },
        ));
    }

    let mdp = pomdp.mdp();
    let n = mdp.num_states();
    let kept: Vec<StateId> = (0..n).filter(|&s| !goal[s]).collect();
    let copies: Vec<StateId> = (0..n).filter(|&s| goal[s]).collect();
    let mut index = vec![0; n];
    for (i, &s) in kept.iter().enumerate() {
        index[s] = i;
    }
    for (i, &s) in copies.iter().enumerate() {
        index[s] = kept.len() + i;
    }

    let mut actions = mdp.actions().to_vec();
    let goal_action = actions.len();
    actions.push(fresh_name(mdp.actions(), "goal"));
    let mut observations = pomdp.observations().to_vec();
    let goal_obs = observations.len();
    observations.push(fresh_name(pomdp.observations(), "goal"));

    let mut choices = Vec::with_capacity(n);
    let mut obs_of = Vec::with_capacity(n);
    let mut new_rewards = BTreeMap::new();
    for &s in &kept {
        let mut state_choices = Vec::new();
        for choice in mdp.choices(s) {
            let successors = choice
                .successors
                .iter()
                .map(|(t, p)| (index[*t], p.clone()))
                .collect();
            for (t, _) in &choice.successors {
                let r = rewards.get(s, choice.action, *t);
                new_rewards.insert((index[s], choice.action, index[*t]), r);
            }
            state_choices.push(Choice {
                action: choice.action,
                successors,
            });
        }
        choices.push(state_choices);
        obs_of.push(pomdp.obs_of(s));
    }
    for &s in &copies {
        choices.push(vec![Choice {
            action: goal_action,
            successors: vec![(index[s], rint(1))],
        }]);
        obs_of.push(goal_obs);
    }
    let mdp = Mdp::new(actions, choices, index[mdp.initial()])?;
    let pomdp = Pomdp::new(mdp, observations, obs_of)?;
    let rewards = RewardStructure::from_entries(new_rewards)?.with_sign(rewards.sign())?;
    Ok((
        pomdp,
        rewards,
        GoalSpec {
            goal_observations: [goal_obs].into(),
        },
    ))
}

/// Reward 1 on every transition entering the goal set from outside it.
pub fn encode_reachability(pomdp: &Pomdp, goal: &[bool]) -> RewardStructure {
    let mdp = pomdp.mdp();
    let mut entries = Vec::new();
    for s in (0..mdp.num_states()).filter(|&s| !goal[s]) {
        for choice in mdp.choices(s) {
            for (t, _) in &choice.successors {
                if goal[*t] {
                    entries.push(((s, choice.action, *t), rint(1)));
                }
            }
        }
    }
    RewardStructure::from_entries(entries).expect("reachability rewards are non-negative")
}

pub fn negate_rewards(rewards: &RewardStructure) -> RewardStructure {
    let entries: Vec<_> = rewards
        .entries()
        .map(|(&k, v)| (k, -v.clone()))
        .collect::<Vec<(_, Rational)>>();
    RewardStructure::from_entries(entries)
        .and_then(|r| r.with_sign(rewards.sign().flipped()))
        .expect("negation preserves sign homogeneity")
}
