//! Finite-horizon values used to cross-check the abstraction.
//!
//! `belief_value(b, n)` is the optimal n-step value of the belief MDP,
//! `state_min_value(s, n)` the minimal n-step value of the underlying MDP and
//! `state_policy_value(s, n)` the n-step value of a memoryless observation-based
//! policy on the underlying MDP.

use std::collections::HashMap;

use num::Zero;
use thiserror::Error;

use crate::analysis::MemorylessObsPolicy;
use crate::belief::{self, Belief, BeliefError};
use crate::model::{Pomdp, RewardStructure, StateId};
use crate::numeric::Rational;

pub const DEFAULT_BOUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HorizonError {
    #[error("horizon {horizon} exceeds the bound {bound}")]
    TooLarge { horizon: usize, bound: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

pub struct HorizonOracle<'a> {
    pomdp: &'a Pomdp,
    rewards: &'a RewardStructure,
    goal: &'a [bool],
    bound: usize,
    beliefs: HashMap<(Belief, usize), Rational>,
    policy_beliefs: HashMap<(Belief, usize), Rational>,
}

impl<'a> HorizonOracle<'a> {
    pub fn new(pomdp: &'a Pomdp, rewards: &'a RewardStructure, goal: &'a [bool]) -> Self {
        Self::with_bound(pomdp, rewards, goal, DEFAULT_BOUND)
    }

    pub fn with_bound(
        pomdp: &'a Pomdp,
        rewards: &'a RewardStructure,
        goal: &'a [bool],
        bound: usize,
    ) -> Self {
        HorizonOracle {
            pomdp,
            rewards,
            goal,
            bound,
            beliefs: HashMap::new(),
            policy_beliefs: HashMap::new(),
        }
    }

    fn check(&self, n: usize) -> Result<(), HorizonError> {
        if n > self.bound {
            Err(HorizonError::TooLarge {
                horizon: n,
                bound: self.bound,
            })
        } else {
            Ok(())
        }
    }

    /// Optimal n-step value of a belief: 0 on goal beliefs and at horizon 0.
    pub fn belief_value(&mut self, b: &Belief, n: usize) -> Result<Rational, HorizonError> {
        self.check(n)?;
        self.belief_rec(b, n, None)
    }

    /// n-step value of a belief under a fixed observation-based policy.
    pub fn belief_policy_value(
        &mut self,
        b: &Belief,
        n: usize,
        policy: &MemorylessObsPolicy,
    ) -> Result<Rational, HorizonError> {
        self.check(n)?;
        self.policy_beliefs.clear();
        self.belief_rec(b, n, Some(policy))
    }

    fn belief_rec(
        &mut self,
        b: &Belief,
        n: usize,
        policy: Option<&MemorylessObsPolicy>,
    ) -> Result<Rational, HorizonError> {
        if n == 0 || b.is_goal(self.goal) {
            return Ok(Rational::zero());
        }
        let memo = if policy.is_some() {
            &self.policy_beliefs
        } else {
            &self.beliefs
        };
        if let Some(v) = memo.get(&(b.clone(), n)) {
            return Ok(v.clone());
        }
        let state = b.entries()[0].0;
        let actions: Vec<usize> = match policy {
            Some(p) => vec![p.action(self.pomdp, state)],
            None => self.pomdp.mdp().enabled(state).collect(),
        };
        let mut best: Option<Rational> = None;
        for a in actions {
            let mut total = Rational::zero();
            for t in belief::transitions(self.pomdp, self.rewards, b, a)? {
                let next = self.belief_rec(&t.belief, n - 1, policy)?;
                total += &t.probability * (t.reward + next);
            }
            if best.as_ref().is_none_or(|v| total > *v) {
                best = Some(total);
            }
        }
        let value = best.expect("every state enables an action");
        let memo = if policy.is_some() {
            &mut self.policy_beliefs
        } else {
            &mut self.beliefs
        };
        memo.insert((b.clone(), n), value.clone());
        Ok(value)
    }

    /// Minimal n-step value of a state in the fully observable model.
    pub fn state_min_value(&self, s: StateId, n: usize) -> Result<Rational, HorizonError> {
        self.check(n)?;
        Ok(self.state_values(n, None)[s].clone())
    }

    /// n-step value of a state under an observation-based policy, fully observable.
    pub fn state_policy_value(
        &self,
        s: StateId,
        n: usize,
        policy: &MemorylessObsPolicy,
    ) -> Result<Rational, HorizonError> {
        self.check(n)?;
        Ok(self.state_values(n, Some(policy))[s].clone())
    }

    /// All states' n-step values, minimising or following `policy`.
    pub fn state_values(&self, n: usize, policy: Option<&MemorylessObsPolicy>) -> Vec<Rational> {
        let mdp = self.pomdp.mdp();
        let mut values = vec![Rational::zero(); mdp.num_states()];
        for _ in 0..n {
            let next = (0..mdp.num_states())
                .map(|s| {
                    if self.goal[s] {
                        return Rational::zero();
                    }
                    let q = |a: usize| -> Rational {
                        mdp.choice(s, a)
                            .expect("enabled")
                            .successors
                            .iter()
                            .map(|(t, p)| p * (self.rewards.get(s, a, *t) + &values[*t]))
                            .sum()
                    };
                    match policy {
                        Some(p) => q(p.action(self.pomdp, s)),
                        None => mdp.enabled(s).map(q).min().expect("enabled action"),
                    }
                })
                .collect();
            values = next;
        }
        values
    }
}
