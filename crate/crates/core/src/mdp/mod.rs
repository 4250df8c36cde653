//! Finite MDPs with extended-real transition rewards and total-reward solving.

mod exact;
mod graph;
mod iterative;
mod qualitative;

use thiserror::Error;

use crate::model::{Mdp, RewardSign, RewardStructure};
use crate::numeric::{Extended, Rational};

pub use exact::{chain_values, solve_linear, solve_max_exact, ExactSolution};
pub use graph::{mec_decomposition, strongly_connected_components};
pub use iterative::{value_iteration, IterativeSolution};
pub use qualitative::{analyse, Qualitative};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("state {0} has no chosen action")]
    MissingChoice(usize),
    #[error("singular linear system at state {0}")]
    Singular(usize),
    #[error("value iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("model has {states} states, exceeding the limit of {limit}")]
    TooLarge { states: usize, limit: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub target: usize,
    pub prob: Rational,
    pub reward: Extended,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelChoice {
    pub label: usize,
    pub branches: Vec<Branch>,
}

/// An MDP whose goal states stop reward accumulation.
///
/// Rewards share the sign given by `sign` (infinite rewards included); all
/// branch probabilities are positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceModel {
    pub choices: Vec<Vec<ModelChoice>>,
    pub goal: Vec<bool>,
    pub sign: RewardSign,
}

impl ChoiceModel {
    pub fn from_mdp(mdp: &Mdp, rewards: &RewardStructure, goal: &[bool]) -> Self {
        let choices = (0..mdp.num_states())
            .map(|s| {
                mdp.choices(s)
                    .iter()
                    .map(|c| ModelChoice {
                        label: c.action,
                        branches: c
                            .successors
                            .iter()
                            .map(|(t, p)| Branch {
                                target: *t,
                                prob: p.clone(),
                                reward: Extended::Finite(rewards.get(s, c.action, *t)),
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        ChoiceModel {
            choices,
            goal: goal.to_vec(),
            sign: rewards.sign(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for branch in out
            .choices
            .iter_mut()
            .flatten()
            .flat_map(|c| c.branches.iter_mut())
        {
            branch.reward = -branch.reward.clone();
        }
        out.sign = self.sign.flipped();
        out
    }

    /// The infinity that divergent reward accumulation produces.
    pub fn divergence(&self) -> Extended {
        match self.sign {
            RewardSign::Positive => Extended::PosInf,
            RewardSign::Negative => Extended::NegInf,
        }
    }

    /// Expected one-step value of a choice given successor values.
    pub fn q_value(&self, state: usize, choice: usize, values: &[Extended]) -> Extended {
        let mut total = Extended::zero();
        for b in &self.choices[state][choice].branches {
            total = &total + &(&b.reward + &values[b.target]).scale(&b.prob);
        }
        total
    }

    /// The sub-model keeping only the chosen action of each non-goal state.
    pub fn restrict(&self, policy: &[Option<usize>]) -> Result<ChoiceModel, MdpError> {
        let mut choices = Vec::with_capacity(self.num_states());
        for s in 0..self.num_states() {
            if self.goal[s] {
                choices.push(self.choices[s].first().cloned().into_iter().collect());
                continue;
            }
            let c = policy[s].ok_or(MdpError::MissingChoice(s))?;
            choices.push(vec![self.choices[s][c].clone()]);
        }
        Ok(ChoiceModel {
            choices,
            goal: self.goal.clone(),
            sign: self.sign,
        })
    }

    pub(crate) fn has_reward(&self, state: usize, choice: usize) -> bool {
        self.choices[state][choice]
            .branches
            .iter()
            .any(|b| !b.reward.is_zero())
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::numeric::rint;

    /// Compact builder: `(label, [(target, prob, reward)])` per choice.
    pub fn model(
        sign: RewardSign,
        goal: &[bool],
        states: Vec<Vec<(usize, Vec<(usize, Rational, Extended)>)>>,
    ) -> ChoiceModel {
        ChoiceModel {
            choices: states
                .into_iter()
                .map(|cs| {
                    cs.into_iter()
                        .map(|(label, bs)| ModelChoice {
                            label,
                            branches: bs
                                .into_iter()
                                .map(|(target, prob, reward)| Branch {
                                    target,
                                    prob,
                                    reward,
                                })
                                .collect(),
                        })
                        .collect()
                })
                .collect(),
            goal: goal.to_vec(),
            sign,
        }
    }

    pub fn fin(v: i64) -> Extended {
        Extended::Finite(rint(v))
    }
}
