//! Maximal expected total reward on abstraction MDPs.

use thiserror::Error;

use crate::explorer::{AbsAction, AbstractionMdp, ExploreError};
use crate::mdp::{self, MdpError};
use crate::model::RewardSign;
use crate::numeric::Extended;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] ExploreError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Exact policy iteration up to `exact_limit` states, value iteration above.
    Auto,
    Exact,
    Iterative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub precision: f64,
    pub method: SolveMethod,
    pub exact_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            precision: 1e-6,
            method: SolveMethod::Auto,
            exact_limit: 2_000,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub value: Extended,
    pub values: Vec<Extended>,
    /// Chosen action per abstraction state.
    pub policy: Vec<Option<AbsAction>>,
    pub iterations: usize,
    /// 0 for exact solutions, else the final relative residual.
    pub precision_achieved: f64,
    pub exact: bool,
    /// Set when an iterative result for negative rewards may overshoot the true value.
    pub precision_limited: bool,
}

fn labels(abs: &AbstractionMdp, policy: &[Option<usize>]) -> Vec<Option<AbsAction>> {
    policy
        .iter()
        .enumerate()
        .map(|(s, c)| c.map(|c| abs.choices[s][c].action))
        .collect()
}

/// Maximal expected total reward until a goal belief or the cut state.
pub fn solve_max(abs: &AbstractionMdp, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    abs.validate()?;
    let model = abs.to_choice_model();
    let exact = match config.method {
        SolveMethod::Exact => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => abs.num_states() <= config.exact_limit,
    };
    if exact {
        let sol = mdp::solve_max_exact(&model)?;
        return Ok(SolveResult {
            value: sol.values[abs.initial].clone(),
            policy: labels(abs, &sol.policy),
            values: sol.values,
            iterations: sol.iterations,
            precision_achieved: 0.0,
            exact: true,
            precision_limited: false,
        });
    }
    let qual = mdp::analyse(&model);
    let sol = mdp::value_iteration(&model, &qual, config.precision, config.max_iterations)?;
    let values: Vec<Extended> = (0..model.num_states())
        .map(|s| {
            qual.fixed[s]
                .clone()
                .unwrap_or_else(|| Extended::from_f64(sol.values[s]).expect("finite iterate"))
        })
        .collect();
    Ok(SolveResult {
        value: values[abs.initial].clone(),
        policy: labels(abs, &sol.policy),
        values,
        iterations: sol.iterations,
        precision_achieved: sol.residual,
        exact: false,
        precision_limited: abs.sign == RewardSign::Negative,
    })
}

/// Exact values of the abstraction restricted to `policy` (one action per state).
pub fn solve_exact_chain(
    abs: &AbstractionMdp,
    policy: &[Option<AbsAction>],
    limit: usize,
) -> Result<Vec<Extended>, SolveError> {
    if abs.num_states() > limit {
        return Err(MdpError::TooLarge {
            states: abs.num_states(),
            limit,
        }
        .into());
    }
    let model = abs.to_choice_model();
    let choices: Vec<Option<usize>> = (0..abs.num_states())
        .map(|s| policy[s].and_then(|a| abs.choices[s].iter().position(|c| c.action == a)))
        .collect();
    for s in 0..abs.num_states() {
        if !abs.goal[s] && choices[s].is_none() {
            return Err(MdpError::MissingChoice(s).into());
        }
    }
    let chain = model.restrict(&choices)?;
    let single: Vec<Option<usize>> = vec![Some(0); chain.num_states()];
    Ok(mdp::chain_values(&chain, &single, &[])?)
}
