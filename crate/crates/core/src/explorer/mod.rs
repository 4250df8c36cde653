//! Finite exploration of the belief MDP with cut-off and clipping transitions.

mod export;
pub mod horizon;

use std::collections::{HashMap, VecDeque};

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::analysis::StateValues;
use crate::belief::{self, initial_belief, Belief, BeliefError};
use crate::clipping::{self, ClippingError};
use crate::mdp::{Branch, ChoiceModel, ModelChoice};
use crate::model::{ActionId, Pomdp, RewardSign, RewardStructure};
use crate::numeric::{Extended, Rational};

pub use export::{export_dot, serialize_abstraction};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("expansion cap of {cap} exceeded; the partial abstraction is unusable")]
    CapExceeded {
        cap: usize,
        partial: Box<AbstractionMdp>,
    },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Clipping(#[from] ClippingError),
    #[error("invalid abstraction: {0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// When to stop expanding non-grid beliefs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Expand while the number of beliefs is at most
    /// `factor * |S| * (largest observation class)`.
    SizeFactor(f64),
    /// Expand while the number of beliefs is at most this budget.
    Budget(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationConfig {
    pub threshold: Threshold,
    pub clipping: bool,
    pub eta: u32,
    pub max_expansions: Option<usize>,
    /// Worker threads for clipping candidate evaluation; 1 evaluates inline.
    pub threads: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            threshold: Threshold::SizeFactor(1.0),
            clipping: false,
            eta: 2,
            max_expansions: None,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbsState {
    Belief(Belief),
    Cut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbsAction {
    Original(ActionId),
    Goal,
    Cut,
    Clip,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbsChoice {
    pub action: AbsAction,
    pub branches: Vec<Branch>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplorationStats {
    pub beliefs: usize,
    pub expanded: usize,
    pub cut_transitions: usize,
    pub clip_transitions: usize,
}

/// The finite abstraction: explored beliefs plus the cut sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractionMdp {
    pub states: Vec<AbsState>,
    pub choices: Vec<Vec<AbsChoice>>,
    pub initial: usize,
    pub cut: usize,
    /// Goal beliefs and the cut sink.
    pub goal: Vec<bool>,
    pub sign: RewardSign,
    pub action_names: Vec<String>,
    pub stats: ExplorationStats,
}

pub const INITIAL: usize = 0;
pub const CUT: usize = 1;

impl AbstractionMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn belief(&self, state: usize) -> Option<&Belief> {
        match &self.states[state] {
            AbsState::Belief(b) => Some(b),
            AbsState::Cut => None,
        }
    }

    pub fn action_name(&self, action: AbsAction) -> String {
        match action {
            AbsAction::Original(a) => self.action_names[a].clone(),
            AbsAction::Goal => "goal".into(),
            AbsAction::Cut => "cut".into(),
            AbsAction::Clip => "clip".into(),
        }
    }

    /// True when no cut-off was needed, so the abstraction is the full reachable belief MDP.
    pub fn is_complete(&self) -> bool {
        self.stats.cut_transitions == 0
    }

    pub fn to_choice_model(&self) -> ChoiceModel {
        ChoiceModel {
            choices: self
                .choices
                .iter()
                .map(|cs| {
                    cs.iter()
                        .enumerate()
                        .map(|(i, c)| ModelChoice {
                            label: i,
                            branches: c.branches.clone(),
                        })
                        .collect()
                })
                .collect(),
            goal: self.goal.clone(),
            sign: self.sign,
        }
    }

    /// Structural checks: distributions, sink and goal loops, frontier shape, clip acyclicity.
    pub fn validate(&self) -> Result<(), ExploreError> {
        let invalid = |m: String| Err(ExploreError::Invalid(m));
        let zero_loop = |s: usize, action: AbsAction| {
            self.choices[s].len() == 1
                && self.choices[s][0].action == action
                && self.choices[s][0].branches
                    == [Branch {
                        target: s,
                        prob: Rational::one(),
                        reward: Extended::zero(),
                    }]
        };
        if !matches!(self.states[self.cut], AbsState::Cut) || !zero_loop(self.cut, AbsAction::Cut) {
            return invalid("cut state must carry exactly the zero-reward cut self-loop".into());
        }
        for s in 0..self.num_states() {
            if self.choices[s].is_empty() {
                return invalid(format!("state {s} has no choices"));
            }
            for c in &self.choices[s] {
                let sum: Rational = c.branches.iter().map(|b| b.prob.clone()).sum();
                if !sum.is_one() || c.branches.iter().any(|b| !b.prob.is_positive()) {
                    return invalid(format!("state {s}: distribution sums to {sum}"));
                }
                let sign_ok = c.branches.iter().all(|b| match self.sign {
                    RewardSign::Positive => !b.reward.is_negative(),
                    RewardSign::Negative => !b.reward.is_positive(),
                });
                if !sign_ok {
                    return invalid(format!("state {s}: reward of the wrong sign"));
                }
            }
            if s == self.cut {
                continue;
            }
            if self.goal[s] {
                if !zero_loop(s, AbsAction::Goal) {
                    return invalid(format!("goal state {s} must carry only the goal self-loop"));
                }
                continue;
            }
            let actions: Vec<AbsAction> = self.choices[s].iter().map(|c| c.action).collect();
            let frontier = actions.iter().any(|a| !matches!(a, AbsAction::Original(_)));
            if frontier {
                let cut = &self.choices[s][0];
                let shape = cut.action == AbsAction::Cut
                    && cut.branches.len() == 1
                    && cut.branches[0].target == self.cut
                    && (actions.len() == 1
                        || (actions.len() == 2 && actions[1] == AbsAction::Clip));
                if !shape {
                    return invalid(format!("frontier state {s} lacks the cut/clip shape"));
                }
                if let Some(clip) = self.choices[s].get(1) {
                    let to_cut = clip
                        .branches
                        .iter()
                        .filter(|b| b.target == self.cut)
                        .count();
                    if clip.branches.len() != 2 || to_cut != 1 {
                        return invalid(format!(
                            "clip at {s} must split between a belief and the cut state"
                        ));
                    }
                }
            }
        }
        // clip edges must not form cycles
        let clip_target = |s: usize| -> Option<usize> {
            self.choices[s]
                .iter()
                .find(|c| c.action == AbsAction::Clip)
                .and_then(|c| c.branches.iter().find(|b| b.target != self.cut))
                .map(|b| b.target)
        };
        for start in 0..self.num_states() {
            let mut s = start;
            for _ in 0..=self.num_states() {
                match clip_target(s) {
                    Some(t) if t == start => return invalid(format!("clip cycle through {start}")),
                    Some(t) => s = t,
                    None => break,
                }
            }
        }
        Ok(())
    }
}

fn threshold(pomdp: &Pomdp, config: &ExplorationConfig) -> f64 {
    match config.threshold {
        Threshold::SizeFactor(f) => f * (pomdp.num_states() * pomdp.max_obs_class()) as f64,
        Threshold::Budget(k) => k as f64,
    }
}

struct Builder {
    states: Vec<AbsState>,
    choices: Vec<Vec<AbsChoice>>,
    index: HashMap<Belief, usize>,
    queue: VecDeque<usize>,
}

impl Builder {
    fn intern(&mut self, b: Belief) -> usize {
        if let Some(&i) = self.index.get(&b) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(b.clone(), i);
        self.states.push(AbsState::Belief(b));
        self.choices.push(Vec::new());
        self.queue.push_back(i);
        i
    }
}

/// Explores the belief MDP breadth-first from the initial belief.
///
/// Grid beliefs are always expanded when clipping is on; other beliefs are
/// expanded while the number of discovered beliefs stays within the
/// threshold. Every other belief gets a cut transition with reward
/// `cutoff(b)` and, with clipping, a clip transition towards the best grid
/// candidate, whose mass sent to the cut state earns the `u`-weighted reward.
pub fn explore(
    pomdp: &Pomdp,
    rewards: &RewardStructure,
    goal: &[bool],
    cutoff: &dyn Fn(&Belief) -> Extended,
    u: &StateValues,
    config: &ExplorationConfig,
) -> Result<AbstractionMdp, ExploreError> {
    if config.eta == 0 {
        return Err(ExploreError::Invalid(
            "grid resolution must be at least 1".into(),
        ));
    }
    let pool = if config.clipping && config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| ExploreError::Threads(e.to_string()))?,
        )
    } else {
        None
    };
    let limit = threshold(pomdp, config);
    let init = initial_belief(pomdp);
    let mut builder = Builder {
        states: vec![AbsState::Belief(init.clone()), AbsState::Cut],
        choices: vec![
            Vec::new(),
            vec![AbsChoice {
                action: AbsAction::Cut,
                branches: vec![Branch {
                    target: CUT,
                    prob: Rational::one(),
                    reward: Extended::zero(),
                }],
            }],
        ],
        index: HashMap::from([(init, INITIAL)]),
        queue: VecDeque::from([INITIAL]),
    };
    let mut goal_flags = Vec::new();
    let mut stats = ExplorationStats::default();

    let finish = |builder: Builder, goal_flags: Vec<bool>, mut stats: ExplorationStats| {
        let mut goal = goal_flags;
        goal.resize(builder.states.len(), false);
        goal[CUT] = true;
        stats.beliefs = builder.states.len() - 1;
        AbstractionMdp {
            states: builder.states,
            choices: builder.choices,
            initial: INITIAL,
            cut: CUT,
            goal,
            sign: rewards.sign(),
            action_names: pomdp.mdp().actions().to_vec(),
            stats,
        }
    };

    while let Some(i) = builder.queue.pop_front() {
        let AbsState::Belief(b) = builder.states[i].clone() else {
            unreachable!("only beliefs are queued");
        };
        if goal_flags.len() < builder.states.len() {
            goal_flags.resize(builder.states.len(), false);
        }
        if b.is_goal(goal) {
            goal_flags[i] = true;
            builder.choices[i] = vec![AbsChoice {
                action: AbsAction::Goal,
                branches: vec![Branch {
                    target: i,
                    prob: Rational::one(),
                    reward: Extended::zero(),
                }],
            }];
            continue;
        }
        let discovered = builder.states.len() - 1;
        let grid = config.clipping && b.is_grid(config.eta);
        if grid || discovered as f64 <= limit {
            if let Some(cap) = config.max_expansions {
                if stats.expanded >= cap {
                    builder.queue.push_front(i);
                    return Err(ExploreError::CapExceeded {
                        cap,
                        partial: Box::new(finish(builder, goal_flags, stats)),
                    });
                }
            }
            stats.expanded += 1;
            let state = b.entries()[0].0;
            let mut choices = Vec::new();
            for action in pomdp.mdp().enabled(state) {
                let branches = belief::transitions(pomdp, rewards, &b, action)?
                    .into_iter()
                    .map(|t| Branch {
                        target: builder.intern(t.belief),
                        prob: t.probability,
                        reward: Extended::Finite(t.reward),
                    })
                    .collect();
                choices.push(AbsChoice {
                    action: AbsAction::Original(action),
                    branches,
                });
            }
            builder.choices[i] = choices;
            continue;
        }

        stats.cut_transitions += 1;
        let mut choices = vec![AbsChoice {
            action: AbsAction::Cut,
            branches: vec![Branch {
                target: CUT,
                prob: Rational::one(),
                reward: cutoff(&b),
            }],
        }];
        if config.clipping {
            let support: Vec<usize> = b.support().collect();
            let candidates = clipping::grid_candidates(b.observation(), &support, config.eta);
            let best = match &pool {
                Some(pool) => clipping::solve_clipping_parallel(&b, &candidates, u, pool)?,
                None => clipping::solve_clipping(&b, &candidates, u)?,
            };
            if let Some(clip) = best.filter(|c| !c.delta.is_zero()) {
                stats.clip_transitions += 1;
                let reward = clip.cut_reward(u);
                let target = builder.intern(clip.candidate);
                choices.push(AbsChoice {
                    action: AbsAction::Clip,
                    branches: vec![
                        Branch {
                            target,
                            prob: Rational::one() - &clip.delta,
                            reward: Extended::zero(),
                        },
                        Branch {
                            target: CUT,
                            prob: clip.delta,
                            reward,
                        },
                    ],
                });
            }
        }
        builder.choices[i] = choices;
    }
    Ok(finish(builder, goal_flags, stats))
}
