//! End-to-end analysis pipeline and its reports.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::time::Instant;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analysis::{self, cutoff_value};
use crate::belief::Belief;
use crate::explorer::{self, AbstractionMdp, ExplorationConfig, ExploreError, Threshold};
use crate::mdp::MdpError;
use crate::model::{self, GoalDecl, ModelError, PomdpModel};
use crate::numeric::{Extended, Rational};
use crate::solver::{self, SolveError, SolveResult, SolverConfig};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Reward,
    Reachability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Refuted,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeOptions {
    pub direction: Direction,
    pub objective: Objective,
    /// Overrides the goals declared in the model when non-empty.
    pub goal_observations: Vec<String>,
    pub threshold: Option<Rational>,
    pub clipping: bool,
    pub eta: u32,
    pub size_factor: f64,
    pub precision: f64,
    pub threads: usize,
    /// Report zero timings so that reports are reproducible byte for byte.
    pub omit_timing: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            direction: Direction::Max,
            objective: Objective::Reward,
            goal_observations: Vec::new(),
            threshold: None,
            clipping: false,
            eta: 2,
            size_factor: 1.0,
            precision: 1e-6,
            threads: 1,
            omit_timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    pub model_id: String,
    pub direction: Direction,
    pub objective: Objective,
    /// Lower bound for maximisation, upper bound for minimisation.
    pub bound: Extended,
    pub bound_exact: bool,
    pub threshold: Option<Rational>,
    pub verdict: Option<Verdict>,
    pub explored_beliefs: usize,
    pub cut_transitions: usize,
    pub clip_transitions: usize,
    pub eta: Option<u32>,
    pub wall_time_ms: u64,
    pub initial_is_goal: bool,
    pub precision_limited: bool,
}

fn number(value: &Extended) -> Value {
    match value {
        Extended::Finite(_) => serde_json::Number::from_f64(value.to_f64())
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(value.to_string())),
        other => Value::String(other.to_string()),
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> Value {
        let key = match self.direction {
            Direction::Max => "lower_bound",
            Direction::Min => "upper_bound",
        };
        let mut map = Map::new();
        map.insert(key.into(), number(&self.bound));
        map.insert(
            format!("{key}_exact"),
            if self.bound_exact {
                Value::String(self.bound.to_string())
            } else {
                Value::Null
            },
        );
        map.insert("model_id".into(), json!(self.model_id));
        map.insert("direction".into(), json!(self.direction));
        map.insert("objective".into(), json!(self.objective));
        map.insert(
            "threshold".into(),
            self.threshold
                .as_ref()
                .map_or(Value::Null, |t| Value::String(t.to_string())),
        );
        map.insert("verdict".into(), json!(self.verdict));
        map.insert("explored_beliefs".into(), json!(self.explored_beliefs));
        map.insert("cut_transitions".into(), json!(self.cut_transitions));
        map.insert("clip_transitions".into(), json!(self.clip_transitions));
        map.insert("eta".into(), json!(self.eta));
        map.insert("wall_time_ms".into(), json!(self.wall_time_ms));
        map.insert("initial_is_goal".into(), json!(self.initial_is_goal));
        map.insert("precision_limited".into(), json!(self.precision_limited));
        Value::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        text.push('\n');
        text
    }
}

/// Everything produced by one analysis run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub abstraction: AbstractionMdp,
    pub solution: SolveResult,
}

/// Model prepared for exploration: observable goals, objective rewards, sign for maximisation.
struct Prepared {
    model: PomdpModel,
    goal: Vec<bool>,
    u: analysis::StateValues,
    cutoff_values: analysis::StateValues,
}

fn prepare(model: &PomdpModel, options: &AnalyzeOptions) -> Result<Prepared, AnalysisError> {
    let pomdp = &model.pomdp;
    let decl = if options.goal_observations.is_empty() {
        model
            .goal
            .clone()
            .ok_or_else(|| AnalysisError::Config("the model declares no goals".into()))?
    } else {
        let obs = options
            .goal_observations
            .iter()
            .map(|name| {
                pomdp
                    .observation_index(name)
                    .ok_or_else(|| AnalysisError::Config(format!("unknown observation `{name}`")))
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        GoalDecl::Observations(obs)
    };
    let goal = decl.goal_states(pomdp);
    if !goal.iter().any(|&g| g) {
        return Err(AnalysisError::Config("the goal set is empty".into()));
    }
    let (pomdp, rewards, spec) = model::make_goals_observable(pomdp, &model.rewards, &goal)?;
    let goal = spec.goal_states(&pomdp);
    let rewards = match options.objective {
        Objective::Reward => rewards,
        Objective::Reachability => model::encode_reachability(&pomdp, &goal),
    };
    let rewards = match options.direction {
        Direction::Max => rewards,
        Direction::Min => model::negate_rewards(&rewards),
    };
    let u = analysis::min_expected_reward(&pomdp, &rewards, &goal)?;
    let sigma = analysis::heuristic_policy(&pomdp, &rewards, &goal)?;
    let cutoff_values = analysis::evaluate_policy(&pomdp, &sigma, &rewards, &goal)?;
    Ok(Prepared {
        model: PomdpModel {
            pomdp,
            rewards,
            goal: Some(GoalDecl::Observations(spec.goal_observations)),
        },
        goal,
        u,
        cutoff_values,
    })
}

fn explore_and_solve(
    prepared: &Prepared,
    threshold: Threshold,
    options: &AnalyzeOptions,
) -> Result<(AbstractionMdp, SolveResult), AnalysisError> {
    if options.eta == 0 {
        return Err(AnalysisError::Config("--eta must be at least 1".into()));
    }
    let config = ExplorationConfig {
        threshold,
        clipping: options.clipping,
        eta: options.eta,
        max_expansions: None,
        threads: options.threads.max(1),
    };
    let cutoff = |b: &Belief| cutoff_value(b, &prepared.cutoff_values);
    let abs = explorer::explore(
        &prepared.model.pomdp,
        &prepared.model.rewards,
        &prepared.goal,
        &cutoff,
        &prepared.u,
        &config,
    )?;
    let solution = solver::solve_max(
        &abs,
        &SolverConfig {
            precision: options.precision,
            ..Default::default()
        },
    )?;
    Ok((abs, solution))
}

fn oriented(value: &Extended, direction: Direction) -> Extended {
    match direction {
        Direction::Max => value.clone(),
        Direction::Min => -value.clone(),
    }
}

pub fn run_analyze(
    model: &PomdpModel,
    model_id: &str,
    options: &AnalyzeOptions,
) -> Result<Analysis, AnalysisError> {
    let start = Instant::now();
    if options.size_factor.is_nan() || options.size_factor < 0.0 {
        return Err(AnalysisError::Config(
            "--size-factor must be non-negative".into(),
        ));
    }
    let prepared = prepare(model, options)?;
    let (abstraction, solution) = explore_and_solve(
        &prepared,
        Threshold::SizeFactor(options.size_factor),
        options,
    )?;
    let bound = oriented(&solution.value, options.direction);
    let verdict = options.threshold.as_ref().map(|lambda| {
        let lambda = Extended::Finite(lambda.clone());
        let refuted = match options.direction {
            Direction::Max => bound > lambda,
            Direction::Min => bound < lambda,
        };
        if refuted {
            Verdict::Refuted
        } else {
            Verdict::Inconclusive
        }
    });
    let initial = prepared.model.pomdp.mdp().initial();
    let report = AnalysisReport {
        model_id: model_id.to_string(),
        direction: options.direction,
        objective: options.objective,
        bound,
        bound_exact: solution.exact,
        threshold: options.threshold.clone(),
        verdict,
        explored_beliefs: abstraction.stats.beliefs,
        cut_transitions: abstraction.stats.cut_transitions,
        clip_transitions: abstraction.stats.clip_transitions,
        eta: options.clipping.then_some(options.eta),
        wall_time_ms: if options.omit_timing {
            0
        } else {
            start.elapsed().as_millis() as u64
        },
        initial_is_goal: prepared.goal[initial],
        precision_limited: solution.precision_limited,
    };
    Ok(Analysis {
        report,
        abstraction,
        solution,
    })
}

/// One CSV row per exploration budget: `budget,explored,bound,time_ms`.
pub fn run_sweep(
    model: &PomdpModel,
    options: &AnalyzeOptions,
    budgets: &[usize],
) -> Result<String, AnalysisError> {
    let prepared = prepare(model, options)?;
    let mut out = String::from("budget,explored,bound,time_ms\n");
    for &budget in budgets {
        let start = Instant::now();
        let (abs, solution) = explore_and_solve(&prepared, Threshold::Budget(budget), options)?;
        let bound = oriented(&solution.value, options.direction);
        let time = if options.omit_timing {
            0
        } else {
            start.elapsed().as_millis()
        };
        let _ = writeln!(
            out,
            "{budget},{},{},{time}",
            abs.stats.beliefs,
            bound.to_f64()
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_pomdp;
    use crate::numeric::rational;

    const RUNNING_EXAMPLE: &str =
        "pomdp\nstates 3\nactions alpha beta\nobservations white orange\ninit 0\n\
        obs 0 white\nobs 1 white\nobs 2 orange\ntrans 0 alpha 0 1/2\ntrans 0 alpha 1 1/2\n\
        trans 0 beta 2 1\ntrans 1 alpha 1 1\ntrans 1 beta 2 1\ntrans 2 alpha 2 1\n\
        reward 1 beta 2 1\ngoal-obs orange\n";

    fn options() -> AnalyzeOptions {
        AnalyzeOptions {
            clipping: true,
            eta: 2,
            size_factor: 0.0,
            threshold: Some(rational(7, 10)),
            omit_timing: true,
            ..Default::default()
        }
    }

    #[test]
    fn refutes_below_three_quarters() {
        let model = parse_pomdp(RUNNING_EXAMPLE).unwrap();
        let out = run_analyze(&model, "example", &options()).unwrap();
        assert_eq!(out.report.bound, Extended::Finite(rational(3, 4)));
        assert_eq!(out.report.verdict, Some(Verdict::Refuted));
        let json = out.report.to_json();
        assert_eq!(json["lower_bound"], json!(0.75));
        assert_eq!(json["lower_bound_exact"], json!("3/4"));
        assert_eq!(json["verdict"], json!("refuted"));

        let inconclusive = AnalyzeOptions {
            threshold: Some(rational(9, 10)),
            ..options()
        };
        let out = run_analyze(&model, "example", &inconclusive).unwrap();
        assert_eq!(out.report.verdict, Some(Verdict::Inconclusive));
    }

    #[test]
    fn minimisation_reports_upper_bound() {
        let model = parse_pomdp(RUNNING_EXAMPLE).unwrap();
        let out = run_analyze(
            &model,
            "example",
            &AnalyzeOptions {
                direction: Direction::Min,
                size_factor: 4.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.report.bound, Extended::zero());
        assert!(out.report.to_json().get("upper_bound").is_some());
    }

    #[test]
    fn sweep_rows() {
        let model = parse_pomdp(RUNNING_EXAMPLE).unwrap();
        let csv = run_sweep(
            &model,
            &AnalyzeOptions {
                omit_timing: true,
                ..Default::default()
            },
            &[0, 3, 4, 5],
        )
        .unwrap();
        assert_eq!(
            csv,
            "budget,explored,bound,time_ms\n0,1,0,0\n3,4,0.5,0\n4,5,0.75,0\n5,6,0.875,0\n"
        );
    }
}
