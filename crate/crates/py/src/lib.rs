//! Python bindings: model loading, belief updates, clipping and the analysis pipeline.
//!
//! Probabilities cross the boundary as strings such as `"3/4"`; anything whose
//! `str()` is a rational (ints, `fractions.Fraction`, decimal strings) is accepted.

use belief_bound::belief::{self, initial_belief};
use belief_bound::clipping;
use belief_bound::model::{parse_pomdp, serialize_pomdp};
use belief_bound::numeric::parse_rational;
use belief_bound::report::{run_analyze, AnalyzeOptions, Direction, Objective};
use belief_bound::{Belief, PomdpModel, Rational};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Entries = Vec<(usize, String)>;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rational(value: &Bound<'_, PyAny>) -> PyResult<Rational> {
    let text = value.str()?.to_string();
    parse_rational(&text).ok_or_else(|| value_error(format!("not a rational number: {text}")))
}

fn read_entries(entries: &[(usize, Bound<'_, PyAny>)]) -> PyResult<Vec<(usize, Rational)>> {
    entries
        .iter()
        .map(|(s, p)| Ok((*s, to_rational(p)?)))
        .collect()
}

fn write_entries(b: &Belief) -> Entries {
    b.entries()
        .iter()
        .map(|(s, p)| (*s, p.to_string()))
        .collect()
}

/// Free-standing belief for clipping, where only the distribution matters.
fn loose_belief(entries: &[(usize, Bound<'_, PyAny>)]) -> PyResult<Belief> {
    let mut entries = read_entries(entries)?;
    entries.sort_by_key(|(s, _)| *s);
    entries.retain(|(_, p)| *p != Rational::from_integer(0.into()));
    let total: Rational = entries.iter().map(|(_, p)| p.clone()).sum();
    if entries.is_empty() || total != Rational::from_integer(1.into()) {
        return Err(value_error("belief must be a distribution summing to 1"));
    }
    Ok(Belief::from_sorted(0, entries))
}

#[pyclass(module = "belief_bound_py", frozen)]
pub struct Model {
    inner: PomdpModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: parse_pomdp(text).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_error)?;
        Self::from_text(&text)
    }

    fn to_text(&self) -> String {
        serialize_pomdp(&self.inner)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.pomdp.num_states()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.pomdp.mdp().actions().to_vec()
    }

    #[getter]
    fn observations(&self) -> Vec<String> {
        self.inner.pomdp.observations().to_vec()
    }

    fn observation_of(&self, state: usize) -> PyResult<String> {
        if state >= self.num_states() {
            return Err(value_error(format!("no state {state}")));
        }
        let z = self.inner.pomdp.obs_of(state);
        Ok(self.inner.pomdp.observations()[z].clone())
    }

    fn initial_belief(&self) -> Entries {
        write_entries(&initial_belief(&self.inner.pomdp))
    }

    /// Successor beliefs under `action`: one dict per observation with
    /// `observation`, `probability`, `belief` and `reward`.
    fn successors<'py>(
        &self,
        py: Python<'py>,
        belief: Vec<(usize, Bound<'py, PyAny>)>,
        action: &str,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let pomdp = &self.inner.pomdp;
        let b = Belief::new(pomdp, read_entries(&belief)?).map_err(value_error)?;
        let a = pomdp
            .mdp()
            .action_index(action)
            .ok_or_else(|| value_error(format!("unknown action `{action}`")))?;
        belief::transitions(pomdp, &self.inner.rewards, &b, a)
            .map_err(value_error)?
            .into_iter()
            .map(|t| {
                let d = PyDict::new(py);
                d.set_item("observation", &pomdp.observations()[t.observation])?;
                d.set_item("probability", t.probability.to_string())?;
                d.set_item("belief", write_entries(&t.belief))?;
                d.set_item("reward", t.reward.to_string())?;
                Ok(d)
            })
            .collect()
    }

    /// Runs the full analysis and returns the report as a dict.
    #[pyo3(signature = (
        direction = "max",
        objective = "reward",
        goal_obs = Vec::new(),
        threshold = None,
        clipping = false,
        eta = 2,
        size_factor = 1.0,
        precision = 1e-6,
        threads = 1,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        direction: &str,
        objective: &str,
        goal_obs: Vec<String>,
        threshold: Option<Bound<'py, PyAny>>,
        clipping: bool,
        eta: u32,
        size_factor: f64,
        precision: f64,
        threads: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let options = AnalyzeOptions {
            direction: match direction {
                "max" => Direction::Max,
                "min" => Direction::Min,
                other => return Err(value_error(format!("unknown direction `{other}`"))),
            },
            objective: match objective {
                "reward" => Objective::Reward,
                "reachability" => Objective::Reachability,
                other => return Err(value_error(format!("unknown objective `{other}`"))),
            },
            goal_observations: goal_obs,
            threshold: threshold.as_ref().map(to_rational).transpose()?,
            clipping,
            eta,
            size_factor,
            precision,
            threads,
            omit_timing: false,
        };
        let out = run_analyze(&self.inner, "python", &options).map_err(value_error)?;
        py.import("json")?
            .call_method1("loads", (out.report.to_json_string(),))
    }
}

/// Minimal clipping of `belief` towards `candidate`, or `None` if inadequate.
#[pyfunction]
fn clip_values<'py>(
    py: Python<'py>,
    belief: Vec<(usize, Bound<'py, PyAny>)>,
    candidate: Vec<(usize, Bound<'py, PyAny>)>,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    let b = loose_belief(&belief)?;
    let c = loose_belief(&candidate)?;
    let Some(result) = clipping::clip_values(&b, &c)
        .map_err(value_error)?
        .adequate()
    else {
        return Ok(None);
    };
    let d = PyDict::new(py);
    d.set_item("delta", result.delta.to_string())?;
    let deltas: Entries = result
        .state_deltas
        .iter()
        .map(|(s, p)| (*s, p.to_string()))
        .collect();
    d.set_item("state_deltas", deltas)?;
    Ok(Some(d))
}

/// Beliefs over `support` whose probabilities are multiples of `1/eta`.
#[pyfunction]
fn grid_candidates(support: Vec<usize>, eta: u32) -> PyResult<Vec<Entries>> {
    if eta == 0 {
        return Err(value_error("eta must be at least 1"));
    }
    Ok(clipping::grid_candidates(0, &support, eta)
        .iter()
        .map(write_entries)
        .collect())
}

#[pymodule]
fn belief_bound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(clip_values, m)?)?;
    m.add_function(wrap_pyfunction!(grid_candidates, m)?)?;
    Ok(())
}
