//! Floating-point value iteration after qualitative preprocessing.

use super::qualitative::Qualitative;
use super::{ChoiceModel, MdpError};
use crate::numeric::Extended;

#[derive(Clone, Debug, PartialEq)]
pub struct IterativeSolution {
    pub values: Vec<f64>,
    pub policy: Vec<Option<usize>>,
    pub iterations: usize,
    /// Largest relative change in the final sweep.
    pub residual: f64,
}

struct FloatChoice {
    index: usize,
    constant: f64,
    successors: Vec<(usize, f64)>,
}

/// Gauss-Seidel value iteration from zero.
///
/// For positive rewards the iterates increase monotonically towards the
/// optimum, so every iterate is a lower bound. Stops once no state changes
/// by more than `precision` relative to its value.
pub fn value_iteration(
    model: &ChoiceModel,
    qual: &Qualitative,
    precision: f64,
    max_iterations: usize,
) -> Result<IterativeSolution, MdpError> {
    let n = model.num_states();
    let fixed: Vec<Option<f64>> = qual
        .fixed
        .iter()
        .map(|v| v.as_ref().map(Extended::to_f64))
        .collect();
    let unsettled: Vec<usize> = qual.unsettled().collect();
    let rows: Vec<Vec<FloatChoice>> = unsettled
        .iter()
        .map(|&s| {
            model.choices[s]
                .iter()
                .enumerate()
                .filter(|(c, _)| qual.allowed[s][*c])
                .map(|(c, choice)| {
                    let mut constant = 0.0;
                    let mut successors = Vec::new();
                    for b in &choice.branches {
                        let p = crate::numeric::to_f64(&b.prob);
                        constant += p * b.reward.to_f64();
                        match fixed[b.target] {
                            Some(v) => constant += p * v,
                            None => successors.push((b.target, p)),
                        }
                    }
                    FloatChoice {
                        index: c,
                        constant,
                        successors,
                    }
                })
                .collect()
        })
        .collect();

    let mut values: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    let q = |choice: &FloatChoice, values: &[f64]| {
        choice.constant
            + choice
                .successors
                .iter()
                .map(|(t, p)| p * values[*t])
                .sum::<f64>()
    };
    let mut iterations = 0;
    let mut residual = 0.0;
    while iterations < max_iterations {
        iterations += 1;
        residual = 0.0f64;
        for (i, &s) in unsettled.iter().enumerate() {
            let best = rows[i]
                .iter()
                .map(|c| q(c, &values))
                .fold(f64::NEG_INFINITY, f64::max);
            let change = (best - values[s]).abs();
            if change > 0.0 {
                residual = residual.max(change / best.abs().max(f64::MIN_POSITIVE));
            }
            values[s] = best;
        }
        if residual <= precision {
            break;
        }
    }
    if residual > precision {
        return Err(MdpError::NoConvergence(max_iterations));
    }

    // among near-optimal choices, prefer those making progress towards settled
    // or zero-valued states so that the extracted strategy cannot stall
    let tolerance = |v: f64| 10.0 * precision * v.abs().max(1e-12);
    let mut policy = qual.policy.clone();
    let mut anchored: Vec<bool> = (0..n)
        .map(|s| fixed[s].is_some() || values[s].abs() <= 1e-12)
        .collect();
    for (i, &s) in unsettled.iter().enumerate() {
        if anchored[s] {
            policy[s] = rows[i]
                .iter()
                .find(|c| (q(c, &values) - values[s]).abs() <= tolerance(values[s]))
                .map(|c| c.index)
                .or(policy[s]);
        }
    }
    loop {
        let mut changed = false;
        for (i, &s) in unsettled.iter().enumerate() {
            if anchored[s] {
                continue;
            }
            let pick = rows[i].iter().find(|c| {
                q(c, &values) >= values[s] - tolerance(values[s])
                    && (c.successors.is_empty() || c.successors.iter().any(|(t, _)| anchored[*t]))
            });
            if let Some(c) = pick {
                policy[s] = Some(c.index);
                anchored[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for (i, &s) in unsettled.iter().enumerate() {
        if !anchored[s] {
            policy[s] = rows[i]
                .iter()
                .max_by(|a, b| q(a, &values).total_cmp(&q(b, &values)))
                .map(|c| c.index);
        }
    }
    Ok(IterativeSolution {
        values,
        policy,
        iterations,
        residual,
    })
}
