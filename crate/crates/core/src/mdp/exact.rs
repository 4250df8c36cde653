//! Exact rational solving: Markov chain evaluation and policy iteration.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Zero};

use super::graph::strongly_connected_components;
use super::qualitative::analyse;
use super::{ChoiceModel, MdpError};
use crate::numeric::{Extended, Rational};

/// Solves `v_i = c_i + sum_j a_ij v_j` by elimination in index order.
///
/// `rows[i] = (a_i, c_i)`. Fails if a pivot `1 - a_ii` vanishes.
pub fn solve_linear(
    rows: Vec<(BTreeMap<usize, Rational>, Rational)>,
) -> Result<Vec<Rational>, usize> {
    let n = rows.len();
    let (mut coeffs, mut consts): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut refs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in coeffs.iter().enumerate() {
        for &j in row.keys() {
            refs[j].insert(i);
        }
    }
    for i in 0..n {
        let own = coeffs[i].remove(&i).unwrap_or_else(Rational::zero);
        refs[i].remove(&i);
        let pivot = Rational::one() - own;
        if pivot.is_zero() {
            return Err(i);
        }
        if !pivot.is_one() {
            for a in coeffs[i].values_mut() {
                *a /= &pivot;
            }
            consts[i] /= &pivot;
        }
        let row_i: Vec<(usize, Rational)> =
            coeffs[i].iter().map(|(j, a)| (*j, a.clone())).collect();
        let const_i = consts[i].clone();
        let users: Vec<usize> = refs[i].iter().copied().filter(|&k| k > i).collect();
        for k in users {
            let factor = coeffs[k].remove(&i).expect("reference index in sync");
            refs[i].remove(&k);
            consts[k] += &factor * &const_i;
            for (j, a) in &row_i {
                let entry = coeffs[k].entry(*j).or_insert_with(Rational::zero);
                *entry += &factor * a;
                if entry.is_zero() {
                    coeffs[k].remove(j);
                    refs[*j].remove(&k);
                } else {
                    refs[*j].insert(k);
                }
            }
        }
    }
    let mut values = vec![Rational::zero(); n];
    for i in (0..n).rev() {
        let mut v = consts[i].clone();
        for (j, a) in &coeffs[i] {
            v += a * &values[*j];
        }
        values[i] = v;
    }
    Ok(values)
}

/// Exact expected total reward of the chain induced by `policy`.
///
/// Goal states are worth 0 and states with `fixed` values keep them; other
/// states need a policy entry. Non-goal bottom components collecting reward
/// diverge, as does everything reaching an infinite value or reward.
pub fn chain_values(
    model: &ChoiceModel,
    policy: &[Option<usize>],
    fixed: &[Option<Extended>],
) -> Result<Vec<Extended>, MdpError> {
    let n = model.num_states();
    let mut known: Vec<Option<Extended>> = (0..n)
        .map(|s| {
            if model.goal[s] {
                Some(Extended::zero())
            } else {
                fixed.get(s).cloned().flatten()
            }
        })
        .collect();
    let mut chosen = vec![usize::MAX; n];
    for s in 0..n {
        if known[s].is_none() {
            chosen[s] = policy[s].ok_or(MdpError::MissingChoice(s))?;
        }
    }
    let branches = |s: usize| &model.choices[s][chosen[s]].branches;
    let open: Vec<bool> = known.iter().map(Option::is_none).collect();
    let succ = |s: usize| branches(s).iter().map(|b| b.target).collect::<Vec<_>>();
    let infinity = model.divergence();

    for comp in strongly_connected_components(&open, &succ) {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let bottom = comp
            .iter()
            .all(|&s| branches(s).iter().all(|b| members.contains(&b.target)));
        if bottom {
            let rewarding = comp
                .iter()
                .any(|&s| branches(s).iter().any(|b| !b.reward.is_zero()));
            let value = if rewarding {
                infinity.clone()
            } else {
                Extended::zero()
            };
            for &s in &comp {
                known[s] = Some(value.clone());
            }
        }
    }

    // divergence spreads backwards along positive-probability branches
    let mut diverges: Vec<bool> = (0..n)
        .map(|s| {
            matches!(known[s], Some(Extended::PosInf | Extended::NegInf))
                || (known[s].is_none()
                    && branches(s).iter().any(|b| {
                        !b.reward.is_finite()
                            || matches!(known[b.target], Some(Extended::PosInf | Extended::NegInf))
                    }))
        })
        .collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !diverges[s] && known[s].is_none() && branches(s).iter().any(|b| diverges[b.target])
            {
                diverges[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for s in 0..n {
        if diverges[s] && known[s].is_none() {
            let inf = branches(s)
                .iter()
                .find_map(|b| match (&b.reward, &known[b.target]) {
                    (r @ (Extended::PosInf | Extended::NegInf), _) => Some(r.clone()),
                    (_, Some(v @ (Extended::PosInf | Extended::NegInf))) => Some(v.clone()),
                    _ => None,
                })
                .unwrap_or_else(|| infinity.clone());
            known[s] = Some(inf);
        }
    }

    let unknown: Vec<usize> = (0..n).filter(|&s| known[s].is_none()).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        local[s] = i;
    }
    let rows = unknown
        .iter()
        .map(|&s| {
            let mut coeffs = BTreeMap::new();
            let mut constant = Rational::zero();
            for b in branches(s) {
                constant += &b.prob * b.reward.finite().expect("finite after propagation");
                match &known[b.target] {
                    Some(v) => constant += &b.prob * v.finite().expect("finite after propagation"),
                    None => {
                        *coeffs.entry(local[b.target]).or_insert_with(Rational::zero) += &b.prob;
                    }
                }
            }
            (coeffs, constant)
        })
        .collect();
    let solved = solve_linear(rows).map_err(|i| MdpError::Singular(unknown[i]))?;
    for (i, v) in solved.into_iter().enumerate() {
        known[unknown[i]] = Some(Extended::Finite(v));
    }
    Ok(known
        .into_iter()
        .map(|v| v.expect("all states valued"))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub values: Vec<Extended>,
    /// Choice index per state; goal states keep their first choice.
    pub policy: Vec<Option<usize>>,
    pub iterations: usize,
}

/// Maximal expected total reward by qualitative preprocessing and policy iteration.
pub fn solve_max_exact(model: &ChoiceModel) -> Result<ExactSolution, MdpError> {
    let qual = analyse(model);
    let mut policy = qual.policy.clone();
    let unsettled: Vec<usize> = qual.unsettled().collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let values = chain_values(model, &policy, &qual.fixed)?;
        let mut improved = false;
        for &s in &unsettled {
            let current = &values[s];
            let mut best: Option<(usize, Extended)> = None;
            for c in 0..model.choices[s].len() {
                if !qual.allowed[s][c] {
                    continue;
                }
                let q = model.q_value(s, c, &values);
                if best.as_ref().is_none_or(|(_, v)| q > *v) {
                    best = Some((c, q));
                }
            }
            if let Some((c, q)) = best {
                if q > *current && policy[s] != Some(c) {
                    policy[s] = Some(c);
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(ExactSolution {
                values,
                policy,
                iterations,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::testing::{fin, model};
    use crate::model::RewardSign;
    use crate::numeric::{rational, rint};

    #[test]
    fn linear_system() {
        // v0 = 1 + 1/2 v1, v1 = 2 + 1/2 v0  ->  v0 = 8/3, v1 = 10/3
        let rows = vec![
            ([(1, rational(1, 2))].into(), rint(1)),
            ([(0, rational(1, 2))].into(), rint(2)),
        ];
        assert_eq!(
            solve_linear(rows).unwrap(),
            vec![rational(8, 3), rational(10, 3)]
        );
        let singular = vec![([(0, rint(1))].into(), rint(0))];
        assert_eq!(solve_linear(singular), Err(0));
    }

    fn running_example() -> ChoiceModel {
        // underlying MDP of the three-state example: alpha = 0, beta = 1
        model(
            RewardSign::Positive,
            &[false, false, true],
            vec![
                vec![
                    (
                        0,
                        vec![(0, rational(1, 2), fin(0)), (1, rational(1, 2), fin(0))],
                    ),
                    (1, vec![(2, rint(1), fin(0))]),
                ],
                vec![
                    (0, vec![(1, rint(1), fin(0))]),
                    (1, vec![(2, rint(1), fin(1))]),
                ],
                vec![(0, vec![(2, rint(1), fin(0))])],
            ],
        )
    }

    #[test]
    fn max_and_min_on_running_example() {
        let m = running_example();
        let max = solve_max_exact(&m).unwrap();
        assert_eq!(max.values, vec![fin(1), fin(1), fin(0)]);
        assert_eq!(max.policy[1], Some(1));
        let min = solve_max_exact(&m.negated()).unwrap();
        assert_eq!(min.values, vec![fin(0), fin(0), fin(0)]);
    }

    #[test]
    fn chain_evaluation() {
        let m = running_example();
        let beta = chain_values(&m, &[Some(1), Some(1), None], &[]).unwrap();
        assert_eq!(beta, vec![fin(0), fin(1), fin(0)]);
        let alpha = chain_values(&m, &[Some(0), Some(0), None], &[]).unwrap();
        assert_eq!(alpha, vec![fin(0), fin(0), fin(0)]);
        let mixed = chain_values(&m, &[Some(0), Some(1), None], &[]).unwrap();
        assert_eq!(mixed, vec![fin(1), fin(1), fin(0)]);
    }

    #[test]
    fn negative_policy_iteration_avoids_costly_loop() {
        // 0: a -> 1 (r=-1) ; b -> {0: 1/2, goal: 1/2} (r=-1); 1: a -> goal (r=-5)
        let m = model(
            RewardSign::Negative,
            &[false, false, true],
            vec![
                vec![
                    (0, vec![(1, rint(1), fin(-1))]),
                    (
                        1,
                        vec![(0, rational(1, 2), fin(-1)), (2, rational(1, 2), fin(-1))],
                    ),
                ],
                vec![(0, vec![(2, rint(1), fin(-5))])],
                vec![(0, vec![(2, rint(1), fin(0))])],
            ],
        );
        let sol = solve_max_exact(&m).unwrap();
        assert_eq!(sol.values, vec![fin(-2), fin(-5), fin(0)]);
        assert_eq!(sol.policy[0], Some(1));
    }

    #[test]
    fn infinite_rewards_propagate() {
        let m = model(
            RewardSign::Positive,
            &[false, true],
            vec![
                vec![
                    (0, vec![(1, rint(1), Extended::PosInf)]),
                    (1, vec![(1, rint(1), fin(3))]),
                ],
                vec![(0, vec![(1, rint(1), fin(0))])],
            ],
        );
        let sol = solve_max_exact(&m).unwrap();
        assert_eq!(sol.values[0], Extended::PosInf);
        let chain = chain_values(&m, &[Some(1), None], &[]).unwrap();
        assert_eq!(chain[0], fin(3));
    }
}
