//! Graph-based preprocessing for maximal total reward: infinite values and
//! zero-reward end components are settled before any numeric solving.

use super::graph::{exists_reach, mec_decomposition, prob1_exists};
use super::ChoiceModel;
use crate::model::RewardSign;
use crate::numeric::Extended;

#[derive(Clone, Debug)]
pub struct Qualitative {
    /// Values settled by graph analysis (goals, infinities, zero-reward end components).
    pub fixed: Vec<Option<Extended>>,
    /// Choices a maximising strategy may use in unsettled states.
    pub allowed: Vec<Vec<bool>>,
    /// Strategy for settled states and an initial strategy for the others;
    /// for negative rewards the initial strategy reaches the settled states almost surely.
    pub policy: Vec<Option<usize>>,
}

impl Qualitative {
    pub fn unsettled(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.fixed.len()).filter(|&s| self.fixed[s].is_none())
    }
}

pub fn analyse(model: &ChoiceModel) -> Qualitative {
    match model.sign {
        RewardSign::Positive => analyse_positive(model),
        RewardSign::Negative => analyse_negative(model),
    }
}

fn all_choices(model: &ChoiceModel) -> Vec<Vec<bool>> {
    model
        .choices
        .iter()
        .enumerate()
        .map(|(s, cs)| vec![!model.goal[s]; cs.len()])
        .collect()
}

fn goal_fixed(model: &ChoiceModel) -> (Vec<Option<Extended>>, Vec<Option<usize>>) {
    let fixed = model.goal.iter().map(|&g| g.then(Extended::zero)).collect();
    let policy = (0..model.num_states())
        .map(|s| (model.goal[s] && !model.choices[s].is_empty()).then_some(0))
        .collect();
    (fixed, policy)
}

fn analyse_positive(model: &ChoiceModel) -> Qualitative {
    let n = model.num_states();
    let (mut fixed, mut policy) = goal_fixed(model);
    let allowed = all_choices(model);
    let non_goal: Vec<bool> = model.goal.iter().map(|g| !g).collect();

    let mut seeds = vec![false; n];
    for s in (0..n).filter(|&s| non_goal[s]) {
        if let Some(c) = model.choices[s]
            .iter()
            .position(|c| c.branches.iter().any(|b| b.reward == Extended::PosInf))
        {
            seeds[s] = true;
            policy[s] = Some(c);
        }
    }
    // end components with a positive internal reward can be looped forever
    let (mecs, inner) = mec_decomposition(model, &non_goal, &allowed);
    for mec in &mecs {
        let rewarding: Vec<usize> = mec
            .iter()
            .copied()
            .filter(|&s| (0..model.choices[s].len()).any(|c| inner[s][c] && model.has_reward(s, c)))
            .collect();
        if rewarding.is_empty() {
            continue;
        }
        let mut target = vec![false; n];
        for &s in &rewarding {
            target[s] = true;
            if !seeds[s] {
                policy[s] =
                    (0..model.choices[s].len()).find(|&c| inner[s][c] && model.has_reward(s, c));
            }
        }
        let mut domain = vec![false; n];
        for &s in mec {
            domain[s] = true;
        }
        let (_, strategy) = prob1_exists(model, &target, &domain, &inner);
        for &s in mec {
            if !seeds[s] && !target[s] {
                policy[s] = strategy[s];
            }
            seeds[s] = true;
        }
    }
    let (infinite, witness) = exists_reach(model, &seeds, &non_goal, &allowed);
    let mut allowed = allowed;
    for s in 0..n {
        if infinite[s] {
            fixed[s] = Some(Extended::PosInf);
            if !seeds[s] {
                policy[s] = witness[s];
            }
            allowed[s].iter_mut().for_each(|a| *a = false);
        } else if non_goal[s] {
            policy[s] = Some(0);
        }
    }
    Qualitative {
        fixed,
        allowed,
        policy,
    }
}

fn analyse_negative(model: &ChoiceModel) -> Qualitative {
    let n = model.num_states();
    let (mut fixed, mut policy) = goal_fixed(model);
    let mut allowed = all_choices(model);
    let mut alive: Vec<bool> = model.goal.iter().map(|g| !g).collect();

    for s in 0..n {
        for (c, choice) in model.choices[s].iter().enumerate() {
            if choice.branches.iter().any(|b| b.reward == Extended::NegInf) {
                allowed[s][c] = false;
            }
        }
    }
    // states forced into -inf: no usable choice left
    loop {
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for (c, choice) in model.choices[s].iter().enumerate() {
                if allowed[s][c]
                    && choice
                        .branches
                        .iter()
                        .any(|b| !alive[b.target] && !model.goal[b.target])
                {
                    allowed[s][c] = false;
                    changed = true;
                }
            }
            if !allowed[s].iter().any(|&a| a) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // zero-reward end components: staying there forever is worth 0, the best possible
    let zero_allowed: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            (0..model.choices[s].len())
                .map(|c| allowed[s][c] && !model.has_reward(s, c))
                .collect()
        })
        .collect();
    let (zero_mecs, zero_inner) = mec_decomposition(model, &alive, &zero_allowed);
    let mut target = model.goal.clone();
    for mec in &zero_mecs {
        for &s in mec {
            target[s] = true;
            fixed[s] = Some(Extended::zero());
            policy[s] = zero_inner[s].iter().position(|&a| a);
        }
    }

    let (winning, strategy) = prob1_exists(model, &target, &alive, &allowed);
    for s in 0..n {
        if model.goal[s] || target[s] {
            allowed[s].iter_mut().for_each(|a| *a = false);
            continue;
        }
        if !winning[s] {
            fixed[s] = Some(Extended::NegInf);
            policy[s] = (!model.choices[s].is_empty()).then_some(0);
            allowed[s].iter_mut().for_each(|a| *a = false);
            continue;
        }
        for (c, choice) in model.choices[s].iter().enumerate() {
            if choice.branches.iter().any(|b| !winning[b.target]) {
                allowed[s][c] = false;
            }
        }
        policy[s] = strategy[s];
    }
    Qualitative {
        fixed,
        allowed,
        policy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::testing::{fin, model};
    use crate::numeric::{rational, rint};

    #[test]
    fn positive_cycle_is_infinite() {
        // 0 -a-> 1 (r=1), 1 -a-> 0; 0 -b-> goal 2; 3 -a-> {0, 2}
        let m = model(
            RewardSign::Positive,
            &[false, false, true, false],
            vec![
                vec![
                    (0, vec![(1, rint(1), fin(1))]),
                    (1, vec![(2, rint(1), fin(0))]),
                ],
                vec![(0, vec![(0, rint(1), fin(0))])],
                vec![(0, vec![(2, rint(1), fin(0))])],
                vec![(
                    0,
                    vec![(0, rational(1, 2), fin(0)), (2, rational(1, 2), fin(0))],
                )],
            ],
        );
        let q = analyse(&m);
        assert_eq!(q.fixed[0], Some(Extended::PosInf));
        assert_eq!(q.fixed[1], Some(Extended::PosInf));
        assert_eq!(q.fixed[2], Some(Extended::zero()));
        assert_eq!(q.fixed[3], Some(Extended::PosInf));
        assert_eq!(q.policy[0], Some(0));
    }

    #[test]
    fn negative_zero_loop_and_forced_divergence() {
        // 0 -a-> 0 (r=0) or -b-> goal (r=-1); 1 -a-> 1 (r=-1); 2 -a-> {1, goal}
        let m = model(
            RewardSign::Negative,
            &[false, false, false, true],
            vec![
                vec![
                    (0, vec![(0, rint(1), fin(0))]),
                    (1, vec![(3, rint(1), fin(-1))]),
                ],
                vec![(0, vec![(1, rint(1), fin(-1))])],
                vec![(
                    0,
                    vec![(1, rational(1, 2), fin(0)), (3, rational(1, 2), fin(0))],
                )],
                vec![(0, vec![(3, rint(1), fin(0))])],
            ],
        );
        let q = analyse(&m);
        assert_eq!(q.fixed[0], Some(Extended::zero()));
        assert_eq!(q.fixed[1], Some(Extended::NegInf));
        assert_eq!(q.fixed[2], Some(Extended::NegInf));
        assert_eq!(q.policy[0], Some(0));
    }
}
