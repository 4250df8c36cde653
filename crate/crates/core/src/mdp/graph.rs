//! Graph algorithms on choice models: SCCs, end components, reachability.

use super::ChoiceModel;

/// Iterative Tarjan over the nodes with `active[v]`; components in reverse topological order.
pub fn strongly_connected_components(
    active: &[bool],
    successors: &dyn Fn(usize) -> Vec<usize>,
) -> Vec<Vec<usize>> {
    let n = active.len();
    const NONE: usize = usize::MAX;
    let mut index = vec![NONE; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if !active[root] || index[root] != NONE {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, successors(root), 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if !active[w] {
                    continue;
                }
                if index[w] == NONE {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let succ = successors(w);
                    call.push((w, succ, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(parent) = call.last() {
                    low[parent.0] = low[parent.0].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// Maximal end components within `states`, using only `allowed` choices.
///
/// Returns each component's states together with the updated `allowed`
/// restricted to choices staying inside their component.
pub fn mec_decomposition(
    model: &ChoiceModel,
    states: &[bool],
    allowed: &[Vec<bool>],
) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let n = model.num_states();
    let mut active = states.to_vec();
    let mut allowed: Vec<Vec<bool>> = allowed.to_vec();
    loop {
        let components = {
            let succ = |s: usize| -> Vec<usize> {
                let mut out = Vec::new();
                for (c, choice) in model.choices[s].iter().enumerate() {
                    if allowed[s][c] {
                        out.extend(choice.branches.iter().map(|b| b.target));
                    }
                }
                out
            };
            strongly_connected_components(&active, &succ)
        };
        let mut component_of = vec![usize::MAX; n];
        for (i, comp) in components.iter().enumerate() {
            for &s in comp {
                component_of[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !active[s] {
                continue;
            }
            for (c, choice) in model.choices[s].iter().enumerate() {
                if allowed[s][c]
                    && choice
                        .branches
                        .iter()
                        .any(|b| !active[b.target] || component_of[b.target] != component_of[s])
                {
                    allowed[s][c] = false;
                    changed = true;
                }
            }
            if !allowed[s].iter().any(|&a| a) {
                active[s] = false;
                changed = true;
            }
        }
        if !changed {
            let kept = components
                .into_iter()
                .filter(|comp| active[comp[0]])
                .collect();
            return (kept, allowed);
        }
    }
}

/// Predecessor lists: for each target, the (state, choice) pairs with a branch into it.
pub(crate) fn predecessors(model: &ChoiceModel) -> Vec<Vec<(usize, usize)>> {
    let mut preds = vec![Vec::new(); model.num_states()];
    for (s, choices) in model.choices.iter().enumerate() {
        for (c, choice) in choices.iter().enumerate() {
            for b in &choice.branches {
                if preds[b.target].last() != Some(&(s, c)) {
                    preds[b.target].push((s, c));
                }
            }
        }
    }
    preds
}

/// States that can reach `target` with positive probability using `allowed`
/// choices from states in `domain`; records a witnessing choice per added state.
pub(crate) fn exists_reach(
    model: &ChoiceModel,
    target: &[bool],
    domain: &[bool],
    allowed: &[Vec<bool>],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let preds = predecessors(model);
    let mut reached = target.to_vec();
    let mut witness = vec![None; model.num_states()];
    let mut queue: std::collections::VecDeque<usize> =
        (0..model.num_states()).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &(s, c) in &preds[t] {
            if !reached[s] && domain[s] && allowed[s][c] {
                reached[s] = true;
                witness[s] = Some(c);
                queue.push_back(s);
            }
        }
    }
    (reached, witness)
}

/// States in `domain` from which some strategy reaches `target` almost surely.
///
/// Returns the winning set and an attractor strategy whose choices stay
/// inside the winning set and make progress towards `target`.
pub(crate) fn prob1_exists(
    model: &ChoiceModel,
    target: &[bool],
    domain: &[bool],
    allowed: &[Vec<bool>],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = model.num_states();
    let preds = predecessors(model);
    let mut u: Vec<bool> = (0..n).map(|s| domain[s] || target[s]).collect();
    loop {
        let mut reached = target.to_vec();
        let mut strategy = vec![None; n];
        let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&s| target[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &(s, c) in &preds[t] {
                if reached[s]
                    || !u[s]
                    || !allowed[s][c]
                    || !model.choices[s][c].branches.iter().all(|b| u[b.target])
                {
                    continue;
                }
                reached[s] = true;
                strategy[s] = Some(c);
                queue.push_back(s);
            }
        }
        if reached == u {
            return (reached, strategy);
        }
        u = reached;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::testing::{fin, model};
    use crate::model::RewardSign;
    use crate::numeric::{rational, rint};

    #[test]
    fn tarjan_finds_cycles() {
        let edges = [vec![1], vec![2], vec![0, 3], vec![3], vec![]];
        let succ = |v: usize| edges[v].clone();
        let mut comps = strongly_connected_components(&[true; 5], &succ);
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3], vec![4]]);
    }

    #[test]
    fn mecs_and_almost_sure_reachability() {
        // 0 -a-> {0: 1/2, 1: 1/2}, 0 -b-> 2; 1 -a-> 0; 2 goal
        let m = model(
            RewardSign::Positive,
            &[false, false, true],
            vec![
                vec![
                    (
                        0,
                        vec![(0, rational(1, 2), fin(0)), (1, rational(1, 2), fin(0))],
                    ),
                    (1, vec![(2, rint(1), fin(1))]),
                ],
                vec![(0, vec![(0, rint(1), fin(0))])],
                vec![(0, vec![(2, rint(1), fin(0))])],
            ],
        );
        let allowed: Vec<Vec<bool>> = m.choices.iter().map(|c| vec![true; c.len()]).collect();
        let (mecs, inner) = mec_decomposition(&m, &[true, true, false], &allowed);
        assert_eq!(mecs, vec![vec![0, 1]]);
        assert_eq!(inner[0], vec![true, false]);
        let (win, strat) = prob1_exists(&m, &[false, false, true], &[true, true, false], &allowed);
        assert_eq!(win, vec![true, true, true]);
        assert_eq!(strat[0], Some(1));
        assert_eq!(strat[1], Some(0));
    }
}
