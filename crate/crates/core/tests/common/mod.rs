//! Seeded random acyclic POMDPs and an independent exact oracle for them.
//!
//! The oracle never touches the library's belief, MDP or exploration code: it
//! works on plain maps of unnormalised state mass and recurses over the
//! (finite) belief tree.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

use belief_bound::model::{parse_pomdp, Pomdp, PomdpModel, RewardStructure};
use belief_bound::{Belief, Rational};
use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RUNNING_EXAMPLE: &str =
    "pomdp\nstates 3\nactions alpha beta\nobservations white orange\n\
    init 0\nobs 0 white\nobs 1 white\nobs 2 orange\ntrans 0 alpha 0 1/2\ntrans 0 alpha 1 1/2\n\
    trans 0 beta 2 1\ntrans 1 alpha 1 1\ntrans 1 beta 2 1\ntrans 2 alpha 2 1\n\
    reward 1 beta 2 1\ngoal-obs orange\n";

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Positive,
    Negative,
    /// Goal states share observations with ordinary states.
    SharedGoals,
}

#[derive(Clone, Debug)]
pub struct RandomModel {
    pub seed: u64,
    pub text: String,
    pub model: PomdpModel,
    pub goal: Vec<bool>,
}

/// Random model: ordinary states only move forward, goals and an optional
/// zero-reward trap are absorbing, and every action is enabled everywhere.
pub fn random_model(seed: u64, variant: Variant) -> RandomModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trap = rng.random_bool(0.4);
    let goals = rng.random_range(1..=2usize);
    let regular = rng.random_range(3..=8 - goals - trap as usize);
    let n = regular + goals + trap as usize;
    let actions = rng.random_range(1..=3usize);
    let regular_obs = rng.random_range(1..=(if trap { 2 } else { 3 }).min(regular));

    let mut obs_names: Vec<String> = (0..regular_obs).map(|i| format!("z{i}")).collect();
    let mut obs_of: Vec<usize> = (0..regular)
        .map(|_| rng.random_range(0..regular_obs))
        .collect();
    // every regular observation is used at least once
    for (z, slot) in obs_of.iter_mut().take(regular_obs).enumerate() {
        *slot = z;
    }
    let goal_obs = if variant == Variant::SharedGoals {
        None
    } else {
        obs_names.push("goal".into());
        Some(obs_names.len() - 1)
    };
    for _ in 0..goals {
        obs_of.push(goal_obs.unwrap_or_else(|| rng.random_range(0..regular_obs)));
    }
    if trap {
        obs_names.push("trap".into());
        obs_of.push(obs_names.len() - 1);
    }
    let goal_states: Vec<usize> = (regular..regular + goals).collect();
    let trap_state = trap.then_some(n - 1);

    let action_names: Vec<String> = (0..actions).map(|a| format!("a{a}")).collect();
    let mut text = String::from("pomdp\n");
    let _ = writeln!(text, "states {n}");
    let _ = writeln!(text, "actions {}", action_names.join(" "));
    let _ = writeln!(text, "observations {}", obs_names.join(" "));
    let _ = writeln!(text, "init 0");
    for (s, z) in obs_of.iter().enumerate() {
        let _ = writeln!(text, "obs {s} {}", obs_names[*z]);
    }
    let reward_values = [q(1, 2), q(1, 1), q(2, 1), q(3, 1)];
    let mut reward_lines = String::new();
    for s in 0..n {
        for a in &action_names {
            if s >= regular {
                let _ = writeln!(text, "trans {s} {a} {s} 1");
                continue;
            }
            let mut targets: Vec<usize> = (s + 1..regular).collect();
            targets.extend(&goal_states);
            targets.extend(trap_state);
            let count = rng.random_range(1..=3usize.min(targets.len()));
            let mut chosen = BTreeSet::new();
            while chosen.len() < count {
                chosen.insert(targets[rng.random_range(0..targets.len())]);
            }
            let weights: Vec<i64> = chosen.iter().map(|_| rng.random_range(1..=3)).collect();
            let total: i64 = weights.iter().sum();
            for (t, w) in chosen.iter().zip(&weights) {
                let _ = writeln!(text, "trans {s} {a} {t} {}", q(*w, total));
                if rng.random_bool(0.5) {
                    let mut r = reward_values[rng.random_range(0..reward_values.len())].clone();
                    if variant == Variant::Negative {
                        r = -r;
                    }
                    let _ = writeln!(reward_lines, "reward {s} {a} {t} {r}");
                }
            }
        }
    }
    text.push_str(&reward_lines);
    let goal_line: Vec<String> = goal_states.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(text, "goal {}", goal_line.join(" "));
    let model = parse_pomdp(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
    let goal = (0..n).map(|s| goal_states.contains(&s)).collect();
    RandomModel {
        seed,
        text,
        model,
        goal,
    }
}

/// Unnormalised state mass.
pub type Mass = BTreeMap<usize, Rational>;

/// Exact optimal expected total reward until the goal, by belief-tree recursion.
pub struct Oracle<'a> {
    pomdp: &'a Pomdp,
    rewards: &'a RewardStructure,
    goal: &'a [bool],
    memo: HashMap<Vec<(usize, Rational)>, Rational>,
}

impl<'a> Oracle<'a> {
    pub fn new(pomdp: &'a Pomdp, rewards: &'a RewardStructure, goal: &'a [bool]) -> Self {
        Oracle {
            pomdp,
            rewards,
            goal,
            memo: HashMap::new(),
        }
    }

    fn prob(&self, s: usize, a: usize, t: usize) -> Rational {
        self.pomdp.mdp().probability(s, a, t)
    }

    fn enabled(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.pomdp.mdp().choices(s).iter().map(|c| c.action)
    }

    /// A state that loops on itself with probability one and no reward under every action.
    pub fn is_dead(&self, s: usize) -> bool {
        self.enabled(s)
            .all(|a| self.prob(s, a, s).is_one() && self.rewards.get(s, a, s).is_zero())
    }

    fn live(&self, mass: &Mass) -> Mass {
        mass.iter()
            .filter(|(s, p)| !self.goal[**s] && !self.is_dead(**s) && !p.is_zero())
            .map(|(s, p)| (*s, p.clone()))
            .collect()
    }

    /// Value of arbitrary (possibly unnormalised) mass.
    pub fn value_of_mass(&mut self, mass: &Mass) -> Rational {
        let live = self.live(mass);
        let total: Rational = live.values().sum();
        if total.is_zero() {
            return Rational::zero();
        }
        let key: Vec<(usize, Rational)> = live.iter().map(|(s, p)| (*s, p / &total)).collect();
        if let Some(v) = self.memo.get(&key) {
            return &total * v;
        }
        let normalised: Mass = key.iter().cloned().collect();
        let first = key[0].0;
        let mut best: Option<Rational> = None;
        for a in self.enabled(first).collect::<Vec<_>>() {
            let mut value = Rational::zero();
            let mut next: BTreeMap<usize, Mass> = BTreeMap::new();
            for (s, p) in &normalised {
                for t in 0..self.pomdp.num_states() {
                    let pt = self.prob(*s, a, t);
                    if pt.is_zero() {
                        continue;
                    }
                    let joint = p * &pt;
                    value += &joint * self.rewards.get(*s, a, t);
                    *next
                        .entry(self.pomdp.obs_of(t))
                        .or_default()
                        .entry(t)
                        .or_insert_with(Rational::zero) += joint;
                }
            }
            for m in next.values() {
                value += self.value_of_mass(m);
            }
            if best.as_ref().is_none_or(|b| value > *b) {
                best = Some(value);
            }
        }
        let v = best.expect("at least one action");
        self.memo.insert(key, v.clone());
        total * v
    }

    pub fn value(&mut self, b: &Belief) -> Rational {
        let mass = b.entries().iter().cloned().collect();
        self.value_of_mass(&mass)
    }

    pub fn initial_value(&mut self) -> Rational {
        let mut mass = Mass::new();
        mass.insert(self.pomdp.mdp().initial(), Rational::one());
        self.value_of_mass(&mass)
    }

    /// All non-goal beliefs reachable from the initial one, in BFS order.
    pub fn reachable_beliefs(&self) -> Vec<Belief> {
        let start = Belief::dirac(self.pomdp, self.pomdp.mdp().initial());
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        let mut out = Vec::new();
        while let Some(b) = queue.pop_front() {
            if b.entries().iter().all(|(s, _)| self.goal[*s]) || !seen.insert(b.clone()) {
                continue;
            }
            for a in self.enabled(b.entries()[0].0) {
                let mut next: BTreeMap<usize, Mass> = BTreeMap::new();
                for (s, p) in b.entries() {
                    for t in 0..self.pomdp.num_states() {
                        let pt = self.prob(*s, a, t);
                        if !pt.is_zero() {
                            *next
                                .entry(self.pomdp.obs_of(t))
                                .or_default()
                                .entry(t)
                                .or_insert_with(Rational::zero) += p * pt;
                        }
                    }
                }
                for (z, m) in next {
                    let total: Rational = m.values().sum();
                    let entries = m.into_iter().map(|(s, p)| (s, p / &total)).collect();
                    queue.push_back(Belief::from_sorted(z, entries));
                }
            }
            out.push(b);
        }
        out
    }

    /// Values of a memoryless observation-based policy on the fully observable model.
    pub fn state_policy_values(&self, policy: &[usize]) -> Vec<Rational> {
        self.state_values(|_, s| vec![policy[self.pomdp.obs_of(s)]], |a, b| a.max(b))
    }

    /// Maximal values of the fully observable model.
    pub fn state_max_values(&self) -> Vec<Rational> {
        self.state_values(|o, s| o.enabled(s).collect(), |a, b| a.max(b))
    }

    /// Minimal values of the fully observable model.
    pub fn state_min_values(&self) -> Vec<Rational> {
        self.state_values(|o, s| o.enabled(s).collect(), |a, b| a.min(b))
    }

    fn state_values(
        &self,
        actions: impl Fn(&Self, usize) -> Vec<usize>,
        pick: impl Fn(Rational, Rational) -> Rational,
    ) -> Vec<Rational> {
        let n = self.pomdp.num_states();
        let mut values: Vec<Option<Rational>> = vec![None; n];
        // ordinary states only move to higher indices, so fill backwards
        for s in (0..n).rev() {
            if self.goal[s] || self.is_dead(s) {
                values[s] = Some(Rational::zero());
                continue;
            }
            let mut best: Option<Rational> = None;
            for a in actions(self, s) {
                let mut v = Rational::zero();
                for t in 0..n {
                    let pt = self.prob(s, a, t);
                    if pt.is_zero() {
                        continue;
                    }
                    let next = values[t]
                        .clone()
                        .unwrap_or_else(|| panic!("state {s} is not acyclic"));
                    v += pt * (self.rewards.get(s, a, t) + next);
                }
                best = Some(match best {
                    Some(b) => pick(b, v),
                    None => v,
                });
            }
            values[s] = best;
        }
        values.into_iter().map(|v| v.expect("filled")).collect()
    }
}

/// Belief-weighted state values.
pub fn weighted(b: &Belief, values: &[Rational]) -> Rational {
    b.entries().iter().map(|(s, p)| p * &values[*s]).sum()
}

pub fn random_belief(rng: &mut ChaCha8Rng, observation: usize, support: &[usize]) -> Belief {
    let weights: Vec<i64> = support.iter().map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let entries = support
        .iter()
        .zip(&weights)
        .map(|(s, w)| (*s, q(*w, total)))
        .collect();
    Belief::from_sorted(observation, entries)
}

pub fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
