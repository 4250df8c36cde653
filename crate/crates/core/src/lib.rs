//! Sound lower bounds on optimal expected total rewards in POMDPs.
//!
//! A finite part of the belief MDP is explored; beliefs left on the frontier
//! are closed off by cut-offs (under-approximative values from a fixed
//! observation-based policy) and, optionally, by clipping them onto grid
//! beliefs. The resulting finite MDP is solved to obtain the bound.

pub mod analysis;
pub mod belief;
pub mod clipping;
pub mod explorer;
pub mod mdp;
pub mod model;
pub mod numeric;
pub mod report;
pub mod solver;

pub use belief::Belief;
pub use model::{parse_pomdp, Pomdp, PomdpModel, RewardStructure};
pub use numeric::{Extended, Rational};
