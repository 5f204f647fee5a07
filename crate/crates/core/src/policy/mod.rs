//! Action-selection policies sharing one interface.

mod bob;
mod expert;
pub mod llm;
mod parse;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::craftworld::{Action, Observation};
use crate::feedback::Feedback;

pub use bob::{BobFactory, BobPolicy};
pub use expert::{condition_on_feedback, ScriptedExpert, ScriptedExpertConfig, BOOST};
pub use parse::{parse_action, ParseFailure};

/// Default number of previous (observation, action) pairs kept in the context.
pub const DEFAULT_HISTORY: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyContext {
    /// Oldest first.
    pub history: VecDeque<(String, Action)>,
    pub max_history: usize,
    pub goal: Option<String>,
    pub feedback: Option<Feedback>,
}

impl Default for PolicyContext {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY)
    }
}

impl PolicyContext {
    pub fn new(max_history: usize) -> Self {
        Self { history: VecDeque::new(), max_history, goal: None, feedback: None }
    }

    pub fn with_goal(mut self, goal: Option<String>) -> Self {
        self.goal = goal;
        self
    }

    pub fn with_feedback(mut self, feedback: Option<Feedback>) -> Self {
        self.feedback = feedback;
        self
    }

    pub fn push(&mut self, obs_text: String, action: Action) {
        if self.max_history == 0 {
            return;
        }
        if self.history.len() == self.max_history {
            self.history.pop_front();
        }
        self.history.push_back((obs_text, action));
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("endpoint failed after {attempts} attempts (last status {status:?}): {message}")]
    Transport { attempts: u32, status: Option<u16>, message: String },
    #[error("policy misconfigured: {0}")]
    Config(String),
}

pub trait Policy: Send {
    /// Called before every episode with that episode's seed.
    fn reset(&mut self, _episode_seed: u64) {}

    fn decide(&mut self, ctx: &PolicyContext, obs: &Observation) -> Result<Action, PolicyError>;
}

/// Builds one policy instance per worker.
pub trait PolicyFactory: Sync {
    fn id(&self) -> String;
    fn make(&self) -> Box<dyn Policy>;
}

/// Uniform random action with probability `epsilon`, drawn from the dedicated noise stream.
pub fn noise_action(rng: &mut ChaCha8Rng, epsilon: f64) -> Option<Action> {
    if epsilon <= 0.0 {
        return None;
    }
    if rng.gen::<f64>() < epsilon {
        Action::from_index(rng.gen_range(0..Action::COUNT))
    } else {
        None
    }
}

pub fn noise_rng(episode_seed: u64) -> ChaCha8Rng {
    crate::seeds::rng(episode_seed, "noise")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoopPolicy;

impl Policy for NoopPolicy {
    fn decide(&mut self, _: &PolicyContext, _: &Observation) -> Result<Action, PolicyError> {
        Ok(Action::Noop)
    }
}

impl PolicyFactory for NoopPolicy {
    fn id(&self) -> String {
        "noop".into()
    }

    fn make(&self) -> Box<dyn Policy> {
        Box::new(NoopPolicy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_keeps_the_newest_pairs_in_order() {
        let mut ctx = PolicyContext::new(3);
        for (i, a) in [Action::Noop, Action::Do, Action::Sleep, Action::MoveUp].into_iter().enumerate() {
            ctx.push(format!("o{i}"), a);
        }
        let got: Vec<_> = ctx.history.iter().map(|(o, a)| (o.as_str(), *a)).collect();
        assert_eq!(got, vec![("o1", Action::Do), ("o2", Action::Sleep), ("o3", Action::MoveUp)]);
        let mut none = PolicyContext::new(0);
        none.push("x".into(), Action::Do);
        assert!(none.history.is_empty());
    }
}
