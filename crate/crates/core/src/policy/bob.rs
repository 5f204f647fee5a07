//! Bob: greedy decoding of the trained linear softmax model.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{noise_action, noise_rng, Policy, PolicyContext, PolicyError, PolicyFactory};
use crate::craftworld::{render_text, Action, Observation};
use crate::trainer::{featurize, LinearSoftmaxModel};

pub struct BobPolicy {
    model: Arc<LinearSoftmaxModel>,
    epsilon: f64,
    noise: ChaCha8Rng,
}

impl BobPolicy {
    pub fn new(model: Arc<LinearSoftmaxModel>, epsilon: f64) -> Self {
        Self { model, epsilon, noise: noise_rng(0) }
    }
}

impl Policy for BobPolicy {
    fn reset(&mut self, episode_seed: u64) {
        self.noise = noise_rng(episode_seed);
    }

    fn decide(&mut self, ctx: &PolicyContext, obs: &Observation) -> Result<Action, PolicyError> {
        if let Some(a) = noise_action(&mut self.noise, self.epsilon) {
            return Ok(a);
        }
        let history: Vec<(String, Action)> = ctx.history.iter().cloned().collect();
        let x = featurize(ctx.goal.as_deref().unwrap_or(""), &history, &render_text(obs), self.model.dim);
        Ok(self.model.predict(&x))
    }
}

/// Shares one model across workers; `epsilon` > 0 turns Bob into a noisy explorer.
#[derive(Clone)]
pub struct BobFactory {
    pub model: Arc<LinearSoftmaxModel>,
    pub epsilon: f64,
}

impl BobFactory {
    pub fn new(model: LinearSoftmaxModel, epsilon: f64) -> Self {
        Self { model: Arc::new(model), epsilon }
    }
}

impl PolicyFactory for BobFactory {
    fn id(&self) -> String {
        format!("bob(iter={}, data={}, eps={})", self.model.meta.iteration, self.model.meta.dataset_hash.get(..12).unwrap_or(""), self.epsilon)
    }

    fn make(&self) -> Box<dyn Policy> {
        Box::new(BobPolicy::new(self.model.clone(), self.epsilon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::craftworld::{new_world, observe, InitSpec};

    #[test]
    fn zero_model_moves_left() {
        let mut bob = BobFactory::new(LinearSoftmaxModel::zeros(64), 0.0).make();
        let obs = observe(&new_world(42, &InitSpec::default()).unwrap());
        let ctx = PolicyContext::default().with_goal(Some("Collect wood".into()));
        assert_eq!(bob.decide(&ctx, &obs).unwrap(), Action::MoveLeft);
    }
}
