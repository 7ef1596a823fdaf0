//! Double-DQN agent for a single PDC.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::encoding::encode_state;
use super::network::{argmax, Mlp, LAYER_SIZES};
use super::replay::{Experience, ReplayBuffer};
use crate::rng::SimRng;

pub const NUM_ACTIONS: usize = 3;

/// Maps an action index to a UAV-count delta: 0 -> -delta, 1 -> 0, 2 -> +delta.
pub fn action_delta(action: usize, delta: i32) -> i32 {
    (action as i32 - 1) * delta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub learning_starts: usize,
    pub target_update_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the planned steps over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Episode ends (terminally) once any queue exceeds this.
    pub saturation_queue: usize,
    /// Episodes pooled into the training-time violation estimate.
    pub violation_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            max_steps: 1000,
            gamma: 0.99,
            batch_size: 25,
            learning_rate: 0.001,
            replay_capacity: 1_000_000,
            learning_starts: 1000,
            target_update_episodes: 5,
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            saturation_queue: 2000,
            violation_window: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        for (name, eps) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(format!("{name} must be in [0, 1], got {eps}"));
            }
        }
        if self.batch_size == 0 || self.max_steps == 0 || self.replay_capacity == 0 {
            return Err("batch_size, max_steps and replay_capacity must be positive".into());
        }
        if self.target_update_episodes == 0 || self.violation_window == 0 {
            return Err("target_update_episodes and violation_window must be positive".into());
        }
        Ok(())
    }

    pub fn planned_steps(&self) -> u64 {
        (self.episodes * self.max_steps) as u64
    }
}

/// Linear decay from `start` to `end` over the first `fraction` of
/// `total_steps`, constant afterwards.
pub fn epsilon_at(step: u64, total_steps: u64, start: f64, end: f64, fraction: f64) -> f64 {
    let horizon = fraction * total_steps as f64;
    if horizon <= 0.0 || step as f64 >= horizon {
        return end;
    }
    start + (end - start) * (step as f64 / horizon)
}

/// Uniform random action with probability `eps`, greedy otherwise.
pub fn select_action<R: Rng + ?Sized>(
    net: &Mlp,
    state: (usize, usize),
    eps: f64,
    rng: &mut R,
) -> usize {
    if rng.random_bool(eps) {
        rng.random_range(0..net.num_outputs())
    } else {
        argmax(&net.forward(&encode_state(state.0, state.1)))
    }
}

/// Double-DQN target: the online values choose the next action, the target
/// network's value for that action is bootstrapped.
pub fn ddqn_target_from_values(
    reward: f64,
    online_next: &[f64],
    target_next: &[f64],
    done: bool,
    gamma: f64,
) -> f64 {
    if done {
        return reward;
    }
    reward + gamma * target_next[argmax(online_next)]
}

pub fn ddqn_target(
    reward: f64,
    next_state: (usize, usize),
    done: bool,
    online: &Mlp,
    target: &Mlp,
    gamma: f64,
) -> f64 {
    if done {
        return reward;
    }
    let x = encode_state(next_state.0, next_state.1);
    ddqn_target_from_values(
        reward,
        &online.forward(&x),
        &target.forward(&x),
        done,
        gamma,
    )
}

#[derive(Debug, Clone)]
pub struct DdqnAgent {
    pub online: Mlp,
    pub target: Mlp,
    adam: Adam,
    replay: ReplayBuffer,
    rng: SimRng,
    grads: Vec<f64>,
}

impl DdqnAgent {
    pub fn new(mut rng: SimRng, cfg: &TrainConfig) -> Self {
        let online = Mlp::glorot(&LAYER_SIZES, &mut rng).expect("valid layer sizes");
        Self::from_network(online, rng, cfg)
    }

    pub fn from_network(online: Mlp, rng: SimRng, cfg: &TrainConfig) -> Self {
        let n = online.params().len();
        Self {
            target: online.clone(),
            online,
            adam: Adam::new(n, cfg.learning_rate),
            replay: ReplayBuffer::new(cfg.replay_capacity),
            rng,
            grads: vec![0.0; n],
        }
    }

    pub fn act(&mut self, state: (usize, usize), eps: f64) -> usize {
        select_action(&self.online, state, eps, &mut self.rng)
    }

    pub fn remember(&mut self, exp: Experience) {
        self.replay.push(exp);
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.adam.steps()
    }

    /// One mini-batch step on the mean squared TD error; `None` while the
    /// buffer is still warming up.
    pub fn learn(&mut self, cfg: &TrainConfig) -> Option<f64> {
        if self.replay.len() < cfg.learning_starts.max(cfg.batch_size) {
            return None;
        }
        let batch: Vec<Experience> = self
            .replay
            .sample(&mut self.rng, cfg.batch_size)
            .into_iter()
            .copied()
            .collect();
        self.grads.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for e in &batch {
            let y = ddqn_target(
                e.reward,
                e.next_state,
                e.done,
                &self.online,
                &self.target,
                cfg.gamma,
            );
            let x = encode_state(e.state.0, e.state.1);
            loss += self
                .online
                .accumulate_gradient(&x, e.action, y, scale, &mut self.grads);
        }
        self.adam
            .step(self.online.params_mut(), &self.grads)
            .expect("optimizer shaped from network");
        Some(loss * scale)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}
