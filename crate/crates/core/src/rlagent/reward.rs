//! Per-epoch reward of one PDC agent.
//!
//! Each slot of the epoch earns `alpha_2 = eps * lambda` when the queue is
//! within its bound and `alpha_1 = eps * lambda - lambda` when it is above;
//! the UAVs held during the epoch are charged one unit each. Averaged over a
//! long run this is the negated Lagrangian of "minimise mean UAVs subject to
//! P(q >= q_ub) <= eps" with multiplier `lambda * T`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub lambda: f64,
    pub epsilon: f64,
    /// Slots per action epoch.
    pub period: usize,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            epsilon: 0.1,
            period: 60,
        }
    }
}

impl RewardParams {
    pub fn alpha_violation(&self) -> f64 {
        self.epsilon * self.lambda - self.lambda
    }

    pub fn alpha_ok(&self) -> f64 {
        self.epsilon * self.lambda
    }

    /// Multiplier on the violation frequency in the averaged objective.
    pub fn lambda_bar(&self) -> f64 {
        self.lambda * self.period as f64
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(format!("epsilon must be in (0, 1), got {}", self.epsilon));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.period == 0 {
            return Err("period must be at least one slot".into());
        }
        Ok(())
    }
}

/// Number of slots whose queue strictly exceeds the bound.
pub fn count_violations(queue_trace: &[usize], q_ub: f64) -> usize {
    queue_trace.iter().filter(|&&q| q as f64 > q_ub).count()
}

pub fn compute_reward(queue_trace: &[usize], q_ub: f64, uavs: usize, params: &RewardParams) -> f64 {
    let over = count_violations(queue_trace, q_ub);
    let under = queue_trace.len() - over;
    over as f64 * params.alpha_violation() + under as f64 * params.alpha_ok() - uavs as f64
}
