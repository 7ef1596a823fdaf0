//! Allocation controllers: the static, threshold and queue-length baselines,
//! plus the common interface the learned policy also implements.
//!
//! Every controller speaks in per-PDC count deltas at action epochs; the
//! central scheduler turns those into concrete UAV swaps, so all methods share
//! the same relocation physics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("apportionment weights must be non-negative, finite and not all zero")]
    DegenerateWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Static,
    Threshold,
    Ql,
    Rl,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Static,
        ControllerKind::Threshold,
        ControllerKind::Ql,
        ControllerKind::Rl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Static => "static",
            ControllerKind::Threshold => "threshold",
            ControllerKind::Ql => "ql",
            ControllerKind::Rl => "rl",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown controller '{s}'"))
    }
}

/// Largest-remainder apportionment of `total` items by `weights`.
/// Remainder ties go to the lower index.
pub fn apportion(weights: &[f64], total: usize) -> Result<Vec<usize>, ControllerError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ControllerError::DegenerateWeights);
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(ControllerError::DegenerateWeights);
    }
    let shares: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Population-proportional fixed allocation.
pub fn static_allocate(weights: &[f64], total: usize) -> Result<Vec<usize>, ControllerError> {
    apportion(weights, total)
}

/// Shrink below half the bound, grow at one and a half times the bound.
pub fn threshold_decide(queue: usize, q_ub: f64, delta: i32) -> i32 {
    let q = queue as f64;
    if q < 0.5 * q_ub {
        -delta
    } else if q >= 1.5 * q_ub {
        delta
    } else {
        0
    }
}

/// Queue-proportional allocation of the whole fleet; empty queues split evenly.
pub fn ql_proportional_allocate(queues: &[usize], total: usize) -> Vec<usize> {
    let weights: Vec<f64> = if queues.iter().all(|&q| q == 0) {
        vec![1.0; queues.len()]
    } else {
        queues.iter().map(|&q| q as f64).collect()
    };
    apportion(&weights, total).expect("non-empty positive weights")
}

/// Observation handed to a controller at an action epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochView<'a> {
    pub epoch: u64,
    /// `(n_d, q_d)` per PDC.
    pub states: &'a [(usize, usize)],
    pub fleet: usize,
}

/// Something that decides per-PDC deltas every action epoch.
pub trait Controller {
    fn decide(&mut self, view: &EpochView<'_>) -> Vec<i32>;
}

pub struct StaticController;

impl Controller for StaticController {
    fn decide(&mut self, view: &EpochView<'_>) -> Vec<i32> {
        vec![0; view.states.len()]
    }
}

pub struct ThresholdController {
    pub q_ub: Vec<f64>,
    pub delta: i32,
}

impl Controller for ThresholdController {
    fn decide(&mut self, view: &EpochView<'_>) -> Vec<i32> {
        view.states
            .iter()
            .zip(&self.q_ub)
            .map(|(&(_, q), &ub)| threshold_decide(q, ub, self.delta))
            .collect()
    }
}

/// Re-apportions the whole fleet by queue length every `every` epochs
/// (never at epoch 0, so all methods start from the same allocation).
pub struct QueueProportionalController {
    pub every: u64,
}

impl Controller for QueueProportionalController {
    fn decide(&mut self, view: &EpochView<'_>) -> Vec<i32> {
        if view.epoch == 0 || !view.epoch.is_multiple_of(self.every) {
            return vec![0; view.states.len()];
        }
        let queues: Vec<usize> = view.states.iter().map(|s| s.1).collect();
        ql_proportional_allocate(&queues, view.fleet)
            .iter()
            .zip(view.states)
            .map(|(&target, &(n, _))| target as i32 - n as i32)
            .collect()
    }
}
