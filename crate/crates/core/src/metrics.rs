//! Queue-bound violation and Table-style summary statistics.
//!
//! A slot counts as a violation when `q_d >= q_ub` (inclusive). Queue and
//! waiting-time moments are pooled over all PDCs, one sample per
//! (PDC, slot) and one per dispatched package respectively, with population
//! (1/N) standard deviations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::SlotRecord;

/// Final queue length above which a PDC is flagged as saturated.
pub const SATURATION_QUEUE: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot estimate a violation probability from an empty trace")]
    EmptyTrace,
}

pub fn violation_probability(trace: &[usize], q_ub: f64) -> Result<f64, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let hits = trace.iter().filter(|&&q| q as f64 >= q_ub).count();
    Ok(hits as f64 / trace.len() as f64)
}

/// Per-slot observations collected over an evaluation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub q_ub: Vec<f64>,
    /// `queues[d][k]`: queue of PDC `d` at the k-th recorded slot.
    pub queues: Vec<Vec<usize>>,
    /// `owned[d][k]`: UAVs assigned to PDC `d` at the k-th recorded slot.
    pub owned: Vec<Vec<usize>>,
    /// Queueing delays of dispatched packages, per PDC.
    pub waits: Vec<Vec<u64>>,
}

impl RunTrace {
    pub fn new(q_ub: Vec<f64>) -> Self {
        let d = q_ub.len();
        Self {
            q_ub,
            queues: vec![Vec::new(); d],
            owned: vec![Vec::new(); d],
            waits: vec![Vec::new(); d],
        }
    }

    pub fn record(&mut self, rec: &SlotRecord) {
        for d in 0..self.q_ub.len() {
            self.queues[d].push(rec.queue_lengths[d]);
            self.owned[d].push(rec.owned[d]);
        }
        for &(d, w) in &rec.waits {
            self.waits[d].push(w);
        }
    }

    pub fn slots(&self) -> usize {
        self.queues.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub violation: Vec<f64>,
    pub p_max: f64,
    pub q_mean: f64,
    pub w_mean: f64,
    pub sigma_q: f64,
    pub sigma_w: f64,
    /// Time-average of the total number of UAVs assigned to PDCs.
    pub n_mean: f64,
    pub n_mean_per_pdc: Vec<f64>,
    pub saturated: Vec<bool>,
    pub horizon: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (count, sum) = values
        .clone()
        .fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    if count == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / count as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    (mean, var.sqrt())
}

pub fn summarize(trace: &RunTrace) -> MetricsReport {
    let slots = trace.slots();
    let violation: Vec<f64> = trace
        .queues
        .iter()
        .zip(&trace.q_ub)
        .map(|(q, &ub)| violation_probability(q, ub).unwrap_or(0.0))
        .collect();
    let p_max = violation.iter().copied().fold(0.0, f64::max);
    let (q_mean, sigma_q) = mean_std(trace.queues.iter().flatten().map(|&q| q as f64));
    let (w_mean, sigma_w) = mean_std(trace.waits.iter().flatten().map(|&w| w as f64));
    let n_mean_per_pdc: Vec<f64> = trace
        .owned
        .iter()
        .map(|o| mean_std(o.iter().map(|&n| n as f64)).0)
        .collect();
    MetricsReport {
        violation,
        p_max,
        q_mean,
        w_mean,
        sigma_q,
        sigma_w,
        n_mean: n_mean_per_pdc.iter().sum(),
        n_mean_per_pdc,
        saturated: trace
            .queues
            .iter()
            .map(|q| q.last().is_some_and(|&l| l > SATURATION_QUEUE))
            .collect(),
        horizon: slots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_examples() {
        assert_eq!(violation_probability(&[0, 120, 130, 40], 100.0), Ok(0.5));
        assert_eq!(violation_probability(&[0, 10, 99], 100.0), Ok(0.0));
        assert_eq!(violation_probability(&[100, 100], 100.0), Ok(1.0));
        assert_eq!(
            violation_probability(&[], 100.0),
            Err(MetricsError::EmptyTrace)
        );
    }

    #[test]
    fn wait_is_dispatch_minus_arrival() {
        let pkg = crate::simcore::Package {
            id: 0,
            region: 0,
            arrival_slot: 10,
            destination: crate::geography::Point::new(0.0, 0.0),
            dispatch_slot: Some(25),
            delivered_slot: None,
        };
        assert_eq!(pkg.wait(), Some(15));
    }

    #[test]
    fn constant_allocation_averages_to_itself() {
        let mut trace = RunTrace::new(vec![10.0, 10.0]);
        for t in 0..50 {
            trace.record(&SlotRecord {
                t,
                queue_lengths: vec![0, 0],
                owned: vec![12, 11],
                ..SlotRecord::default()
            });
        }
        let r = summarize(&trace);
        assert_eq!(r.n_mean, 23.0);
        assert_eq!(r.horizon, 50);
    }

    proptest::proptest! {
        #[test]
        fn violation_permutation_invariant(mut q in proptest::collection::vec(0usize..300, 1..200), ub in 1.0f64..300.0) {
            let a = violation_probability(&q, ub).unwrap();
            q.reverse();
            let k = q.len() / 3;
            q.rotate_left(k);
            proptest::prop_assert_eq!(a, violation_probability(&q, ub).unwrap());
            proptest::prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
