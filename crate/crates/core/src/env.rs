//! Epoch-level wrapper around the simulation: controllers act every `T`
//! slots, the scheduler realises their requests, then the world runs for one
//! epoch.

use crate::arrivals::ArrivalConfig;
use crate::geography::District;
use crate::rlagent::reward::RewardParams;
use crate::rng::{stream, SimRng, Stream};
use crate::scheduler;
use crate::simcore::{SimError, SimState, SlotRecord};

/// Everything that defines one environment instance apart from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub district: District,
    pub arrivals: ArrivalConfig,
    /// Per-PDC queue bound.
    pub q_ub: Vec<f64>,
    pub reward: RewardParams,
    /// Magnitude of one agent action.
    pub delta: i32,
    pub initial_allocation: Vec<usize>,
}

impl Scenario {
    pub fn num_pdcs(&self) -> usize {
        self.district.num_pdcs()
    }

    pub fn period(&self) -> usize {
        self.reward.period
    }
}

pub struct FleetEnv {
    sim: SimState,
    scheduler_rng: SimRng,
    period: usize,
    epoch: u64,
}

impl FleetEnv {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, SimError> {
        Ok(Self {
            sim: SimState::new(
                &scenario.district,
                &scenario.arrivals,
                &scenario.initial_allocation,
                seed,
            )?,
            scheduler_rng: stream(seed, Stream::Scheduler),
            period: scenario.period(),
            epoch: 0,
        })
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// `(n_d, q_d)` for every PDC.
    pub fn states(&self) -> Vec<(usize, usize)> {
        (0..self.sim.num_pdcs())
            .map(|d| self.sim.observe(d))
            .collect()
    }

    /// Applies `requests` through the scheduler and runs one epoch, handing
    /// every slot record to `on_slot`. Returns the allocation held during the
    /// epoch.
    pub fn run_epoch(
        &mut self,
        requests: &[i32],
        mut on_slot: impl FnMut(&SlotRecord),
    ) -> Result<Vec<usize>, SimError> {
        let moves = scheduler::schedule(&self.sim, requests, &mut self.scheduler_rng);
        self.sim.apply_allocation_moves(&moves)?;
        let held = self.sim.owned_per_pdc();
        for _ in 0..self.period {
            let rec = self.sim.step_slot();
            on_slot(&rec);
        }
        self.epoch += 1;
        Ok(held)
    }
}
