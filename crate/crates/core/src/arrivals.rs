//! Truck batch-arrival generators: Bernoulli, time-varying Bernoulli (TVB) and
//! Markov-modulated Bernoulli (MMB).
//!
//! A truck can only arrive at an *opportunity* (every `truck_interval` slots);
//! the process decides whether it actually does, and the batch size is drawn
//! uniformly from `[mean - half_width, mean + half_width]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    High,
    Low,
}

/// When the MMB regime chain takes a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseClock {
    #[default]
    Slot,
    Opportunity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ArrivalPattern {
    Bernoulli {
        p: f64,
    },
    Tvb {
        p_high: f64,
        p_low: f64,
        period_mins: u64,
    },
    Mmb {
        p_high: f64,
        p_low: f64,
        p_high_to_low: f64,
        p_low_to_high: f64,
        #[serde(default)]
        phase_clock: PhaseClock,
    },
}

impl ArrivalPattern {
    pub fn name(&self) -> &'static str {
        match self {
            ArrivalPattern::Bernoulli { .. } => "bernoulli",
            ArrivalPattern::Tvb { .. } => "tvb",
            ArrivalPattern::Mmb { .. } => "mmb",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let probs: Vec<f64> = match *self {
            ArrivalPattern::Bernoulli { p } => vec![p],
            ArrivalPattern::Tvb {
                p_high,
                p_low,
                period_mins,
            } => {
                if period_mins == 0 {
                    return Err("TVB period must be at least one slot".into());
                }
                vec![p_high, p_low]
            }
            ArrivalPattern::Mmb {
                p_high,
                p_low,
                p_high_to_low,
                p_low_to_high,
                ..
            } => vec![p_high, p_low, p_high_to_low, p_low_to_high],
        };
        match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            Some(p) => Err(format!("probability {p} outside [0, 1]")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub mean: u32,
    pub half_width: u32,
}

impl BatchSpec {
    pub fn new(mean: u32, half_width: u32) -> Result<Self, String> {
        if half_width > mean {
            return Err(format!("batch half width {half_width} exceeds mean {mean}"));
        }
        Ok(Self { mean, half_width })
    }

    pub fn range(&self) -> std::ops::RangeInclusive<u32> {
        self.mean - self.half_width..=self.mean + self.half_width
    }
}

/// Arrival section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalConfig {
    #[serde(flatten)]
    pub pattern: ArrivalPattern,
    pub truck_interval_mins: u64,
    pub batch_mean: Vec<u32>,
    pub batch_half_width: u32,
}

impl ArrivalConfig {
    pub fn validate(&self, num_pdcs: usize) -> Result<(), String> {
        self.pattern.validate()?;
        if self.truck_interval_mins == 0 {
            return Err("truck_interval_mins must be at least 1".into());
        }
        if self.batch_mean.len() != num_pdcs {
            return Err(format!(
                "batch_mean has {} entries for {} PDCs",
                self.batch_mean.len(),
                num_pdcs
            ));
        }
        for &m in &self.batch_mean {
            BatchSpec::new(m, self.batch_half_width)?;
        }
        Ok(())
    }

    pub fn batch_spec(&self, pdc: usize) -> BatchSpec {
        BatchSpec {
            mean: self.batch_mean[pdc],
            half_width: self.batch_half_width,
        }
    }

    /// One generator per PDC, all starting in the High phase.
    pub fn processes(&self) -> Vec<ArrivalProcess> {
        (0..self.batch_mean.len())
            .map(|_| ArrivalProcess::new(self.pattern.clone(), self.truck_interval_mins))
            .collect()
    }
}

/// One PDC's arrival generator with its regime state.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProcess {
    pattern: ArrivalPattern,
    slot_interval: u64,
    phase: Phase,
}

impl ArrivalProcess {
    pub fn new(pattern: ArrivalPattern, slot_interval: u64) -> Self {
        Self {
            pattern,
            slot_interval: slot_interval.max(1),
            phase: Phase::High,
        }
    }

    pub fn pattern(&self) -> &ArrivalPattern {
        &self.pattern
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn arrival_opportunity(&self, t: u64) -> bool {
        t.is_multiple_of(self.slot_interval)
    }

    /// Probability that a truck arrives if `t` is an opportunity.
    pub fn current_rate(&self, t: u64) -> f64 {
        match self.pattern {
            ArrivalPattern::Bernoulli { p } => p,
            ArrivalPattern::Tvb {
                p_high,
                p_low,
                period_mins,
            } => {
                if t % (2 * period_mins) < period_mins {
                    p_high
                } else {
                    p_low
                }
            }
            ArrivalPattern::Mmb { p_high, p_low, .. } => match self.phase {
                Phase::High => p_high,
                Phase::Low => p_low,
            },
        }
    }

    /// One step of the two-state regime chain. No-op for non-MMB patterns.
    pub fn mmb_phase_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Phase {
        if let ArrivalPattern::Mmb {
            p_high_to_low,
            p_low_to_high,
            ..
        } = self.pattern
        {
            self.phase = match self.phase {
                Phase::High if rng.random_bool(p_high_to_low) => Phase::Low,
                Phase::Low if rng.random_bool(p_low_to_high) => Phase::High,
                same => same,
            };
        }
        self.phase
    }

    /// Batch size arriving at slot `t`, 0 when no truck comes.
    pub fn draw_batch<R: Rng + ?Sized>(&self, spec: BatchSpec, t: u64, rng: &mut R) -> u32 {
        if !self.arrival_opportunity(t) {
            return 0;
        }
        if !rng.random_bool(self.current_rate(t)) {
            return 0;
        }
        rng.random_range(spec.range())
    }

    /// Draws this slot's batch and then advances the regime chain.
    pub fn tick<R: Rng + ?Sized>(&mut self, spec: BatchSpec, t: u64, rng: &mut R) -> u32 {
        let batch = self.draw_batch(spec, t, rng);
        if let ArrivalPattern::Mmb { phase_clock, .. } = self.pattern {
            if phase_clock == PhaseClock::Slot || self.arrival_opportunity(t) {
                self.mmb_phase_step(rng);
            }
        }
        batch
    }
}
