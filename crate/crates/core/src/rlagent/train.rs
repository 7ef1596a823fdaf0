//! Joint training of one DDQN agent per PDC in a shared environment.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use super::agent::{action_delta, epsilon_at, DdqnAgent, TrainConfig};
use super::replay::Experience;
use super::reward::compute_reward;
use crate::env::{FleetEnv, Scenario};
use crate::rng::{derive_seed, stream, Stream};
use crate::simcore::SimError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    /// Reward averaged over agents and action steps.
    pub mean_reward: f64,
    /// Average total UAVs assigned to PDCs during the episode.
    pub mean_uavs: f64,
    pub saturated: bool,
    pub epsilon: f64,
    /// Per-PDC `P(q >= q_ub)` over the slots of the last few episodes.
    pub violation: Vec<f64>,
}

impl EpisodeStats {
    pub fn max_violation(&self) -> f64 {
        self.violation.iter().copied().fold(0.0, f64::max)
    }
}

pub struct TrainOutcome {
    pub agents: Vec<DdqnAgent>,
    pub curves: Vec<EpisodeStats>,
    pub total_steps: u64,
}

pub fn new_agents(scenario: &Scenario, cfg: &TrainConfig, seed: u64) -> Vec<DdqnAgent> {
    (0..scenario.num_pdcs())
        .map(|d| DdqnAgent::new(stream(seed, Stream::Agent(d)), cfg))
        .collect()
}

fn validate(scenario: &Scenario, cfg: &TrainConfig) -> Result<(), TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    scenario.reward.validate().map_err(TrainError::Config)?;
    if scenario.district.total_uavs == 0 {
        return Err(TrainError::Config("fleet is empty".into()));
    }
    if scenario.q_ub.len() != scenario.num_pdcs() {
        return Err(TrainError::Config(format!(
            "{} queue bounds for {} PDCs",
            scenario.q_ub.len(),
            scenario.num_pdcs()
        )));
    }
    Ok(())
}

pub fn train(
    scenario: &Scenario,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    validate(scenario, cfg)?;
    train_agents(scenario, cfg, seed, new_agents(scenario, cfg, seed), |_| {})
}

/// Runs `cfg.episodes` episodes. `on_episode` sees every finished episode.
pub fn train_agents(
    scenario: &Scenario,
    cfg: &TrainConfig,
    seed: u64,
    mut agents: Vec<DdqnAgent>,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome, TrainError> {
    validate(scenario, cfg)?;
    let num_pdcs = scenario.num_pdcs();
    let planned = cfg.planned_steps();
    let mut step: u64 = 0;
    let mut curves = Vec::with_capacity(cfg.episodes);
    // (violating slots per PDC, slots) of recent episodes
    let mut window: VecDeque<(Vec<usize>, usize)> = VecDeque::new();

    for episode in 0..cfg.episodes {
        let mut env = FleetEnv::new(scenario, derive_seed(seed, episode as u64))?;
        let mut states = env.states();
        let mut reward_sum = 0.0;
        let mut uav_sum = 0.0;
        let mut violations = vec![0usize; num_pdcs];
        let mut slots = 0usize;
        let mut saturated = false;
        let mut steps = 0;
        let mut eps = epsilon_at(
            step,
            planned,
            cfg.epsilon_start,
            cfg.epsilon_end,
            cfg.epsilon_decay_fraction,
        );

        while steps < cfg.max_steps {
            eps = epsilon_at(
                step,
                planned,
                cfg.epsilon_start,
                cfg.epsilon_end,
                cfg.epsilon_decay_fraction,
            );
            let actions: Vec<usize> = agents
                .iter_mut()
                .zip(&states)
                .map(|(agent, &s)| agent.act(s, eps))
                .collect();
            let requests: Vec<i32> = actions
                .iter()
                .map(|&a| action_delta(a, scenario.delta))
                .collect();

            let mut traces = vec![Vec::with_capacity(scenario.period()); num_pdcs];
            let held = env.run_epoch(&requests, |rec| {
                for (d, &q) in rec.queue_lengths.iter().enumerate() {
                    traces[d].push(q);
                    if q > cfg.saturation_queue {
                        saturated = true;
                    }
                }
            })?;
            let next_states = env.states();

            for d in 0..num_pdcs {
                let r = compute_reward(&traces[d], scenario.q_ub[d], held[d], &scenario.reward);
                reward_sum += r;
                violations[d] += traces[d]
                    .iter()
                    .filter(|&&q| q as f64 >= scenario.q_ub[d])
                    .count();
                agents[d].remember(Experience {
                    state: states[d],
                    action: actions[d],
                    reward: r,
                    next_state: next_states[d],
                    done: saturated,
                });
                agents[d].learn(cfg);
            }
            uav_sum += held.iter().sum::<usize>() as f64;
            slots += scenario.period();
            states = next_states;
            step += 1;
            steps += 1;
            if saturated {
                break;
            }
        }

        if (episode + 1) % cfg.target_update_episodes == 0 {
            agents.iter_mut().for_each(DdqnAgent::sync_target);
        }

        window.push_back((violations, slots));
        if window.len() > cfg.violation_window {
            window.pop_front();
        }
        let window_slots: usize = window.iter().map(|w| w.1).sum();
        let violation = (0..num_pdcs)
            .map(|d| {
                let hits: usize = window.iter().map(|w| w.0[d]).sum();
                hits as f64 / window_slots.max(1) as f64
            })
            .collect();

        let stats = EpisodeStats {
            episode,
            steps,
            mean_reward: reward_sum / (steps.max(1) * num_pdcs) as f64,
            mean_uavs: uav_sum / steps.max(1) as f64,
            saturated,
            epsilon: eps,
            violation,
        };
        log::debug!(
            "episode {episode}: steps {steps} reward {:.2} uavs {:.1} pmax {:.3} eps {:.3}",
            stats.mean_reward,
            stats.mean_uavs,
            stats.max_violation(),
            eps
        );
        on_episode(&stats);
        curves.push(stats);
    }

    Ok(TrainOutcome {
        agents,
        curves,
        total_steps: step,
    })
}
