//! Simulation and control of a shared UAV delivery fleet serving several
//! package distribution centers (PDCs).
//!
//! Packages arrive at each PDC in truck batches, wait in a FCFS queue and are
//! flown out by whichever UAVs the PDC currently owns. Controllers re-balance
//! ownership every action epoch; a central scheduler turns their requests into
//! concrete UAV moves. The crate provides the discrete-time simulator, the
//! baseline controllers, per-PDC double deep Q-learning agents and the
//! metrics used to compare them.

pub mod arrivals;
pub mod controllers;
pub mod env;
pub mod experiment;
pub mod geography;
pub mod metrics;
pub mod rlagent;
pub mod rng;
pub mod scheduler;
pub mod simcore;
