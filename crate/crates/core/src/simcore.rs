//! Slot-by-slot district simulation.
//!
//! Each PDC is a FCFS multi-server queue whose servers are the UAVs it owns.
//! A UAV cycles Idle -> Delivering -> Returning -> BatterySwap -> Idle, and
//! may be sent elsewhere by the scheduler (Relocating). Ownership (`home`) is
//! switched at the moment of reassignment, so a UAV flying towards a PDC
//! already counts towards that PDC's allocation.
//!
//! Within a slot the order is fixed: status advance, arrivals, dispatch,
//! clock increment.

use std::collections::VecDeque;
use std::io::Write;

use thiserror::Error;

use crate::arrivals::{ArrivalConfig, ArrivalProcess, BatchSpec};
use crate::geography::{DestinationSampler, District, GeoError, Point};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial allocation of {requested} UAVs exceeds fleet size {fleet}")]
    OverAllocated { requested: usize, fleet: usize },
    #[error("allocation has {got} entries for {want} PDCs")]
    AllocationShape { got: usize, want: usize },
    #[error("move references unknown UAV {0}")]
    UnknownUav(usize),
    #[error("move targets unknown PDC {0}")]
    UnknownPdc(usize),
    #[error("UAV {0} is relocating and cannot be moved again")]
    InFlight(usize),
    #[error("invalid arrival config: {0}")]
    Arrivals(String),
    #[error(transparent)]
    Geography(#[from] GeoError),
}

/// Owner of a UAV: a PDC (0-based) or the central port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Home {
    Port,
    Pdc(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Package {
    pub id: u64,
    pub region: usize,
    pub arrival_slot: u64,
    pub destination: Point,
    pub dispatch_slot: Option<u64>,
    pub delivered_slot: Option<u64>,
}

impl Package {
    pub fn wait(&self) -> Option<u64> {
        self.dispatch_slot.map(|d| d - self.arrival_slot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UavStatus {
    Idle,
    Delivering {
        package: Package,
        eta: u64,
        mission_start: u64,
    },
    Returning {
        eta: u64,
    },
    BatterySwap {
        ready: u64,
    },
    Relocating {
        eta: u64,
        swap_on_arrival: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uav {
    pub id: usize,
    pub home: Home,
    pub status: UavStatus,
    /// Set on a delivering UAV that was given away: after the drop-off it
    /// flies to its (new) home as a relocation instead of a return.
    pub retargeted: bool,
    pub last_delivery: Option<u64>,
}

/// Partition of a PDC's owned UAVs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub idle: usize,
    pub delivering: usize,
    /// Returning or swapping batteries after a delivery.
    pub returning: usize,
    /// Inbound relocations and given-away UAVs finishing a delivery.
    pub inbound: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.idle + self.delivering + self.returning + self.inbound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub uav: usize,
    pub target: Home,
}

/// What happened during one slot, with end-of-slot queue and fleet state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotRecord {
    pub t: u64,
    pub queue_lengths: Vec<usize>,
    pub owned: Vec<usize>,
    pub arrivals: Vec<u32>,
    pub dispatches: Vec<u32>,
    /// (pdc, queueing delay) for every package dispatched this slot.
    pub waits: Vec<(usize, u64)>,
    pub delivered: Vec<Package>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    t: u64,
    district: District,
    samplers: Vec<DestinationSampler>,
    queues: Vec<VecDeque<Package>>,
    uavs: Vec<Uav>,
    processes: Vec<ArrivalProcess>,
    batch_specs: Vec<BatchSpec>,
    arrival_rngs: Vec<SimRng>,
    destination_rngs: Vec<SimRng>,
    next_package: u64,
}

impl SimState {
    pub fn new(
        district: &District,
        arrivals: &ArrivalConfig,
        allocation: &[usize],
        seed: u64,
    ) -> Result<Self, SimError> {
        district.validate()?;
        let num_pdcs = district.num_pdcs();
        arrivals.validate(num_pdcs).map_err(SimError::Arrivals)?;
        if allocation.len() != num_pdcs {
            return Err(SimError::AllocationShape {
                got: allocation.len(),
                want: num_pdcs,
            });
        }
        let requested: usize = allocation.iter().sum();
        if requested > district.total_uavs {
            return Err(SimError::OverAllocated {
                requested,
                fleet: district.total_uavs,
            });
        }

        let mut uavs = Vec::with_capacity(district.total_uavs);
        for (d, &count) in allocation.iter().enumerate() {
            for _ in 0..count {
                uavs.push(Uav::idle(uavs.len(), Home::Pdc(d)));
            }
        }
        while uavs.len() < district.total_uavs {
            uavs.push(Uav::idle(uavs.len(), Home::Port));
        }

        let samplers = district
            .regions
            .iter()
            .enumerate()
            .map(|(d, r)| DestinationSampler::new(r, d))
            .collect::<Result<_, _>>()?;

        Ok(Self {
            t: 0,
            district: district.clone(),
            samplers,
            queues: vec![VecDeque::new(); num_pdcs],
            uavs,
            processes: arrivals.processes(),
            batch_specs: (0..num_pdcs).map(|d| arrivals.batch_spec(d)).collect(),
            arrival_rngs: (0..num_pdcs)
                .map(|d| stream(seed, Stream::Arrivals(d)))
                .collect(),
            destination_rngs: (0..num_pdcs)
                .map(|d| stream(seed, Stream::Destinations(d)))
                .collect(),
            next_package: 0,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn district(&self) -> &District {
        &self.district
    }

    pub fn num_pdcs(&self) -> usize {
        self.queues.len()
    }

    pub fn uavs(&self) -> &[Uav] {
        &self.uavs
    }

    pub fn queue(&self, d: usize) -> &VecDeque<Package> {
        &self.queues[d]
    }

    pub fn processes(&self) -> &[ArrivalProcess] {
        &self.processes
    }

    pub fn location(&self, home: Home) -> Point {
        match home {
            Home::Port => self.district.port,
            Home::Pdc(d) => self.district.regions[d].pdc,
        }
    }

    /// Agent state `(n_d, q_d)`.
    pub fn observe(&self, d: usize) -> (usize, usize) {
        (self.owned(Home::Pdc(d)), self.queues[d].len())
    }

    pub fn owned(&self, home: Home) -> usize {
        self.uavs.iter().filter(|u| u.home == home).count()
    }

    pub fn owned_per_pdc(&self) -> Vec<usize> {
        let mut owned = vec![0; self.num_pdcs()];
        for u in &self.uavs {
            if let Home::Pdc(d) = u.home {
                owned[d] += 1;
            }
        }
        owned
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }

    pub fn status_counts(&self, home: Home) -> StatusCounts {
        let mut c = StatusCounts::default();
        for u in self.uavs.iter().filter(|u| u.home == home) {
            match u.status {
                UavStatus::Idle => c.idle += 1,
                UavStatus::Delivering { .. } if u.retargeted => c.inbound += 1,
                UavStatus::Delivering { .. } => c.delivering += 1,
                UavStatus::Returning { .. } | UavStatus::BatterySwap { .. } => c.returning += 1,
                UavStatus::Relocating { .. } => c.inbound += 1,
            }
        }
        c
    }

    /// Advances the world by one slot.
    pub fn step_slot(&mut self) -> SlotRecord {
        let t = self.t;
        let num_pdcs = self.num_pdcs();
        let mut record = SlotRecord {
            t,
            arrivals: vec![0; num_pdcs],
            dispatches: vec![0; num_pdcs],
            ..SlotRecord::default()
        };

        for i in 0..self.uavs.len() {
            self.advance_uav(i, &mut record.delivered);
        }

        for d in 0..num_pdcs {
            let batch = self.processes[d].tick(self.batch_specs[d], t, &mut self.arrival_rngs[d]);
            for _ in 0..batch {
                let destination = self.samplers[d].sample(&mut self.destination_rngs[d]);
                self.queues[d].push_back(Package {
                    id: self.next_package,
                    region: d,
                    arrival_slot: t,
                    destination,
                    dispatch_slot: None,
                    delivered_slot: None,
                });
                self.next_package += 1;
            }
            record.arrivals[d] = batch;
        }

        for i in 0..self.uavs.len() {
            let Home::Pdc(d) = self.uavs[i].home else {
                continue;
            };
            if self.uavs[i].status != UavStatus::Idle {
                continue;
            }
            let Some(mut package) = self.queues[d].pop_front() else {
                continue;
            };
            package.dispatch_slot = Some(t);
            record.waits.push((d, t - package.arrival_slot));
            record.dispatches[d] += 1;
            let eta = t + self
                .district
                .travel(self.district.regions[d].pdc, package.destination);
            self.uavs[i].status = UavStatus::Delivering {
                package,
                eta,
                mission_start: t,
            };
        }

        record.queue_lengths = self.queue_lengths();
        record.owned = self.owned_per_pdc();
        self.t += 1;
        record
    }

    fn advance_uav(&mut self, i: usize, delivered: &mut Vec<Package>) {
        let t = self.t;
        loop {
            let home_loc = self.location(self.uavs[i].home);
            let uav = &mut self.uavs[i];
            let next = match &mut uav.status {
                UavStatus::Delivering { package, eta, .. } if *eta <= t => {
                    let done = *eta;
                    let back = self.district.travel(package.destination, home_loc);
                    let mut package = package.clone();
                    package.delivered_slot = Some(done);
                    delivered.push(package);
                    uav.last_delivery = Some(done);
                    if std::mem::take(&mut uav.retargeted) {
                        UavStatus::Relocating {
                            eta: done + back,
                            swap_on_arrival: true,
                        }
                    } else {
                        UavStatus::Returning { eta: done + back }
                    }
                }
                UavStatus::Returning { eta } if *eta <= t => {
                    UavStatus::BatterySwap { ready: *eta + 1 }
                }
                UavStatus::BatterySwap { ready } if *ready <= t => UavStatus::Idle,
                UavStatus::Relocating {
                    eta,
                    swap_on_arrival,
                } if *eta <= t => {
                    if *swap_on_arrival {
                        UavStatus::BatterySwap { ready: *eta + 1 }
                    } else {
                        UavStatus::Idle
                    }
                }
                _ => break,
            };
            uav.status = next;
        }
    }

    /// Re-homes UAVs as decided by the scheduler. Ownership changes now;
    /// delivering UAVs finish their drop-off before flying to the new home.
    pub fn apply_allocation_moves(&mut self, moves: &[Move]) -> Result<(), SimError> {
        for m in moves {
            let uav = self.uavs.get(m.uav).ok_or(SimError::UnknownUav(m.uav))?;
            if let Home::Pdc(d) = m.target {
                if d >= self.num_pdcs() {
                    return Err(SimError::UnknownPdc(d));
                }
            }
            if m.target != uav.home && matches!(uav.status, UavStatus::Relocating { .. }) {
                return Err(SimError::InFlight(m.uav));
            }
        }
        let t = self.t;
        for m in moves {
            let from = self.location(self.uavs[m.uav].home);
            let to = self.location(m.target);
            let leg = self.district.travel(from, to);
            let uav = &mut self.uavs[m.uav];
            if uav.home == m.target {
                continue;
            }
            uav.home = m.target;
            match uav.status {
                UavStatus::Idle if leg > 0 => {
                    uav.status = UavStatus::Relocating {
                        eta: t + leg,
                        swap_on_arrival: false,
                    }
                }
                UavStatus::Idle => {}
                UavStatus::Returning { .. } | UavStatus::BatterySwap { .. } => {
                    uav.status = UavStatus::Relocating {
                        eta: t + leg,
                        swap_on_arrival: true,
                    }
                }
                UavStatus::Delivering { .. } => uav.retargeted = true,
                UavStatus::Relocating { .. } => unreachable!("checked above"),
            }
        }
        Ok(())
    }

    /// Test hook: pushes a package straight into a PDC queue.
    pub fn enqueue(&mut self, d: usize, destination: Point) {
        self.queues[d].push_back(Package {
            id: self.next_package,
            region: d,
            arrival_slot: self.t,
            destination,
            dispatch_slot: None,
            delivered_slot: None,
        });
        self.next_package += 1;
    }
}

impl Uav {
    fn idle(id: usize, home: Home) -> Self {
        Self {
            id,
            home,
            status: UavStatus::Idle,
            retargeted: false,
            last_delivery: None,
        }
    }
}

/// Streams per-slot records as CSV: `t, q_1..q_D, n_1..n_D, arrivals_1..,
/// dispatches_1..`.
pub struct TraceWriter<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(inner: W, num_pdcs: usize) -> csv::Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        let mut header = vec!["t".to_string()];
        for prefix in ["q", "n", "arrivals", "dispatches"] {
            header.extend((1..=num_pdcs).map(|d| format!("{prefix}_{d}")));
        }
        writer.write_record(&header)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, rec: &SlotRecord) -> csv::Result<()> {
        let mut row = vec![rec.t.to_string()];
        row.extend(rec.queue_lengths.iter().map(ToString::to_string));
        row.extend(rec.owned.iter().map(ToString::to_string));
        row.extend(rec.arrivals.iter().map(ToString::to_string));
        row.extend(rec.dispatches.iter().map(ToString::to_string));
        self.writer.write_record(&row)
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::ArrivalPattern;
    use crate::geography::{Region, SubRegion};

    fn line_district(n: usize) -> District {
        // two PDCs 6 km apart, port in between; destinations 3 km north
        let region = |x: f64| Region {
            pdc: Point::new(x, 0.0),
            subregions: vec![SubRegion {
                min: Point::new(x - 1.0, 2999.0),
                max: Point::new(x + 1.0, 3001.0),
                weight: 1.0,
            }],
        };
        District {
            regions: vec![region(0.0), region(6000.0)],
            port: Point::new(3000.0, 0.0),
            total_uavs: n,
            speed_kph: 18.0,
        }
    }

    fn quiet(num_pdcs: usize) -> ArrivalConfig {
        ArrivalConfig {
            pattern: ArrivalPattern::Bernoulli { p: 0.0 },
            truck_interval_mins: 30,
            batch_mean: vec![55; num_pdcs],
            batch_half_width: 15,
        }
    }

    fn certain(num_pdcs: usize) -> ArrivalConfig {
        ArrivalConfig {
            pattern: ArrivalPattern::Bernoulli { p: 1.0 },
            batch_half_width: 0,
            ..quiet(num_pdcs)
        }
    }

    #[test]
    fn init_places_remainder_at_port() {
        let d = District::synthetic();
        let s = SimState::new(&d, &quiet(4), &[0, 0, 0, 0], 1).unwrap();
        assert_eq!(s.owned(Home::Port), 60);
        let s = SimState::new(&d, &quiet(4), &[15, 15, 15, 15], 1).unwrap();
        assert_eq!(s.owned(Home::Port), 0);
        assert!(matches!(
            SimState::new(&d, &quiet(4), &[20, 20, 20, 20], 1),
            Err(SimError::OverAllocated { .. })
        ));
        assert!(SimState::new(&d, &quiet(4), &[1, 2], 1).is_err());
    }

    #[test]
    fn quiet_slot_only_moves_clock() {
        let d = District::synthetic();
        let mut s = SimState::new(&d, &quiet(4), &[15, 15, 15, 15], 1).unwrap();
        let before = s.uavs().to_vec();
        let rec = s.step_slot();
        assert_eq!(s.t(), 1);
        assert_eq!(s.uavs(), &before[..]);
        assert_eq!(rec.queue_lengths, vec![0; 4]);
        assert_eq!(rec.owned, vec![15; 4]);
    }

    #[test]
    fn fcfs_single_server() {
        let d = line_district(1);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.enqueue(0, Point::new(0.0, 300.0));
        let rec = s.step_slot();
        assert_eq!(rec.dispatches, vec![1, 0]);
        assert_eq!(s.queue(0).len(), 1);
        assert_eq!(s.queue(0)[0].id, 1);
        match &s.uavs()[0].status {
            UavStatus::Delivering { package, eta, .. } => {
                assert_eq!(package.id, 0);
                assert_eq!(*eta, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delivery_return_swap_cycle() {
        let d = line_district(1);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.step_slot(); // dispatched at 0, eta 10
        for _ in 1..10 {
            s.step_slot();
        }
        let rec = s.step_slot(); // t = 10: delivered
        assert_eq!(rec.delivered.len(), 1);
        assert_eq!(rec.delivered[0].delivered_slot, Some(10));
        assert_eq!(s.uavs()[0].status, UavStatus::Returning { eta: 20 });
        for _ in 11..20 {
            s.step_slot();
        }
        s.step_slot(); // t = 20
        assert_eq!(s.uavs()[0].status, UavStatus::BatterySwap { ready: 21 });
        s.step_slot(); // t = 21
        assert_eq!(s.uavs()[0].status, UavStatus::Idle);
    }

    #[test]
    fn observe_after_batch() {
        let d = line_district(60);
        let mut cfg = certain(2);
        cfg.batch_mean = vec![55, 55];
        let mut s = SimState::new(&d, &cfg, &[0, 0], 1).unwrap();
        s.step_slot();
        assert_eq!(s.observe(0), (0, 55));
        let mut s = SimState::new(&d, &cfg, &[15, 0], 1).unwrap();
        assert_eq!(s.observe(0), (15, 0));
        s.step_slot();
        assert_eq!(s.observe(0), (15, 40));
    }

    #[test]
    fn idle_relocation_eta() {
        let d = line_district(2);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        s.apply_allocation_moves(&[]).unwrap();
        assert_eq!(s.owned_per_pdc(), vec![1, 0]);
        s.apply_allocation_moves(&[Move {
            uav: 0,
            target: Home::Pdc(1),
        }])
        .unwrap();
        assert_eq!(s.owned_per_pdc(), vec![0, 1]);
        assert_eq!(
            s.uavs()[0].status,
            UavStatus::Relocating {
                eta: 20,
                swap_on_arrival: false
            }
        );
        assert_eq!(s.status_counts(Home::Pdc(1)).inbound, 1);
        for _ in 0..21 {
            s.step_slot();
        }
        assert_eq!(s.uavs()[0].status, UavStatus::Idle);
    }

    #[test]
    fn delivering_donor_finishes_then_flies_to_new_home() {
        let d = line_district(1);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.step_slot();
        s.apply_allocation_moves(&[Move {
            uav: 0,
            target: Home::Pdc(1),
        }])
        .unwrap();
        assert_eq!(s.observe(1).0, 1);
        let mut delivered = Vec::new();
        for _ in 1..=10 {
            delivered.extend(s.step_slot().delivered);
        }
        assert_eq!(delivered.len(), 1);
        assert_eq!(delivered[0].delivered_slot, Some(10));
        // (0,3000) -> (6000,0): sqrt(6000^2+3000^2) = 6708 m -> 23 slots
        assert_eq!(
            s.uavs()[0].status,
            UavStatus::Relocating {
                eta: 33,
                swap_on_arrival: true
            }
        );
    }

    #[test]
    fn bad_moves_rejected() {
        let d = line_district(1);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        assert!(matches!(
            s.apply_allocation_moves(&[Move {
                uav: 5,
                target: Home::Port
            }]),
            Err(SimError::UnknownUav(5))
        ));
        assert!(s
            .apply_allocation_moves(&[Move {
                uav: 0,
                target: Home::Pdc(9)
            }])
            .is_err());
    }

    #[test]
    fn fleet_drains_to_idle_without_arrivals() {
        let d = District::synthetic();
        let mut cfg = certain(4);
        cfg.batch_mean = vec![20; 4];
        cfg.batch_half_width = 0;
        let mut s = SimState::new(&d, &cfg, &[15, 15, 15, 15], 3).unwrap();
        s.step_slot();
        // stop arrivals by swapping in a quiet process set
        s.processes = quiet(4).processes();
        let max_leg = 2 * 30 + 2;
        for _ in 0..max_leg {
            s.step_slot();
        }
        assert!(s.uavs().iter().all(|u| u.status == UavStatus::Idle));
        for _ in 0..50 {
            s.step_slot();
            assert!(s.uavs().iter().all(|u| u.status == UavStatus::Idle));
        }
    }

    #[test]
    fn trace_csv_header() {
        let d = line_district(1);
        let mut s = SimState::new(&d, &quiet(2), &[1, 0], 1).unwrap();
        let mut buf = Vec::new();
        {
            let mut w = TraceWriter::new(&mut buf, 2).unwrap();
            w.write(&s.step_slot()).unwrap();
            w.flush().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,q_1,q_2,n_1,n_2,arrivals_1,arrivals_2,dispatches_1,dispatches_2\n0,0,0,1,0,0,0,0,0\n"
        );
    }
}
