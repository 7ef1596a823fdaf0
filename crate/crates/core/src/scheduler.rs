//! Central swap scheduler.
//!
//! Agents only say how many UAVs each PDC should gain or lose; this module
//! decides *which* UAVs move. Donors are collected from shrinking PDCs
//! (idle first, then the most recently returned, then the longest-running
//! deliveries) and from the port when the net request is positive. Growing
//! PDCs are then served one at a time in random order, each taking its
//! nearest donors. Whatever is left over goes back to the port.

use rand::Rng;

use crate::geography::{distance, District, Point};
use crate::simcore::{Home, Move, SimState, UavStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DonorCategory {
    Idle,
    Returning,
    Delivering,
    Port,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Donor {
    pub uav: usize,
    pub category: DonorCategory,
    /// Where the UAV is (or is deemed to be) right now.
    pub position: Point,
    /// For delivering donors: remaining leg length and the drop-off point the
    /// UAV must visit before it can head anywhere else.
    pub via: Option<(f64, Point)>,
}

impl Donor {
    /// Flight distance from this donor to `target`.
    pub fn dist_to(&self, target: Point) -> f64 {
        match self.via {
            Some((remaining, stop)) => remaining + distance(stop, target),
            None => distance(self.position, target),
        }
    }
}

pub type DonorSet = Vec<Donor>;

/// Collects the UAVs that will change hands this epoch.
pub fn form_donor_set(state: &SimState, requests: &[i32]) -> DonorSet {
    let district = state.district();
    let meters_per_slot = crate::geography::meters_per_slot(district.speed_kph);
    let t = state.t();
    let mut donors = Vec::new();

    for (d, &a) in requests.iter().enumerate() {
        if a >= 0 {
            continue;
        }
        let mut need = a.unsigned_abs() as usize;
        let pdc = district.regions[d].pdc;
        let owned = || state.uavs().iter().filter(move |u| u.home == Home::Pdc(d));

        // idle: lowest id first
        for u in owned().filter(|u| u.status == UavStatus::Idle).take(need) {
            donors.push(Donor {
                uav: u.id,
                category: DonorCategory::Idle,
                position: pdc,
                via: None,
            });
            need -= 1;
        }
        if need == 0 {
            continue;
        }

        // returning: most recent delivery completion first
        let mut returning: Vec<_> = owned()
            .filter(|u| {
                matches!(
                    u.status,
                    UavStatus::Returning { .. } | UavStatus::BatterySwap { .. }
                )
            })
            .collect();
        returning.sort_by_key(|u| (std::cmp::Reverse(u.last_delivery), u.id));
        for u in returning.into_iter().take(need) {
            donors.push(Donor {
                uav: u.id,
                category: DonorCategory::Returning,
                position: pdc,
                via: None,
            });
            need -= 1;
        }
        if need == 0 {
            continue;
        }

        // delivering: earliest mission start first
        let mut delivering: Vec<_> = owned()
            .filter(|u| !u.retargeted)
            .filter_map(|u| match &u.status {
                UavStatus::Delivering {
                    package,
                    eta,
                    mission_start,
                } => Some((u.id, *mission_start, *eta, package.destination)),
                _ => None,
            })
            .collect();
        delivering.sort_by_key(|&(id, start, _, _)| (start, id));
        for (id, _, eta, dest) in delivering.into_iter().take(need) {
            let remaining =
                (eta.saturating_sub(t) as f64 * meters_per_slot).min(distance(pdc, dest));
            donors.push(Donor {
                uav: id,
                category: DonorCategory::Delivering,
                position: pdc,
                via: Some((remaining, dest)),
            });
        }
    }

    let net: i64 = requests.iter().map(|&a| a as i64).sum();
    if net > 0 {
        let port_idle = state
            .uavs()
            .iter()
            .filter(|u| u.home == Home::Port && u.status == UavStatus::Idle);
        for u in port_idle.take(net as usize) {
            donors.push(Donor {
                uav: u.id,
                category: DonorCategory::Port,
                position: district.port,
                via: None,
            });
        }
    }
    donors
}

/// Hands donors to growing PDCs, nearest first, visiting those PDCs in a
/// uniformly random order. Unassigned donors are sent to the port.
pub fn assign_donors<R: Rng + ?Sized>(
    district: &District,
    donors: &[Donor],
    requests: &[i32],
    rng: &mut R,
) -> Vec<Move> {
    let mut needy: Vec<(usize, usize)> = requests
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(d, &a)| (d, a as usize))
        .collect();
    let mut pool: Vec<&Donor> = donors.iter().collect();
    let mut moves = Vec::with_capacity(donors.len());

    while !needy.is_empty() && !pool.is_empty() {
        let (d, want) = needy.remove(rng.random_range(0..needy.len()));
        let target = district.regions[d].pdc;
        let mut nearest: Vec<&Donor> = pool.clone();
        nearest.sort_by(|a, b| {
            a.dist_to(target)
                .total_cmp(&b.dist_to(target))
                .then(a.uav.cmp(&b.uav))
        });
        nearest.truncate(want);
        moves.extend(nearest.iter().map(|donor| Move {
            uav: donor.uav,
            target: Home::Pdc(d),
        }));
        // leftovers keep donor-set order
        pool.retain(|p| nearest.iter().all(|n| n.uav != p.uav));
    }
    moves.extend(pool.into_iter().map(|donor| Move {
        uav: donor.uav,
        target: Home::Port,
    }));
    moves
}

pub fn schedule<R: Rng + ?Sized>(state: &SimState, requests: &[i32], rng: &mut R) -> Vec<Move> {
    let donors = form_donor_set(state, requests);
    assign_donors(state.district(), &donors, requests, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::{ArrivalConfig, ArrivalPattern};
    use crate::geography::{Region, SubRegion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn district(pdcs: &[Point], n: usize) -> District {
        District {
            regions: pdcs
                .iter()
                .map(|&pdc| Region {
                    pdc,
                    subregions: vec![SubRegion {
                        min: Point::new(pdc.x, pdc.y + 2999.0),
                        max: Point::new(pdc.x + 1.0, pdc.y + 3000.0),
                        weight: 1.0,
                    }],
                })
                .collect(),
            port: Point::new(0.0, -10_000.0),
            total_uavs: n,
            speed_kph: 18.0,
        }
    }

    fn quiet(k: usize) -> ArrivalConfig {
        ArrivalConfig {
            pattern: ArrivalPattern::Bernoulli { p: 0.0 },
            truck_interval_mins: 30,
            batch_mean: vec![20; k],
            batch_half_width: 0,
        }
    }

    fn idle_donor(uav: usize, x: f64) -> Donor {
        Donor {
            uav,
            category: DonorCategory::Idle,
            position: Point::new(x, 0.0),
            via: None,
        }
    }

    #[test]
    fn no_requests_no_donors() {
        let d = District::synthetic();
        let s = SimState::new(&d, &quiet(4), &[15, 15, 15, 0], 1).unwrap();
        assert!(form_donor_set(&s, &[0, 0, 0, 0]).is_empty());
    }

    #[test]
    fn donor_priority_idle_returning_delivering() {
        // PDC 0 owns 7 UAVs: make 3 busy (delivering), then let 2 of them
        // come back so we get 2 idle / 2 returning / 3 delivering.
        let far = [Point::new(0.0, 0.0), Point::new(50_000.0, 0.0)];
        let d = district(&far, 7);
        let mut s = SimState::new(&d, &quiet(2), &[7, 0], 1).unwrap();
        // two short trips (2 slots out) started at t=0
        s.enqueue(0, Point::new(0.0, 550.0));
        s.enqueue(0, Point::new(0.0, 560.0));
        s.step_slot();
        s.step_slot();
        // both deliver at t=2 and return until t=4; long trips start at t=2,3,3
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.step_slot();
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.enqueue(0, Point::new(0.0, 3000.0));
        s.step_slot();
        let c = s.status_counts(Home::Pdc(0));
        assert_eq!((c.idle, c.returning, c.delivering), (2, 2, 3), "{c:?}");

        let donors = form_donor_set(&s, &[-5, 0]);
        let cats: Vec<_> = donors.iter().map(|x| x.category).collect();
        assert_eq!(
            cats,
            [
                DonorCategory::Idle,
                DonorCategory::Idle,
                DonorCategory::Returning,
                DonorCategory::Returning,
                DonorCategory::Delivering
            ]
        );
        // the delivering donor is the one that started earliest (t = 2)
        let started = s
            .uavs()
            .iter()
            .find_map(|u| match u.status {
                UavStatus::Delivering {
                    mission_start: 2, ..
                } => Some(u.id),
                _ => None,
            })
            .unwrap();
        assert_eq!(donors[4].uav, started);
    }

    #[test]
    fn returning_order_is_most_recent_first() {
        let pts = [Point::new(0.0, 0.0), Point::new(50_000.0, 0.0)];
        let d = district(&pts, 2);
        let mut s = SimState::new(&d, &quiet(2), &[2, 0], 1).unwrap();
        s.enqueue(0, Point::new(0.0, 3000.0)); // uav 0 delivers at t=10
        s.step_slot();
        s.enqueue(0, Point::new(0.0, 3000.0)); // uav 1 delivers at t=11
        s.step_slot();
        for _ in 2..=11 {
            s.step_slot();
        }
        assert_eq!(s.status_counts(Home::Pdc(0)).returning, 2);
        let donors = form_donor_set(&s, &[-1, 0]);
        assert_eq!(donors.len(), 1);
        assert_eq!(donors[0].uav, 1);
    }

    #[test]
    fn port_donors_capped_by_port_stock() {
        let d = District::synthetic();
        let s = SimState::new(&d, &quiet(4), &[15, 15, 15, 12], 1).unwrap();
        let donors = form_donor_set(&s, &[5, 0, 0, 0]);
        assert_eq!(donors.len(), 3);
        assert!(donors.iter().all(|x| x.category == DonorCategory::Port));
    }

    #[test]
    fn nearest_donors_win_and_rest_go_to_port() {
        let d = district(&[Point::new(0.0, 0.0)], 3);
        let donors = vec![
            idle_donor(0, 5000.0),
            idle_donor(1, 2000.0),
            idle_donor(2, 9000.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let moves = assign_donors(&d, &donors, &[2], &mut rng);
        assert_eq!(
            moves,
            vec![
                Move {
                    uav: 1,
                    target: Home::Pdc(0)
                },
                Move {
                    uav: 0,
                    target: Home::Pdc(0)
                },
                Move {
                    uav: 2,
                    target: Home::Port
                },
            ]
        );
    }

    #[test]
    fn no_needy_means_port() {
        let d = district(&[Point::new(0.0, 0.0)], 3);
        let donors: Vec<_> = (0..3).map(|i| idle_donor(i, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let moves = assign_donors(&d, &donors, &[-3], &mut rng);
        assert!(moves.iter().all(|m| m.target == Home::Port));
        assert_eq!(moves.len(), 3);
    }

    #[test]
    fn random_pdc_order_is_fair() {
        let d = district(&[Point::new(0.0, 0.0), Point::new(1000.0, 0.0)], 1);
        let donors = vec![idle_donor(0, 500.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 10_000;
        let first = (0..trials)
            .filter(|_| assign_donors(&d, &donors, &[1, 1], &mut rng)[0].target == Home::Pdc(0))
            .count();
        let share = first as f64 / trials as f64;
        assert!((share - 0.5).abs() < 0.02, "{share}");
    }

    #[test]
    fn delivering_distance_goes_via_dropoff() {
        let donor = Donor {
            uav: 0,
            category: DonorCategory::Delivering,
            position: Point::new(0.0, 0.0),
            via: Some((1000.0, Point::new(0.0, 3000.0))),
        };
        assert_eq!(donor.dist_to(Point::new(4000.0, 3000.0)), 5000.0);
    }

    #[test]
    fn growing_pdc_never_donates() {
        let d = District::synthetic();
        let s = SimState::new(&d, &quiet(4), &[15, 15, 15, 15], 1).unwrap();
        let donors = form_donor_set(&s, &[5, -5, 5, 0]);
        assert!(donors.iter().all(|x| s.uavs()[x.uav].home == Home::Pdc(1)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let moves = schedule(&s, &[5, -5, 5, 0], &mut rng);
        assert!(moves.iter().all(|m| m.target != Home::Pdc(1)));
    }
}
