//! Planar district model: regions made of weighted rectangles, PDC and port
//! locations, destination sampling and flight times.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of one simulation slot in minutes.
pub const SLOT_MINUTES: f64 = 1.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("degenerate region {0}: no sub-region with positive weight")]
    DegenerateRegion(usize),
    #[error("invalid district: {0}")]
    Invalid(String),
    #[error("cannot read district file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse district file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A planar position in meters (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Meters covered in one slot at the given speed.
pub fn meters_per_slot(speed_kph: f64) -> f64 {
    speed_kph * 1000.0 / 60.0 * SLOT_MINUTES
}

/// Whole slots needed to fly from `a` to `b`, rounded up so any nonzero trip
/// costs at least one slot.
pub fn travel_time_slots(a: Point, b: Point, speed_kph: f64) -> u64 {
    let slots = distance(a, b) / meters_per_slot(speed_kph);
    // absorb floating noise so exact multiples (3 km at 18 kph) stay exact
    (slots - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubRegion {
    pub min: Point,
    pub max: Point,
    pub weight: f64,
}

impl SubRegion {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn validate(&self) -> Result<(), String> {
        let finite = [self.min.x, self.min.y, self.max.x, self.max.y, self.weight]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite sub-region field".into());
        }
        if self.max.x <= self.min.x || self.max.y <= self.min.y {
            return Err(format!(
                "sub-region [{:?}, {:?}] has no area",
                self.min, self.max
            ));
        }
        if self.weight < 0.0 {
            return Err(format!("negative population weight {}", self.weight));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub pdc: Point,
    pub subregions: Vec<SubRegion>,
}

impl Region {
    /// Total population weight, used for population-proportional allocation.
    pub fn population(&self) -> f64 {
        self.subregions.iter().map(|s| s.weight).sum()
    }

    /// Picks a sub-region with probability proportional to its weight, then a
    /// uniform point inside it.
    pub fn sample_destination<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point, GeoError> {
        Ok(DestinationSampler::new(self, 0)?.sample(rng))
    }
}

/// Pre-built categorical sampler for one region's destinations.
#[derive(Debug, Clone)]
pub struct DestinationSampler {
    index: WeightedIndex<f64>,
    rects: Vec<(Point, Point)>,
}

impl DestinationSampler {
    pub fn new(region: &Region, region_id: usize) -> Result<Self, GeoError> {
        let weights: Vec<f64> = region.subregions.iter().map(|s| s.weight).collect();
        let index =
            WeightedIndex::new(&weights).map_err(|_| GeoError::DegenerateRegion(region_id))?;
        let rects = region.subregions.iter().map(|s| (s.min, s.max)).collect();
        Ok(Self { index, rects })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (min, max) = self.rects[self.index.sample(rng)];
        Point::new(
            rng.random_range(min.x..max.x),
            rng.random_range(min.y..max.y),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct District {
    pub regions: Vec<Region>,
    pub port: Point,
    pub total_uavs: usize,
    pub speed_kph: f64,
}

impl District {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.regions.is_empty() {
            return Err(GeoError::Invalid(
                "district needs at least one region".into(),
            ));
        }
        if self.total_uavs == 0 {
            return Err(GeoError::Invalid("fleet size must be at least 1".into()));
        }
        if !(self.speed_kph.is_finite() && self.speed_kph > 0.0) {
            return Err(GeoError::Invalid(format!(
                "speed_kph must be positive, got {}",
                self.speed_kph
            )));
        }
        let points = std::iter::once(self.port).chain(self.regions.iter().map(|r| r.pdc));
        if points
            .into_iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(GeoError::Invalid("non-finite PDC or port location".into()));
        }
        for (d, region) in self.regions.iter().enumerate() {
            if region.subregions.is_empty() {
                return Err(GeoError::DegenerateRegion(d));
            }
            for s in &region.subregions {
                s.validate()
                    .map_err(|e| GeoError::Invalid(format!("region {d}: {e}")))?;
            }
            if region.population() <= 0.0 {
                return Err(GeoError::DegenerateRegion(d));
            }
        }
        Ok(())
    }

    pub fn num_pdcs(&self) -> usize {
        self.regions.len()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.regions.iter().map(Region::population).collect()
    }

    pub fn travel(&self, a: Point, b: Point) -> u64 {
        travel_time_slots(a, b, self.speed_kph)
    }

    pub fn from_json_str(s: &str) -> Result<Self, GeoError> {
        let district: District = serde_json::from_str(s)?;
        district.validate()?;
        Ok(district)
    }

    pub fn load(path: &Path) -> Result<Self, GeoError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// The bundled four-region district.
    ///
    /// Regions 1 and 3 are compact: most of their population sits in a 700 m
    /// core cell around the PDC. Regions 2 and 4 are suburban: population is
    /// spread over the outer ring of 1.6 km cells, so a delivery there takes
    /// roughly three times as long. Region weights sum to the per-PDC batch
    /// means 55, 50, 75 and 90.
    pub fn synthetic() -> Self {
        const COMPACT: [f64; 9] = [0.025, 0.05, 0.025, 0.05, 0.7, 0.05, 0.025, 0.05, 0.025];
        const SPREAD: [f64; 9] = [0.15, 0.1, 0.15, 0.1, 0.0, 0.1, 0.15, 0.1, 0.15];
        let grid = |pdc: Point, cell: f64, shares: &[f64; 9], population: f64| Region {
            pdc,
            subregions: shares
                .iter()
                .enumerate()
                .map(|(i, share)| {
                    let cx = pdc.x + ((i % 3) as f64 - 1.0) * cell;
                    let cy = pdc.y + ((i / 3) as f64 - 1.0) * cell;
                    SubRegion {
                        min: Point::new(cx - cell / 2.0, cy - cell / 2.0),
                        max: Point::new(cx + cell / 2.0, cy + cell / 2.0),
                        weight: share * population,
                    }
                })
                .collect(),
        };
        District {
            regions: vec![
                grid(Point::new(1050.0, 1050.0), 700.0, &COMPACT, 55.0),
                grid(Point::new(4500.0, 2400.0), 1600.0, &SPREAD, 50.0),
                grid(Point::new(1050.0, 3150.0), 700.0, &COMPACT, 75.0),
                grid(Point::new(9300.0, 2400.0), 1600.0, &SPREAD, 90.0),
            ],
            port: Point::new(5850.0, 2400.0),
            total_uavs: 60,
            speed_kph: 18.0,
        }
    }
}
