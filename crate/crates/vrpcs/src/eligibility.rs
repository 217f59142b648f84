//! Crowd-eligibility from customer and station geometry.
//!
//! The eligible set for a walking-time threshold `delta` contains every
//! customer whose straight-line distance to its nearest station, divided by
//! the walking speed, is at most `delta` minutes (boundary inclusive). This
//! replaces street-network isochrones; externally computed eligibility can
//! be ingested verbatim instead via [`ingest_eligibility`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default walking speed, metres per minute.
pub const DEFAULT_WALKING_SPEED: f64 = 80.0;

#[derive(Debug, Error)]
pub enum EligibilityError {
    #[error("scene has no stations")]
    NoStations,
    #[error("scene must flag exactly one main station, found {0}")]
    MainStationCount(usize),
    #[error("non-finite coordinate on {kind} {id}")]
    BadCoordinate { kind: &'static str, id: usize },
    #[error("walking speed {0} must be positive and finite")]
    BadWalkingSpeed(f64),
    #[error("delta {0} must be positive")]
    BadDelta(f64),
    #[error("explicit eligible id {id} out of range 1..={n}")]
    IdOutOfRange { id: usize, n: usize },
    #[error("explicit eligible id {0} duplicated")]
    DuplicateId(usize),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CustomerPoint {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StationPoint {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub main: bool,
}

/// Planar scene (projected coordinates in metres) of customers and metro
/// stations; exactly one station is the main one, co-located with the depot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeoScene {
    pub customers: Vec<CustomerPoint>,
    pub stations: Vec<StationPoint>,
    #[serde(rename = "walkingSpeed", default = "default_speed")]
    pub walking_speed: f64,
}

fn default_speed() -> f64 {
    DEFAULT_WALKING_SPEED
}

impl GeoScene {
    pub fn check(&self) -> Result<(), EligibilityError> {
        if self.stations.is_empty() {
            return Err(EligibilityError::NoStations);
        }
        let mains = self.stations.iter().filter(|s| s.main).count();
        if mains != 1 {
            return Err(EligibilityError::MainStationCount(mains));
        }
        if !self.walking_speed.is_finite() || self.walking_speed <= 0.0 {
            return Err(EligibilityError::BadWalkingSpeed(self.walking_speed));
        }
        for c in &self.customers {
            if !c.x.is_finite() || !c.y.is_finite() {
                return Err(EligibilityError::BadCoordinate { kind: "customer", id: c.id });
            }
        }
        for s in &self.stations {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(EligibilityError::BadCoordinate { kind: "station", id: s.id });
            }
        }
        Ok(())
    }

    pub fn main_station(&self) -> &StationPoint {
        self.stations
            .iter()
            .find(|s| s.main)
            .expect("checked scene has a main station")
    }
}

/// Walking minutes from each customer (by position in the scene's customer
/// list) to its nearest station.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EligibilityMap {
    #[serde(rename = "walkMinutes")]
    pub walk_minutes: Vec<f64>,
}

fn euclid(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    (dx * dx + dy * dy).sqrt()
}

/// Nearest-station walking minutes and the eligible set for threshold
/// `delta` (minutes, boundary inclusive).
pub fn compute_eligibility(
    scene: &GeoScene,
    delta: f64,
) -> Result<(EligibilityMap, Vec<usize>), EligibilityError> {
    scene.check()?;
    if !delta.is_finite() || delta <= 0.0 {
        return Err(EligibilityError::BadDelta(delta));
    }
    let mut walk_minutes = Vec::with_capacity(scene.customers.len());
    let mut eligible = Vec::new();
    for c in &scene.customers {
        let nearest = scene
            .stations
            .iter()
            .map(|s| euclid(c.x, c.y, s.x, s.y))
            .fold(f64::INFINITY, f64::min);
        let minutes = nearest / scene.walking_speed;
        if minutes <= delta {
            eligible.push(c.id);
        }
        walk_minutes.push(minutes);
    }
    Ok((EligibilityMap { walk_minutes }, eligible))
}

/// Accept an externally computed eligible set verbatim (e.g. from GIS
/// isochrones). Rejects duplicates and ids outside `1..=n`.
pub fn ingest_eligibility(n: usize, explicit: &[usize]) -> Result<Vec<usize>, EligibilityError> {
    let mut seen = vec![false; n + 1];
    let mut out = Vec::with_capacity(explicit.len());
    for &id in explicit {
        if id < 1 || id > n {
            return Err(EligibilityError::IdOutOfRange { id, n });
        }
        if seen[id] {
            return Err(EligibilityError::DuplicateId(id));
        }
        seen[id] = true;
        out.push(id);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene(customers: Vec<(usize, f64, f64)>, stations: Vec<(f64, f64)>) -> GeoScene {
        GeoScene {
            customers: customers
                .into_iter()
                .map(|(id, x, y)| CustomerPoint { id, x, y })
                .collect(),
            stations: stations
                .into_iter()
                .enumerate()
                .map(|(k, (x, y))| StationPoint { id: k + 1, x, y, main: k == 0 })
                .collect(),
            walking_speed: DEFAULT_WALKING_SPEED,
        }
    }

    #[test]
    fn colocated_customer_is_eligible() {
        let s = scene(vec![(1, 10.0, 20.0)], vec![(10.0, 20.0)]);
        let (map, eligible) = compute_eligibility(&s, 0.001).unwrap();
        assert_eq!(map.walk_minutes, vec![0.0]);
        assert_eq!(eligible, vec![1]);
    }

    #[test]
    fn boundary_is_inclusive() {
        // 400 m at 80 m/min is exactly 5 minutes.
        let s = scene(vec![(1, 400.0, 0.0)], vec![(0.0, 0.0)]);
        let (map, eligible) = compute_eligibility(&s, 5.0).unwrap();
        assert_eq!(map.walk_minutes, vec![5.0]);
        assert_eq!(eligible, vec![1]);
    }

    #[test]
    fn threshold_splits_customers() {
        // 200 m, 900 m, 1300 m from the nearest station at 80 m/min give
        // 2.5, 11.25 and 16.25 walking minutes.
        let s = scene(
            vec![(1, 200.0, 0.0), (2, 900.0, 0.0), (3, 1300.0, 0.0)],
            vec![(0.0, 0.0)],
        );
        let (map, eligible) = compute_eligibility(&s, 10.0).unwrap();
        assert_eq!(map.walk_minutes, vec![2.5, 11.25, 16.25]);
        assert_eq!(eligible, vec![1]);
        let (_, wider) = compute_eligibility(&s, 15.0).unwrap();
        assert_eq!(wider, vec![1, 2]);
    }

    #[test]
    fn nearest_station_wins() {
        let s = GeoScene {
            customers: vec![CustomerPoint { id: 1, x: 1000.0, y: 0.0 }],
            stations: vec![
                StationPoint { id: 1, x: 0.0, y: 0.0, main: true },
                StationPoint { id: 2, x: 1080.0, y: 0.0, main: false },
            ],
            walking_speed: 80.0,
        };
        let (map, eligible) = compute_eligibility(&s, 1.5).unwrap();
        assert_eq!(map.walk_minutes, vec![1.0]);
        assert_eq!(eligible, vec![1]);
    }

    #[test]
    fn empty_station_list_is_config_error() {
        let s = GeoScene {
            customers: vec![],
            stations: vec![],
            walking_speed: 80.0,
        };
        assert!(matches!(
            compute_eligibility(&s, 5.0),
            Err(EligibilityError::NoStations)
        ));
    }

    #[test]
    fn ingest_passthrough_and_extremes() {
        assert_eq!(ingest_eligibility(10, &[]).unwrap(), Vec::<usize>::new());
        let all: Vec<usize> = (1..=10).collect();
        assert_eq!(ingest_eligibility(10, &all).unwrap(), all);
        assert_eq!(ingest_eligibility(10, &[2, 5, 9]).unwrap(), vec![2, 5, 9]);
    }

    #[test]
    fn ingest_rejects_bad_ids() {
        assert!(matches!(
            ingest_eligibility(10, &[11]),
            Err(EligibilityError::IdOutOfRange { id: 11, n: 10 })
        ));
        assert!(matches!(
            ingest_eligibility(10, &[3, 3]),
            Err(EligibilityError::DuplicateId(3))
        ));
    }

    proptest! {
        /// delta1 <= delta2 implies S(delta1) is a subset of S(delta2).
        #[test]
        fn eligibility_monotone_in_delta(
            xs in prop::collection::vec((-5000.0f64..5000.0, -5000.0f64..5000.0), 1..30),
            st in prop::collection::vec((-5000.0f64..5000.0, -5000.0f64..5000.0), 1..5),
            d1 in 0.1f64..20.0,
            grow in 0.0f64..20.0,
        ) {
            let s = scene(
                xs.iter().enumerate().map(|(k, &(x, y))| (k + 1, x, y)).collect(),
                st,
            );
            let (_, s1) = compute_eligibility(&s, d1).unwrap();
            let (_, s2) = compute_eligibility(&s, d1 + grow).unwrap();
            for id in &s1 {
                prop_assert!(s2.contains(id));
            }
        }

        /// The eligible set is unchanged by rotating and translating the
        /// whole scene, away from knife-edge boundaries.
        #[test]
        fn eligibility_rigid_motion_invariant(
            xs in prop::collection::vec((-3000.0f64..3000.0, -3000.0f64..3000.0), 1..20),
            st in prop::collection::vec((-3000.0f64..3000.0, -3000.0f64..3000.0), 1..4),
            theta in 0.0f64..std::f64::consts::TAU,
            tx in -10_000.0f64..10_000.0,
            ty in -10_000.0f64..10_000.0,
            delta in 1.0f64..30.0,
        ) {
            let base = scene(
                xs.iter().enumerate().map(|(k, &(x, y))| (k + 1, x, y)).collect(),
                st,
            );
            let (map, s_before) = compute_eligibility(&base, delta).unwrap();
            // Rotation in floating point perturbs distances by ~1e-12
            // relative; skip scenes with a customer too close to the
            // threshold for the comparison to be meaningful.
            prop_assume!(map
                .walk_minutes
                .iter()
                .all(|&w| (w - delta).abs() > 1e-6));
            let (sin, cos) = theta.sin_cos();
            let moved = GeoScene {
                customers: base
                    .customers
                    .iter()
                    .map(|c| CustomerPoint {
                        id: c.id,
                        x: cos * c.x - sin * c.y + tx,
                        y: sin * c.x + cos * c.y + ty,
                    })
                    .collect(),
                stations: base
                    .stations
                    .iter()
                    .map(|s| StationPoint {
                        id: s.id,
                        x: cos * s.x - sin * s.y + tx,
                        y: sin * s.x + cos * s.y + ty,
                        main: s.main,
                    })
                    .collect(),
                walking_speed: base.walking_speed,
            };
            let (_, s_after) = compute_eligibility(&moved, delta).unwrap();
            prop_assert_eq!(s_before, s_after);
        }
    }
}
