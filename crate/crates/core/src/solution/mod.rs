//! Route-level solutions: representation, objective, scheduling, feasibility
//! checking and the nearest-neighbor construction heuristic.

mod construct;
mod feasibility;
mod schedule;

pub use construct::{initial_solution, ConstructionFailed};
pub use feasibility::{check_feasible, Violation};
pub use schedule::{schedule_earliest, Infeasible, Scheduler};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

pub const SOLUTION_FORMAT_VERSION: u32 = 1;

/// A vehicle, identified by its fleet and its index inside the fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleKey {
    pub fleet: usize,
    pub vehicle: usize,
}

impl VehicleKey {
    pub fn new(fleet: usize, vehicle: usize) -> Self {
        Self { fleet, vehicle }
    }
}

/// Every `(fleet, vehicle)` of an instance in fleet-major order. Position in
/// this list is the vehicle's global index.
pub fn vehicle_keys(instance: &Instance) -> Vec<VehicleKey> {
    instance
        .fleets
        .iter()
        .enumerate()
        .flat_map(|(k, f)| (0..f.vehicle_count).map(move |v| VehicleKey::new(k, v)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub fleet: usize,
    pub vehicle: usize,
    /// Flight ids in service order; depot legs are implicit.
    pub visits: Vec<usize>,
}

impl Route {
    pub fn key(&self) -> VehicleKey {
        VehicleKey::new(self.fleet, self.vehicle)
    }
}

/// Start time per `(flight, fleet)` service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<Option<f64>>>", into = "Vec<Vec<Option<f64>>>")]
pub struct StartTimes {
    flights: usize,
    values: Vec<Option<f64>>,
}

impl StartTimes {
    pub fn empty(flights: usize, fleets: usize) -> Self {
        Self {
            flights,
            values: vec![None; flights * fleets],
        }
    }

    pub fn get(&self, flight: usize, fleet: usize) -> Option<f64> {
        self.values.get(fleet * self.flights + flight).copied().flatten()
    }

    pub fn set(&mut self, flight: usize, fleet: usize, t: f64) {
        self.values[fleet * self.flights + flight] = Some(t);
    }

    pub fn num_fleets(&self) -> usize {
        self.values.len().checked_div(self.flights).unwrap_or(0)
    }
}

impl From<Vec<Vec<Option<f64>>>> for StartTimes {
    fn from(rows: Vec<Vec<Option<f64>>>) -> Self {
        let flights = rows.first().map_or(0, Vec::len);
        Self {
            flights,
            values: rows.into_iter().flatten().collect(),
        }
    }
}

impl From<StartTimes> for Vec<Vec<Option<f64>>> {
    fn from(st: StartTimes) -> Self {
        if st.flights == 0 {
            return Vec::new();
        }
        st.values.chunks(st.flights).map(<[_]>::to_vec).collect()
    }
}

/// Dense `[fleet][vehicle] -> visits` view of a solution's routes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutePlan {
    pub routes: Vec<Vec<Vec<usize>>>,
}

impl RoutePlan {
    pub fn empty(instance: &Instance) -> Self {
        Self {
            routes: instance
                .fleets
                .iter()
                .map(|f| vec![Vec::new(); f.vehicle_count])
                .collect(),
        }
    }

    pub fn route(&self, key: VehicleKey) -> &[usize] {
        &self.routes[key.fleet][key.vehicle]
    }

    pub fn route_mut(&mut self, key: VehicleKey) -> &mut Vec<usize> {
        &mut self.routes[key.fleet][key.vehicle]
    }

    pub fn cost(&self, instance: &Instance) -> f64 {
        self.routes
            .iter()
            .flatten()
            .map(|r| route_distance(instance, r))
            .sum()
    }

    pub fn into_routes(self) -> Vec<Route> {
        let mut out = Vec::new();
        for (fleet, vehicles) in self.routes.into_iter().enumerate() {
            for (vehicle, visits) in vehicles.into_iter().enumerate() {
                if !visits.is_empty() {
                    out.push(Route {
                        fleet,
                        vehicle,
                        visits,
                    });
                }
            }
        }
        out
    }
}

/// Depot-to-depot length of one route; zero for an empty route.
pub fn route_distance(instance: &Instance, visits: &[usize]) -> f64 {
    let (Some(&first), Some(&last)) = (visits.first(), visits.last()) else {
        return 0.0;
    };
    let depot = instance.depot_position;
    let mut d = depot.distance(&instance.flights[first].gate_position)
        + instance.flights[last].gate_position.distance(&depot);
    for w in visits.windows(2) {
        d += instance.flight_distance(w[0], w[1]);
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Non-empty routes, sorted by `(fleet, vehicle)`.
    pub routes: Vec<Route>,
    pub start_times: StartTimes,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum SolutionIoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported solution format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    format_version: u32,
    #[serde(flatten)]
    solution: Solution,
}

impl Solution {
    /// Builds a solution, dropping empty routes and caching the objective.
    pub fn new(instance: &Instance, mut routes: Vec<Route>, start_times: StartTimes) -> Self {
        routes.retain(|r| !r.visits.is_empty());
        routes.sort_by_key(Route::key);
        let mut s = Self {
            routes,
            start_times,
            objective: 0.0,
        };
        s.objective = evaluate(instance, &s);
        s
    }

    pub fn from_plan(instance: &Instance, plan: RoutePlan, start_times: StartTimes) -> Self {
        Self::new(instance, plan.into_routes(), start_times)
    }

    /// The empty solution of an instance with no flights.
    pub fn empty(instance: &Instance) -> Self {
        Self::new(
            instance,
            Vec::new(),
            StartTimes::empty(instance.num_flights(), instance.num_fleets()),
        )
    }

    /// Dense route view. Routes naming vehicles outside the instance are
    /// dropped; use [`check_feasible`] to detect them.
    pub fn plan(&self, instance: &Instance) -> RoutePlan {
        let mut plan = RoutePlan::empty(instance);
        for r in &self.routes {
            if let Some(slot) = plan.routes.get_mut(r.fleet).and_then(|f| f.get_mut(r.vehicle)) {
                *slot = r.visits.clone();
            }
        }
        plan
    }

    pub fn route(&self, key: VehicleKey) -> Option<&Route> {
        self.routes.iter().find(|r| r.key() == key)
    }

    pub fn to_json(&self) -> String {
        let file = SolutionFile {
            format_version: SOLUTION_FORMAT_VERSION,
            solution: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("solution serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SolutionIoError> {
        let file: SolutionFile =
            serde_json::from_str(text).map_err(|e| SolutionIoError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        if file.format_version != SOLUTION_FORMAT_VERSION {
            return Err(SolutionIoError::Version(file.format_version));
        }
        Ok(file.solution)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SolutionIoError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SolutionIoError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Total route distance of a solution, including depot legs.
pub fn evaluate(instance: &Instance, solution: &Solution) -> f64 {
    solution
        .routes
        .iter()
        .map(|r| route_distance(instance, &r.visits))
        .sum()
}
