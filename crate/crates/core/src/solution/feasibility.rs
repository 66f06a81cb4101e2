//! Independent constraint-by-constraint checker for route solutions.

use std::collections::BTreeSet;
use std::fmt;

use super::{evaluate, Solution};
use crate::instance::Instance;

const TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    UnknownVehicle { fleet: usize, vehicle: usize },
    UnknownFlight { fleet: usize, vehicle: usize, flight: usize },
    DuplicateRoute { fleet: usize, vehicle: usize },
    /// Each flight must be visited exactly once per fleet.
    Coverage { flight: usize, fleet: usize, visits: usize },
    Capacity { fleet: usize, vehicle: usize, load: u32, capacity: u32 },
    MissingStartTime { flight: usize, fleet: usize },
    Window { flight: usize, fleet: usize, start: f64 },
    /// Start of `to` is earlier than finishing `from` and driving over.
    TimeConsistency { fleet: usize, vehicle: usize, from: usize, to: usize },
    Precedence { flight: usize, before: usize, after: usize },
    ObjectiveMismatch { stored: f64, actual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownVehicle { fleet, vehicle } => {
                write!(f, "vehicle {vehicle} of fleet {fleet} does not exist")
            }
            Violation::UnknownFlight { fleet, vehicle, flight } => {
                write!(f, "route ({fleet}, {vehicle}) visits unknown flight {flight}")
            }
            Violation::DuplicateRoute { fleet, vehicle } => {
                write!(f, "vehicle ({fleet}, {vehicle}) has more than one route")
            }
            Violation::Coverage { flight, fleet, visits } => {
                write!(f, "flight {flight} visited {visits} times by fleet {fleet}")
            }
            Violation::Capacity { fleet, vehicle, load, capacity } => {
                write!(f, "vehicle ({fleet}, {vehicle}) carries {load} > {capacity}")
            }
            Violation::MissingStartTime { flight, fleet } => {
                write!(f, "no start time for flight {flight}, fleet {fleet}")
            }
            Violation::Window { flight, fleet, start } => {
                write!(f, "flight {flight}, fleet {fleet} starts at {start} outside its window")
            }
            Violation::TimeConsistency { fleet, vehicle, from, to } => write!(
                f,
                "vehicle ({fleet}, {vehicle}) cannot reach flight {to} after flight {from}"
            ),
            Violation::Precedence { flight, before, after } => write!(
                f,
                "flight {flight}: fleet {after} starts before fleet {before} finishes"
            ),
            Violation::ObjectiveMismatch { stored, actual } => {
                write!(f, "stored objective {stored} differs from route cost {actual}")
            }
        }
    }
}

/// Every constraint violation of `solution`; empty means feasible.
///
/// Works from the stored routes and start times only, so it also catches
/// start times that no scheduler produced.
pub fn check_feasible(instance: &Instance, solution: &Solution) -> Vec<Violation> {
    let n = instance.num_flights();
    let k = instance.num_fleets();
    let mut out = Vec::new();
    let mut visits = vec![0usize; n * k];
    let mut seen = BTreeSet::new();

    for r in &solution.routes {
        let (fleet, vehicle) = (r.fleet, r.vehicle);
        if fleet >= k || vehicle >= instance.fleets[fleet].vehicle_count {
            out.push(Violation::UnknownVehicle { fleet, vehicle });
            continue;
        }
        if !seen.insert(r.key()) {
            out.push(Violation::DuplicateRoute { fleet, vehicle });
        }
        let mut load = 0u32;
        let mut prev: Option<(usize, f64)> = None;
        for &flight in &r.visits {
            if flight >= n {
                out.push(Violation::UnknownFlight { fleet, vehicle, flight });
                prev = None;
                continue;
            }
            visits[fleet * n + flight] += 1;
            load = load.saturating_add(instance.demand(flight, fleet));
            let Some(t) = solution.start_times.get(flight, fleet) else {
                prev = None;
                continue;
            };
            if let Some((from, t_from)) = prev {
                let ready = t_from
                    + instance.service(from, fleet)
                    + instance.flight_travel(fleet, from, flight);
                if t + TOL < ready {
                    out.push(Violation::TimeConsistency { fleet, vehicle, from, to: flight });
                }
            }
            prev = Some((flight, t));
        }
        let capacity = instance.fleets[fleet].capacity;
        if load > capacity {
            out.push(Violation::Capacity { fleet, vehicle, load, capacity });
        }
    }

    for fleet in 0..k {
        for flight in 0..n {
            let v = visits[fleet * n + flight];
            if v != 1 {
                out.push(Violation::Coverage { flight, fleet, visits: v });
            }
            if v == 0 {
                continue;
            }
            match solution.start_times.get(flight, fleet) {
                None => out.push(Violation::MissingStartTime { flight, fleet }),
                Some(start) => {
                    let w = instance.window(flight, fleet);
                    if !w.contains(start, TOL) {
                        out.push(Violation::Window { flight, fleet, start });
                    }
                }
            }
        }
    }

    for flight in 0..n {
        for &(before, after) in instance.flight_precedence(flight) {
            let (Some(tb), Some(ta)) = (
                solution.start_times.get(flight, before),
                solution.start_times.get(flight, after),
            ) else {
                continue;
            };
            if tb + instance.service(flight, before) > ta + TOL {
                out.push(Violation::Precedence { flight, before, after });
            }
        }
    }

    let actual = evaluate(instance, solution);
    if (actual - solution.objective).abs() > TOL * actual.abs().max(1.0) {
        out.push(Violation::ObjectiveMismatch { stored: solution.objective, actual });
    }
    out
}
