//! Conversion between route solutions and column assignments.

use thiserror::Error;

use super::MilpModel;
use crate::instance::Instance;
use crate::solution::{Route, Solution, StartTimes, VehicleKey};

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DecodeError {
    #[error("non-integral binary: column {column} = {value}")]
    NonIntegral { column: usize, value: f64 },
    #[error("vehicle ({}, {}) does not leave the start depot exactly once", .0.fleet, .0.vehicle)]
    Departure(VehicleKey),
    #[error("vehicle ({}, {}) has a branching or dangling route", .0.fleet, .0.vehicle)]
    Branching(VehicleKey),
    #[error("vehicle ({}, {}) has arcs off its depot-to-depot path", .0.fleet, .0.vehicle)]
    Detached(VehicleKey),
}

/// Full assignment for `solution`: route arcs, the direct depot arc for
/// unused vehicles, and start times (window opening for unserved flights).
pub fn encode_solution(model: &MilpModel, instance: &Instance, solution: &Solution) -> Vec<f64> {
    let vars = &model.vars;
    let mut x = vec![0.0; vars.num_vars()];
    let end = instance.end_depot();
    for &key in vars.vehicles() {
        for f in 0..vars.num_flights() {
            x[vars.start(key, f)] = model.bounds[vars.start(key, f)].0;
        }
        let visits = solution.route(key).map_or(&[][..], |r| &r.visits[..]);
        let mut prev = 0;
        for &f in visits {
            let node = Instance::flight_node(f);
            x[vars.arc(key, prev, node)] = 1.0;
            if let Some(t) = solution.start_times.get(f, key.fleet) {
                x[vars.start(key, f)] = t;
            }
            prev = node;
        }
        x[vars.arc(key, prev, end)] = 1.0;
    }
    x
}

/// Routes and start times from an assignment. Structural problems are
/// reported; constraint-level feasibility is left to the checkers.
pub fn decode_assignment(
    model: &MilpModel,
    instance: &Instance,
    values: &[f64],
) -> Result<Solution, DecodeError> {
    let vars = &model.vars;
    let nn = vars.num_nodes();
    let end = nn - 1;
    for c in 0..vars.num_binaries() {
        let v = values[c];
        if (v - v.round()).abs() > INT_TOL {
            return Err(DecodeError::NonIntegral { column: c, value: v });
        }
    }
    let on = |key, i, j| values[vars.arc(key, i, j)] > 0.5;

    let mut routes = Vec::new();
    let mut start_times = StartTimes::empty(vars.num_flights(), vars.num_fleets());
    for &key in vars.vehicles() {
        let active = vars.vehicle_binaries(key).filter(|&c| values[c] > 0.5).count();
        let succ = |i: usize| -> Result<usize, DecodeError> {
            let mut it = (0..nn).filter(|&j| j != i && on(key, i, j));
            match (it.next(), it.next()) {
                (Some(j), None) => Ok(j),
                _ => Err(DecodeError::Branching(key)),
            }
        };
        let first = succ(0).map_err(|_| DecodeError::Departure(key))?;
        let mut visits = Vec::new();
        let mut node = first;
        while node != end {
            let Some(f) = instance.node_flight(node) else {
                return Err(DecodeError::Branching(key));
            };
            if visits.len() >= vars.num_flights() {
                return Err(DecodeError::Branching(key));
            }
            visits.push(f);
            start_times.set(f, key.fleet, values[vars.start(key, f)]);
            node = succ(node)?;
        }
        if active != visits.len() + 1 {
            return Err(DecodeError::Detached(key));
        }
        routes.push(Route { fleet: key.fleet, vehicle: key.vehicle, visits });
    }
    Ok(Solution::new(instance, routes, start_times))
}
