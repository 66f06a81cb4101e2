//! Nearest-neighbor construction of a first feasible solution.

use thiserror::Error;

use super::{schedule_earliest, Infeasible, RoutePlan, Solution, StartTimes};
use crate::instance::Instance;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConstructionFailed {
    #[error("fleet {fleet} ran out of vehicles with flight {flight} unserved")]
    OutOfVehicles { fleet: usize, flight: usize },
    #[error("flight {flight} cannot be served by fleet {fleet} on its own")]
    Unservable { fleet: usize, flight: usize },
    #[error("constructed routes failed scheduling: {0}")]
    Schedule(#[from] Infeasible),
}

/// Builds one fleet at a time in precedence order. Each route repeatedly
/// takes the nearest unserved flight (lowest id on ties) that still fits the
/// vehicle's capacity and can start inside its window; when nothing fits, a
/// new vehicle is opened. A service may not start so late that a successor
/// fleet could no longer fit its own window. If a fleet runs out of vehicles
/// this way, it is rebuilt by best-fit insertion in decreasing demand order.
pub fn initial_solution(instance: &Instance) -> Result<Solution, ConstructionFailed> {
    let n = instance.num_flights();
    let mut plan = RoutePlan::empty(instance);
    let mut times = StartTimes::empty(n, instance.num_fleets());
    let order = instance.fleet_order();
    let latest = latest_starts(instance, &order);

    for k in order {
        // earliest start allowed by already scheduled predecessor fleets
        let earliest: Vec<f64> = (0..n)
            .map(|f| {
                let mut t = instance.window(f, k).earliest;
                for &(a, b) in instance.flight_precedence(f) {
                    if b == k {
                        let start = times.get(f, a).expect("predecessor fleet already routed");
                        t = t.max(start + instance.service(f, a));
                    }
                }
                t
            })
            .collect();
        let bounds = FleetBounds {
            fleet: k,
            earliest: &earliest,
            latest: &latest[k * n..(k + 1) * n],
        };
        let routes = match nearest_neighbor(instance, &bounds) {
            Err(ConstructionFailed::OutOfVehicles { .. }) => best_fit(instance, &bounds)?,
            other => other?,
        };
        for (v, route) in routes.into_iter().enumerate() {
            for (f, t) in bounds.simulate(instance, &route).expect("routes are reachable") {
                times.set(f, k, t);
            }
            plan.routes[k][v] = route;
        }
    }

    let start_times = schedule_earliest(instance, &plan)?;
    Ok(Solution::from_plan(instance, plan, start_times))
}

struct FleetBounds<'a> {
    fleet: usize,
    earliest: &'a [f64],
    latest: &'a [f64],
}

impl FleetBounds<'_> {
    /// Start times along `route`, or `None` if some start exceeds its bound.
    fn simulate(&self, instance: &Instance, route: &[usize]) -> Option<Vec<(usize, f64)>> {
        let k = self.fleet;
        let mut out = Vec::with_capacity(route.len());
        let mut prev: Option<(usize, f64)> = None;
        for &f in route {
            let t = match prev {
                None => self.earliest[f],
                Some((p, finish)) => self.earliest[f].max(finish + instance.flight_travel(k, p, f)),
            };
            if t > self.latest[f] + 1e-9 {
                return None;
            }
            prev = Some((f, t + instance.service(f, k)));
            out.push((f, t));
        }
        Some(out)
    }
}

fn nearest_neighbor(
    instance: &Instance,
    bounds: &FleetBounds<'_>,
) -> Result<Vec<Vec<usize>>, ConstructionFailed> {
    let n = instance.num_flights();
    let k = bounds.fleet;
    let fleet = &instance.fleets[k];
    let mut routes = Vec::new();
    let mut unserved = vec![true; n];
    let mut remaining = n;

    while remaining > 0 {
        if routes.len() == fleet.vehicle_count {
            let flight = unserved.iter().position(|&u| u).unwrap();
            return Err(ConstructionFailed::OutOfVehicles { fleet: k, flight });
        }
        let mut route: Vec<usize> = Vec::new();
        let mut load = 0u32;
        let mut finish = 0.0;
        loop {
            let last = route.last().copied();
            let mut best: Option<(f64, usize, f64)> = None;
            for f in (0..n).filter(|&f| unserved[f]) {
                if load + instance.demand(f, k) > fleet.capacity {
                    continue;
                }
                let (dist, start) = match last {
                    None => (
                        instance.depot_position.distance(&instance.flights[f].gate_position),
                        bounds.earliest[f],
                    ),
                    Some(p) => (
                        instance.flight_distance(p, f),
                        bounds.earliest[f].max(finish + instance.flight_travel(k, p, f)),
                    ),
                };
                if start > bounds.latest[f] + 1e-9 {
                    continue;
                }
                if best.is_none_or(|(d, _, _)| dist < d) {
                    best = Some((dist, f, start));
                }
            }
            let Some((_, f, start)) = best else { break };
            route.push(f);
            unserved[f] = false;
            remaining -= 1;
            load += instance.demand(f, k);
            finish = start + instance.service(f, k);
        }
        if route.is_empty() {
            let flight = unserved.iter().position(|&u| u).unwrap();
            return Err(ConstructionFailed::Unservable { fleet: k, flight });
        }
        routes.push(route);
    }
    Ok(routes)
}

/// Flights by decreasing demand, each placed at the cheapest reachable
/// position of any open route with room, opening a route only when needed.
fn best_fit(
    instance: &Instance,
    bounds: &FleetBounds<'_>,
) -> Result<Vec<Vec<usize>>, ConstructionFailed> {
    let n = instance.num_flights();
    let k = bounds.fleet;
    let fleet = &instance.fleets[k];
    let mut flights: Vec<usize> = (0..n).collect();
    flights.sort_by(|&a, &b| {
        instance
            .demand(b, k)
            .cmp(&instance.demand(a, k))
            .then(bounds.earliest[a].total_cmp(&bounds.earliest[b]))
            .then(a.cmp(&b))
    });
    let mut routes: Vec<Vec<usize>> = Vec::new();
    let mut loads: Vec<u32> = Vec::new();
    let mut trial = Vec::new();
    for f in flights {
        let q = instance.demand(f, k);
        let mut best: Option<(f64, usize, usize)> = None;
        for (r, route) in routes.iter().enumerate() {
            if loads[r] + q > fleet.capacity {
                continue;
            }
            for pos in 0..=route.len() {
                trial.clear();
                trial.extend_from_slice(&route[..pos]);
                trial.push(f);
                trial.extend_from_slice(&route[pos..]);
                if bounds.simulate(instance, &trial).is_none() {
                    continue;
                }
                let delta = super::route_distance(instance, &trial)
                    - super::route_distance(instance, route);
                if best.is_none_or(|(d, _, _)| delta < d) {
                    best = Some((delta, r, pos));
                }
            }
        }
        match best {
            Some((_, r, pos)) => {
                routes[r].insert(pos, f);
                loads[r] += q;
            }
            None if bounds.simulate(instance, &[f]).is_none() || q > fleet.capacity => {
                return Err(ConstructionFailed::Unservable { fleet: k, flight: f });
            }
            None if routes.len() == fleet.vehicle_count => {
                return Err(ConstructionFailed::OutOfVehicles { fleet: k, flight: f });
            }
            None => {
                routes.push(vec![f]);
                loads.push(q);
            }
        }
    }
    Ok(routes)
}

/// Latest start of each `(flight, fleet)` that still lets every precedence
/// successor start inside its window, indexed `fleet * n + flight`.
fn latest_starts(instance: &Instance, order: &[usize]) -> Vec<f64> {
    let n = instance.num_flights();
    let mut latest = vec![0.0; n * instance.num_fleets()];
    for &k in order.iter().rev() {
        for f in 0..n {
            let mut l = instance.window(f, k).latest;
            for &(a, b) in instance.flight_precedence(f) {
                if a == k {
                    l = l.min(latest[b * n + f] - instance.service(f, k));
                }
            }
            latest[k * n + f] = l;
        }
    }
    latest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::d1;
    use crate::instance::{generate, GeneratorConfig, TimeWindow};
    use crate::solution::check_feasible;

    #[test]
    fn d1_construction_is_optimal() {
        let inst = d1();
        let s = initial_solution(&inst).unwrap();
        assert_eq!(s.objective, 80.0);
        assert!(check_feasible(&inst, &s).is_empty());
    }

    #[test]
    fn capacity_exhaustion_opens_a_second_vehicle() {
        let mut inst = d1();
        inst.fleets[0].vehicle_count = 2;
        inst.fleets[0].capacity = 10;
        let s = initial_solution(&inst).unwrap();
        let fleet0: Vec<_> = s.routes.iter().filter(|r| r.fleet == 0).collect();
        assert_eq!(fleet0.len(), 2);
        assert!(check_feasible(&inst, &s).is_empty());
    }

    #[test]
    fn too_few_vehicles_fails() {
        let mut inst = d1();
        inst.fleets[0].capacity = 10;
        assert_eq!(
            initial_solution(&inst),
            Err(ConstructionFailed::OutOfVehicles { fleet: 0, flight: 1 })
        );
    }

    #[test]
    fn impossible_window_fails() {
        let mut inst = d1();
        inst.fleets[0].vehicle_count = 2;
        inst.fleets[1].time_windows[0] = TimeWindow::new(0.0, 2.0);
        // fleet 0 must finish flight 0 by t=2, which its 5 minute service rules out
        assert_eq!(
            initial_solution(&inst),
            Err(ConstructionFailed::Unservable { fleet: 0, flight: 0 })
        );
    }

    #[test]
    fn generated_instances_construct_feasibly() {
        let mut ok = 0;
        for seed in 0..20 {
            let inst = generate(&GeneratorConfig::new(10, 3), seed).unwrap();
            match initial_solution(&inst) {
                Ok(s) => {
                    assert!(check_feasible(&inst, &s).is_empty(), "seed {seed}");
                    ok += 1;
                }
                Err(e) => eprintln!("seed {seed}: {e}"),
            }
        }
        assert!(ok >= 15, "only {ok}/20 constructed");
    }
}
