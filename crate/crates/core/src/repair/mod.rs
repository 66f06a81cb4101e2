//! Repair operators: a built-in insertion plus local search matheuristic, an
//! exhaustive oracle for tiny subproblems and an adapter for external MILP
//! solvers.

mod exact;
mod external;

pub use exact::{exact_oracle_repair, ExactOracle, MAX_ORACLE_PAIRS, MAX_ORACLE_VEHICLES};
pub use external::{external_solver_repair, format_values, ExternalSolver, SOLVER_ENV};

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::destroy::fully_free_vehicles;
use crate::instance::Instance;
use crate::lns::{LnsContext, RepairFailure, RepairOperator};
use crate::milp::VarMap;
use crate::solution::{route_distance, RoutePlan, Scheduler, Solution, VehicleKey};

const IMPROVE_EPS: f64 = 1e-9;

/// Arc set of a route, depot legs included; an empty route is the direct
/// depot-to-depot arc.
fn route_arcs(instance: &Instance, visits: &[usize]) -> Vec<(usize, usize)> {
    let end = instance.end_depot();
    let mut nodes = Vec::with_capacity(visits.len() + 2);
    nodes.push(0);
    nodes.extend(visits.iter().map(|&f| Instance::flight_node(f)));
    nodes.push(end);
    nodes.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Decides which route changes the free column set permits: a vehicle may
/// take a new route only if every arc that flips is free.
struct ArcGuard<'a> {
    instance: &'a Instance,
    vars: &'a VarMap,
    free: &'a BTreeSet<usize>,
    original: &'a RoutePlan,
    fully_free: BTreeSet<VehicleKey>,
    touchable: BTreeSet<VehicleKey>,
}

impl<'a> ArcGuard<'a> {
    fn new(instance: &'a Instance, vars: &'a VarMap, free: &'a BTreeSet<usize>, original: &'a RoutePlan) -> Self {
        let fully_free = fully_free_vehicles(vars, free).into_iter().collect();
        let touchable = free.iter().map(|&c| vars.owner(c)).collect();
        Self { instance, vars, free, original, fully_free, touchable }
    }

    fn allows(&self, key: VehicleKey, visits: &[usize]) -> bool {
        if self.fully_free.contains(&key) {
            return true;
        }
        if !self.touchable.contains(&key) {
            return visits == self.original.route(key);
        }
        let old = route_arcs(self.instance, self.original.route(key));
        let new = route_arcs(self.instance, visits);
        old.iter()
            .filter(|a| !new.contains(a))
            .chain(new.iter().filter(|a| !old.contains(a)))
            .all(|&(i, j)| self.free.contains(&self.vars.arc(key, i, j)))
    }
}

struct Search<'a> {
    instance: &'a Instance,
    guard: ArcGuard<'a>,
    scheduler: Scheduler,
    plan: RoutePlan,
    deadline: Instant,
}

impl Search<'_> {
    fn load(&self, key: VehicleKey, visits: &[usize]) -> u32 {
        visits.iter().map(|&f| self.instance.demand(f, key.fleet)).sum()
    }

    fn fits(&self, key: VehicleKey, visits: &[usize]) -> bool {
        self.load(key, visits) <= self.instance.fleets[key.fleet].capacity
    }

    /// Applies new routes for one or two vehicles if the result schedules;
    /// restores the old routes otherwise.
    fn try_apply(&mut self, changes: &[(VehicleKey, Vec<usize>)]) -> bool {
        let old: Vec<Vec<usize>> = changes
            .iter()
            .map(|(k, r)| std::mem::replace(self.plan.route_mut(*k), r.clone()))
            .collect();
        if self.scheduler.is_feasible(self.instance, &self.plan) {
            return true;
        }
        for ((k, _), r) in changes.iter().zip(old) {
            *self.plan.route_mut(*k) = r;
        }
        false
    }

    /// Cheapest feasible insertion of `flight` into the fleet's vehicles.
    fn insert(&mut self, flight: usize, fleet: usize, vehicles: &[VehicleKey]) -> bool {
        let mut options: Vec<(f64, VehicleKey, usize)> = Vec::new();
        for &key in vehicles.iter().filter(|k| k.fleet == fleet) {
            let route = self.plan.route(key);
            if self.load(key, route) + self.instance.demand(flight, fleet) > self.instance.fleets[fleet].capacity {
                continue;
            }
            let base = route_distance(self.instance, route);
            let mut trial = Vec::with_capacity(route.len() + 1);
            for pos in 0..=route.len() {
                trial.clear();
                trial.extend_from_slice(&route[..pos]);
                trial.push(flight);
                trial.extend_from_slice(&route[pos..]);
                if self.guard.allows(key, &trial) {
                    options.push((route_distance(self.instance, &trial) - base, key, pos));
                }
            }
        }
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, key, pos) in options {
            let mut route = self.plan.route(key).to_vec();
            route.insert(pos, flight);
            if self.try_apply(&[(key, route)]) {
                return true;
            }
        }
        false
    }

    /// First-improvement relocate and exchange moves among `vehicles` until
    /// none improves or the deadline passes.
    fn local_search(&mut self, vehicles: &[VehicleKey]) {
        while Instant::now() < self.deadline {
            if !(self.relocate(vehicles) || self.exchange(vehicles)) {
                break;
            }
        }
    }

    fn relocate(&mut self, vehicles: &[VehicleKey]) -> bool {
        for &a in vehicles {
            let len_a = self.plan.route(a).len();
            for i in 0..len_a {
                for &b in vehicles.iter().filter(|b| b.fleet == a.fleet) {
                    if Instant::now() >= self.deadline {
                        return false;
                    }
                    let route_a = self.plan.route(a).to_vec();
                    let f = route_a[i];
                    let mut reduced = route_a.clone();
                    reduced.remove(i);
                    if a == b {
                        let base = route_distance(self.instance, &route_a);
                        for pos in 0..=reduced.len() {
                            if pos == i {
                                continue;
                            }
                            let mut cand = reduced.clone();
                            cand.insert(pos, f);
                            if route_distance(self.instance, &cand) < base - IMPROVE_EPS
                                && self.guard.allows(a, &cand)
                                && self.try_apply(&[(a, cand)])
                            {
                                return true;
                            }
                        }
                        continue;
                    }
                    let route_b = self.plan.route(b).to_vec();
                    let base = route_distance(self.instance, &route_a) + route_distance(self.instance, &route_b);
                    let gain_a = route_distance(self.instance, &reduced);
                    if !self.fits(b, &[route_b.as_slice(), &[f]].concat()) || !self.guard.allows(a, &reduced) {
                        continue;
                    }
                    for pos in 0..=route_b.len() {
                        let mut cand = route_b.clone();
                        cand.insert(pos, f);
                        if gain_a + route_distance(self.instance, &cand) < base - IMPROVE_EPS
                            && self.guard.allows(b, &cand)
                            && self.try_apply(&[(a, reduced.clone()), (b, cand)])
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn exchange(&mut self, vehicles: &[VehicleKey]) -> bool {
        for (ia, &a) in vehicles.iter().enumerate() {
            for &b in vehicles[ia + 1..].iter().filter(|b| b.fleet == a.fleet) {
                let route_a = self.plan.route(a).to_vec();
                let route_b = self.plan.route(b).to_vec();
                let base = route_distance(self.instance, &route_a) + route_distance(self.instance, &route_b);
                for i in 0..route_a.len() {
                    for j in 0..route_b.len() {
                        if Instant::now() >= self.deadline {
                            return false;
                        }
                        let mut ca = route_a.clone();
                        let mut cb = route_b.clone();
                        std::mem::swap(&mut ca[i], &mut cb[j]);
                        if route_distance(self.instance, &ca) + route_distance(self.instance, &cb)
                            < base - IMPROVE_EPS
                            && self.fits(a, &ca)
                            && self.fits(b, &cb)
                            && self.guard.allows(a, &ca)
                            && self.guard.allows(b, &cb)
                            && self.try_apply(&[(a, ca), (b, cb)])
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Ruin-and-recreate over the free columns of `current`.
///
/// Vehicles whose route binaries are all free are emptied and their services
/// reinserted by cheapest feasible insertion, fleets in precedence order and
/// flights by window opening. If some service fits nowhere, the original
/// routes are restored instead. Relocate and exchange moves then improve the
/// result, touching only routes whose changed arcs are free. Routes of
/// vehicles without free columns are never modified, and the result is never
/// worse than `current`. A zero budget skips the local search.
pub fn matheuristic_repair(
    instance: &Instance,
    vars: &VarMap,
    current: &Solution,
    free: &BTreeSet<usize>,
    budget: Duration,
) -> Result<Solution, RepairFailure> {
    let original = current.plan(instance);
    let guard = ArcGuard::new(instance, vars, free, &original);
    let ruined: Vec<VehicleKey> = guard.fully_free.iter().copied().collect();
    let touchable: Vec<VehicleKey> = guard.touchable.iter().copied().collect();
    let mut search = Search {
        instance,
        guard,
        scheduler: Scheduler::new(instance),
        plan: original.clone(),
        deadline: Instant::now() + budget,
    };

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &key in &ruined {
        pairs.extend(search.plan.route(key).iter().map(|&f| (f, key.fleet)));
        search.plan.route_mut(key).clear();
    }
    let rank: Vec<usize> = {
        let order = instance.fleet_order();
        let mut r = vec![0; order.len()];
        for (pos, &k) in order.iter().enumerate() {
            r[k] = pos;
        }
        r
    };
    pairs.sort_by(|&(f, k), &(g, l)| {
        rank[k]
            .cmp(&rank[l])
            .then(instance.window(f, k).earliest.total_cmp(&instance.window(g, l).earliest))
            .then(f.cmp(&g))
    });
    for &(f, k) in &pairs {
        if !search.insert(f, k, &ruined) {
            search.plan = original.clone();
            break;
        }
    }

    if !budget.is_zero() {
        search.local_search(&touchable);
    }

    let plan = search.plan;
    let start_times = search
        .scheduler
        .run(instance, &plan)
        .map_err(|_| first_unserved(instance, &plan))?;
    let repaired = Solution::from_plan(instance, plan, start_times);
    if repaired.objective > current.objective + IMPROVE_EPS {
        return Ok(current.clone());
    }
    Ok(repaired)
}

fn first_unserved(instance: &Instance, plan: &RoutePlan) -> RepairFailure {
    for (k, vehicles) in plan.routes.iter().enumerate() {
        for f in 0..instance.num_flights() {
            if !vehicles.iter().any(|r| r.contains(&f)) {
                return RepairFailure::Unrepairable { flight: f, fleet: k };
            }
        }
    }
    RepairFailure::Unrepairable { flight: 0, fleet: 0 }
}

/// [`matheuristic_repair`] as a [`RepairOperator`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Matheuristic;

impl RepairOperator for Matheuristic {
    fn repair(
        &mut self,
        ctx: &LnsContext<'_>,
        free: &BTreeSet<usize>,
        budget: Duration,
    ) -> Result<Solution, RepairFailure> {
        matheuristic_repair(ctx.instance, &ctx.model.vars, ctx.current, free, budget)
    }

    fn name(&self) -> &str {
        "matheuristic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::destroy::vehicle_columns;
    use crate::instance::tests::d1;
    use crate::milp::build_model;
    use crate::solution::tests::d1_optimal;
    use crate::solution::{check_feasible, schedule_earliest, Route};

    /// D1 plus a third gate off the depot line, so visiting order matters.
    fn triangle() -> Instance {
        let mut inst = d1();
        let mut extra = inst.flights[0].clone();
        extra.flight_id = 2;
        extra.gate_position = crate::instance::Point::new(10.0, 10.0);
        inst.flights.push(extra);
        for fleet in &mut inst.fleets {
            fleet.service_durations.push(5.0);
            let w = fleet.time_windows[0];
            fleet.time_windows.push(w);
        }
        inst
    }

    fn straight() -> f64 {
        10.0 + 10.0 + 2.0 * 200f64.sqrt()
    }

    /// Fleet A visits the triangle out of order, fleet B optimally.
    fn with_bad_first_route(inst: &Instance) -> Solution {
        let routes = vec![
            Route { fleet: 0, vehicle: 0, visits: vec![0, 2, 1] },
            Route { fleet: 1, vehicle: 0, visits: vec![0, 1, 2] },
        ];
        let plan = Solution::new(inst, routes, crate::solution::StartTimes::empty(3, 2)).plan(inst);
        let st = schedule_earliest(inst, &plan).unwrap();
        Solution::from_plan(inst, plan, st)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn bad_route_is_straightened() {
        let inst = triangle();
        let m = build_model(&inst);
        let bad = with_bad_first_route(&inst);
        assert!(close(bad.objective, straight() + 40.0 + 200f64.sqrt()));
        let free = vehicle_columns(&m.vars, [VehicleKey::new(0, 0)]);
        let s = matheuristic_repair(&inst, &m.vars, &bad, &free, Duration::from_secs(1)).unwrap();
        assert!(close(s.objective, 2.0 * straight()), "{}", s.objective);
        assert!(check_feasible(&inst, &s).is_empty());
    }

    #[test]
    fn optimum_is_kept() {
        let inst = d1();
        let m = build_model(&inst);
        let free = vehicle_columns(&m.vars, m.vars.vehicles().iter().copied());
        let s = matheuristic_repair(&inst, &m.vars, &d1_optimal(), &free, Duration::from_secs(1)).unwrap();
        assert_eq!(s.objective, 80.0);
    }

    #[test]
    fn zero_budget_is_greedy_only() {
        let inst = triangle();
        let m = build_model(&inst);
        let bad = with_bad_first_route(&inst);
        let free = vehicle_columns(&m.vars, [VehicleKey::new(0, 0)]);
        let s = matheuristic_repair(&inst, &m.vars, &bad, &free, Duration::ZERO).unwrap();
        assert!(s.objective <= bad.objective);
        assert!(check_feasible(&inst, &s).is_empty());
    }

    #[test]
    fn fixed_vehicles_are_untouched() {
        let inst = triangle();
        let m = build_model(&inst);
        let bad = with_bad_first_route(&inst);
        let free = vehicle_columns(&m.vars, [VehicleKey::new(1, 0)]);
        let s = matheuristic_repair(&inst, &m.vars, &bad, &free, Duration::from_secs(1)).unwrap();
        assert_eq!(s.route(VehicleKey::new(0, 0)), bad.route(VehicleKey::new(0, 0)));
    }

    #[test]
    fn partially_free_vehicle_moves_only_on_free_arcs() {
        let inst = triangle();
        let m = build_model(&inst);
        let bad = with_bad_first_route(&inst);
        let key = VehicleKey::new(0, 0);
        // 0 -> 1 -> 3 -> 2 -> end into 0 -> 1 -> 2 -> 3 -> end flips six arcs
        let needed = [(1, 3), (3, 2), (2, 4), (1, 2), (2, 3), (3, 4)];
        let mut free: BTreeSet<usize> = needed[..5].iter().map(|&(i, j)| m.vars.arc(key, i, j)).collect();
        let s = matheuristic_repair(&inst, &m.vars, &bad, &free, Duration::from_secs(1)).unwrap();
        assert_eq!(s, bad);
        free.insert(m.vars.arc(key, 3, 4));
        let s = matheuristic_repair(&inst, &m.vars, &bad, &free, Duration::from_secs(1)).unwrap();
        assert!(close(s.objective, 2.0 * straight()), "{}", s.objective);
    }

    #[test]
    fn split_routes_are_merged() {
        let mut inst = d1();
        inst.fleets[0].vehicle_count = 2;
        let m = build_model(&inst);
        let routes = vec![
            Route { fleet: 0, vehicle: 0, visits: vec![0] },
            Route { fleet: 0, vehicle: 1, visits: vec![1] },
            Route { fleet: 1, vehicle: 0, visits: vec![0, 1] },
        ];
        let plan = Solution::new(&inst, routes.clone(), crate::solution::StartTimes::empty(2, 2)).plan(&inst);
        let st = schedule_earliest(&inst, &plan).unwrap();
        let s0 = Solution::new(&inst, routes, st);
        assert_eq!(s0.objective, 100.0);
        let free = vehicle_columns(&m.vars, [VehicleKey::new(0, 0), VehicleKey::new(0, 1)]);
        let s = matheuristic_repair(&inst, &m.vars, &s0, &free, Duration::from_secs(1)).unwrap();
        assert_eq!(s.objective, 80.0);
        assert!(check_feasible(&inst, &s).is_empty());
    }
}
