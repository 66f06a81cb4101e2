//! Exhaustive repair for tiny subproblems, used as a test oracle.

use std::collections::BTreeSet;
use std::time::Duration;

use crate::destroy::fully_free_vehicles;
use crate::instance::Instance;
use crate::lns::{LnsContext, RepairFailure, RepairOperator};
use crate::milp::VarMap;
use crate::solution::{route_distance, RoutePlan, Scheduler, Solution, VehicleKey};

pub const MAX_ORACLE_PAIRS: usize = 8;
pub const MAX_ORACLE_VEHICLES: usize = 3;

struct Enumeration<'a> {
    instance: &'a Instance,
    vehicles: &'a [VehicleKey],
    pairs: &'a [(usize, usize)],
    scheduler: Scheduler,
    plan: RoutePlan,
    loads: Vec<u32>,
    best: Option<(f64, RoutePlan)>,
}

impl Enumeration<'_> {
    fn cost(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|&k| route_distance(self.instance, self.plan.route(k)))
            .sum()
    }

    fn run(&mut self, idx: usize) {
        let partial = self.cost();
        // with triangle inequality, inserting more never shortens a route
        if self.best.as_ref().is_some_and(|(b, _)| partial >= *b - 1e-9) {
            return;
        }
        if idx == self.pairs.len() {
            if self.scheduler.is_feasible(self.instance, &self.plan) {
                self.best = Some((partial, self.plan.clone()));
            }
            return;
        }
        let (flight, fleet) = self.pairs[idx];
        let q = self.instance.demand(flight, fleet);
        let cap = self.instance.fleets[fleet].capacity;
        for (slot, &key) in self.vehicles.iter().enumerate() {
            if key.fleet != fleet || self.loads[slot] + q > cap {
                continue;
            }
            let len = self.plan.route(key).len();
            for pos in 0..=len {
                self.plan.route_mut(key).insert(pos, flight);
                self.loads[slot] += q;
                self.run(idx + 1);
                self.loads[slot] -= q;
                self.plan.route_mut(key).remove(pos);
            }
        }
    }
}

/// Best reassignment of the services on fully free vehicles, found by trying
/// every assignment to free vehicles of the same fleet and every route order.
/// Refuses subproblems beyond [`MAX_ORACLE_PAIRS`] services or
/// [`MAX_ORACLE_VEHICLES`] vehicles.
pub fn exact_oracle_repair(
    instance: &Instance,
    vars: &VarMap,
    current: &Solution,
    free: &BTreeSet<usize>,
) -> Result<Solution, RepairFailure> {
    let vehicles = fully_free_vehicles(vars, free);
    let mut plan = current.plan(instance);
    let mut pairs = Vec::new();
    for &key in &vehicles {
        pairs.extend(plan.route(key).iter().map(|&f| (f, key.fleet)));
        plan.route_mut(key).clear();
    }
    if pairs.len() > MAX_ORACLE_PAIRS || vehicles.len() > MAX_ORACLE_VEHICLES {
        return Err(RepairFailure::GuardExceeded { pairs: pairs.len(), vehicles: vehicles.len() });
    }
    let mut search = Enumeration {
        instance,
        vehicles: &vehicles,
        pairs: &pairs,
        scheduler: Scheduler::new(instance),
        plan,
        loads: vec![0; vehicles.len()],
        best: None,
    };
    search.run(0);
    let (_, best) = search.best.ok_or(match pairs.first() {
        Some(&(flight, fleet)) => RepairFailure::Unrepairable { flight, fleet },
        None => RepairFailure::Infeasible,
    })?;
    let start_times = search
        .scheduler
        .run(instance, &best)
        .expect("enumerated plan was checked feasible");
    Ok(Solution::from_plan(instance, best, start_times))
}

/// [`exact_oracle_repair`] as a [`RepairOperator`]; the budget is ignored.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOracle;

impl RepairOperator for ExactOracle {
    fn repair(
        &mut self,
        ctx: &LnsContext<'_>,
        free: &BTreeSet<usize>,
        _budget: Duration,
    ) -> Result<Solution, RepairFailure> {
        exact_oracle_repair(ctx.instance, &ctx.model.vars, ctx.current, free)
    }

    fn name(&self) -> &str {
        "exact"
    }
}
