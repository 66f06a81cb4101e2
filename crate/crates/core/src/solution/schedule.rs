//! Earliest-start scheduling over route and precedence arcs.

use thiserror::Error;

use super::{RoutePlan, StartTimes};
use crate::instance::Instance;

const WINDOW_TOL: f64 = 1e-9;
const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Infeasible {
    #[error("flight {flight} for fleet {fleet} cannot start before {earliest} (latest {latest})")]
    WindowExceeded {
        flight: usize,
        fleet: usize,
        earliest: f64,
        latest: f64,
    },
    #[error("route and precedence arcs form a cycle")]
    PrecedenceCycle,
    #[error("flight {flight} is visited twice by fleet {fleet}")]
    RepeatedVisit { flight: usize, fleet: usize },
}

/// Reusable buffers for repeated scheduling of plans over one instance.
///
/// Services are indexed `fleet * n + flight`. A service depends on its route
/// predecessor (finish plus travel) and on every served precedence
/// predecessor of the same flight (finish only).
#[derive(Debug)]
pub struct Scheduler {
    n: usize,
    served: Vec<bool>,
    route_next: Vec<usize>,
    indeg: Vec<u32>,
    ready: Vec<f64>,
    start: Vec<f64>,
    queue: Vec<usize>,
}

impl Scheduler {
    pub fn new(instance: &Instance) -> Self {
        let size = instance.num_flights() * instance.num_fleets();
        Self {
            n: instance.num_flights(),
            served: vec![false; size],
            route_next: vec![NONE; size],
            indeg: vec![0; size],
            ready: vec![0.0; size],
            start: vec![0.0; size],
            queue: Vec::with_capacity(size),
        }
    }

    /// Earliest start of every served `(flight, fleet)` in `plan`.
    pub fn run(&mut self, instance: &Instance, plan: &RoutePlan) -> Result<StartTimes, Infeasible> {
        self.propagate(instance, plan)?;
        let mut st = StartTimes::empty(self.n, instance.num_fleets());
        for id in 0..self.served.len() {
            if self.served[id] {
                st.set(id % self.n, id / self.n, self.start[id]);
            }
        }
        Ok(st)
    }

    /// Feasibility only, without materializing start times.
    pub fn is_feasible(&mut self, instance: &Instance, plan: &RoutePlan) -> bool {
        self.propagate(instance, plan).is_ok()
    }

    fn propagate(&mut self, instance: &Instance, plan: &RoutePlan) -> Result<(), Infeasible> {
        let n = self.n;
        self.served.fill(false);
        self.route_next.fill(NONE);
        self.indeg.fill(0);
        self.queue.clear();

        for (k, vehicles) in plan.routes.iter().enumerate() {
            for route in vehicles {
                for (pos, &f) in route.iter().enumerate() {
                    let id = k * n + f;
                    if self.served[id] {
                        return Err(Infeasible::RepeatedVisit { flight: f, fleet: k });
                    }
                    self.served[id] = true;
                    self.ready[id] = instance.window(f, k).earliest;
                    if let Some(&next) = route.get(pos + 1) {
                        self.route_next[id] = k * n + next;
                    }
                    if pos > 0 {
                        self.indeg[id] += 1;
                    }
                }
            }
        }
        for f in 0..n {
            for &(a, b) in instance.flight_precedence(f) {
                if self.served[a * n + f] && self.served[b * n + f] {
                    self.indeg[b * n + f] += 1;
                }
            }
        }
        for id in 0..self.served.len() {
            if self.served[id] && self.indeg[id] == 0 {
                self.queue.push(id);
            }
        }

        let mut head = 0;
        let mut window_err = None;
        while head < self.queue.len() {
            let id = self.queue[head];
            head += 1;
            let (k, f) = (id / n, id % n);
            let t = self.ready[id];
            self.start[id] = t;
            let w = instance.window(f, k);
            if window_err.is_none() && t > w.latest + WINDOW_TOL {
                window_err = Some(Infeasible::WindowExceeded {
                    flight: f,
                    fleet: k,
                    earliest: t,
                    latest: w.latest,
                });
            }
            let finish = t + instance.service(f, k);
            let next = self.route_next[id];
            if next != NONE {
                let g = next % n;
                let arrive = finish + instance.flight_travel(k, f, g);
                self.release(next, arrive);
            }
            for &(a, b) in instance.flight_precedence(f) {
                if a == k && self.served[b * n + f] {
                    self.release(b * n + f, finish);
                }
            }
        }
        let total = self.served.iter().filter(|&&s| s).count();
        if self.queue.len() < total {
            return Err(Infeasible::PrecedenceCycle);
        }
        match window_err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    #[inline]
    fn release(&mut self, id: usize, t: f64) {
        if t > self.ready[id] {
            self.ready[id] = t;
        }
        self.indeg[id] -= 1;
        if self.indeg[id] == 0 {
            self.queue.push(id);
        }
    }
}

/// Earliest start times for the routes of `plan`, or the reason none exist.
pub fn schedule_earliest(instance: &Instance, plan: &RoutePlan) -> Result<StartTimes, Infeasible> {
    Scheduler::new(instance).run(instance, plan)
}
