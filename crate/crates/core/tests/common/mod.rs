//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use agh_lns::experiment::constructible_instances;
use agh_lns::features::{BipartiteState, Edge};
use agh_lns::{GeneratorConfig, Instance, VehicleKey};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tiny instances with one vehicle per fleet and two fleets, `n` cycling
/// through 2..=4.
pub fn tiny_instances(count: usize, seed: u64) -> Vec<Instance> {
    (0..count)
        .map(|i| {
            let n = 2 + i % 3;
            let config = GeneratorConfig::new(n, 2).with_vehicles(1).with_hourly_arrivals(1, 3);
            let (_, inst) = constructible_instances(&config, 1, seed + 1000 * i as u64)
                .expect("tiny instance")
                .remove(0);
            inst
        })
        .collect()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Depot-to-depot length computed straight from coordinates.
pub fn tour_length(inst: &Instance, order: &[usize]) -> f64 {
    let depot = (inst.depot_position.x, inst.depot_position.y);
    let at = |f: usize| (inst.flights[f].gate_position.x, inst.flights[f].gate_position.y);
    let (Some(&first), Some(&last)) = (order.first(), order.last()) else {
        return 0.0;
    };
    let mut d = dist(depot, at(first)) + dist(at(last), depot);
    for w in order.windows(2) {
        d += dist(at(w[0]), at(w[1]));
    }
    d
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Earliest start times for one route order per fleet, or `None` when
/// windows, travel or precedence cannot all hold. Fixed-point relaxation of
/// the lower bounds; a bound still moving after `n * K + 1` rounds means a
/// cyclic requirement.
pub fn earliest_schedule(inst: &Instance, orders: &[Vec<usize>]) -> Option<Vec<Vec<f64>>> {
    let n = inst.flights.len();
    let k = inst.fleets.len();
    let mut t: Vec<Vec<f64>> =
        (0..k).map(|q| (0..n).map(|f| inst.fleets[q].time_windows[f].earliest).collect()).collect();
    for _ in 0..=n * k + 1 {
        let mut changed = false;
        for (q, order) in orders.iter().enumerate() {
            let fleet = &inst.fleets[q];
            for w in order.windows(2) {
                let (a, b) = (w[0], w[1]);
                let ga = &inst.flights[a].gate_position;
                let gb = &inst.flights[b].gate_position;
                let travel = dist((ga.x, ga.y), (gb.x, gb.y)) / fleet.speed;
                let ready = t[q][a] + fleet.service_durations[a] + travel;
                if ready > t[q][b] + 1e-9 {
                    t[q][b] = ready;
                    changed = true;
                }
            }
        }
        for f in 0..n {
            let rule = inst.precedence.iter().find(|r| r.aircraft_type == inst.flights[f].aircraft_type);
            for &(before, after) in rule.map_or(&[][..], |r| &r.edges[..]) {
                if before >= k || after >= k {
                    continue;
                }
                let ready = t[before][f] + inst.fleets[before].service_durations[f];
                if ready > t[after][f] + 1e-9 {
                    t[after][f] = ready;
                    changed = true;
                }
            }
        }
        if !changed {
            let late = (0..k).any(|q| (0..n).any(|f| t[q][f] > inst.fleets[q].time_windows[f].latest + 1e-6));
            return (!late).then_some(t);
        }
    }
    None
}

/// Global optimum for instances with one vehicle per fleet, by trying every
/// route order of every fleet.
pub fn brute_force_single_vehicle(inst: &Instance) -> Option<f64> {
    assert!(inst.fleets.iter().all(|f| f.vehicle_count == 1));
    let n = inst.flights.len();
    for (q, fleet) in inst.fleets.iter().enumerate() {
        let load: u32 = inst.flights.iter().map(|f| f.demand[q]).sum();
        if load > fleet.capacity {
            return None;
        }
    }
    let flights: Vec<usize> = (0..n).collect();
    let perms = permutations(&flights);
    let k = inst.fleets.len();
    let mut best: Option<f64> = None;
    let mut choice = vec![0usize; k];
    loop {
        let orders: Vec<Vec<usize>> = choice.iter().map(|&c| perms[c].clone()).collect();
        let cost: f64 = orders.iter().map(|o| tour_length(inst, o)).sum();
        if best.is_none_or(|b| cost < b) && earliest_schedule(inst, &orders).is_some() {
            best = Some(cost);
        }
        // odometer over per-fleet permutations
        let mut q = 0;
        loop {
            if q == k {
                return best;
            }
            choice[q] += 1;
            if choice[q] < perms.len() {
                break;
            }
            choice[q] = 0;
            q += 1;
        }
    }
}

/// Random state with `n_c` rows, `n_v` columns and `n_w` vehicle nodes.
pub fn random_state(n_c: usize, n_v: usize, n_w: usize, seed: u64) -> BipartiteState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = move || rng.random_range(-1.0..1.0);
    let constraint_features = (0..n_c).map(|_| std::array::from_fn(|_| u())).collect();
    let variable_features = (0..n_v).map(|_| std::array::from_fn(|_| u())).collect();
    let vehicle_features = (0..n_w).map(|_| std::array::from_fn(|_| u())).collect();
    let mut edges = Vec::new();
    for row in 0..n_c {
        for col in 0..n_v {
            let coef = u();
            if coef > -0.2 {
                edges.push(Edge { row, col, coef });
            }
        }
    }
    let vehicle_membership = (0..n_w).map(|h| (0..n_v).filter(|j| j % n_w == h).collect()).collect();
    BipartiteState {
        constraint_features,
        variable_features,
        edges,
        vehicle_features,
        vehicle_membership,
        vehicles: (0..n_w).map(|v| VehicleKey::new(0, v)).collect(),
    }
}

fn scatter<T: Copy>(src: &[T], p: &[usize]) -> Vec<T> {
    let mut out = src.to_vec();
    for (old, &new) in p.iter().enumerate() {
        out[new] = src[old];
    }
    out
}

/// Relabels rows, columns and vehicles and shuffles the edge list. Returns
/// the new state and the vehicle relabeling (`old -> new`).
pub fn permute_state(state: &BipartiteState, rng: &mut ChaCha8Rng) -> (BipartiteState, Vec<usize>) {
    let perm = |n: usize, rng: &mut ChaCha8Rng| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        p
    };
    let pc = perm(state.num_constraints(), rng);
    let pv = perm(state.num_variables(), rng);
    let pw = perm(state.num_vehicles(), rng);
    let mut edges: Vec<Edge> =
        state.edges.iter().map(|e| Edge { row: pc[e.row], col: pv[e.col], coef: e.coef }).collect();
    edges.shuffle(rng);
    let mut membership = vec![Vec::new(); state.num_vehicles()];
    for (old, members) in state.vehicle_membership.iter().enumerate() {
        let mut m: Vec<usize> = members.iter().map(|&c| pv[c]).collect();
        m.shuffle(rng);
        membership[pw[old]] = m;
    }
    let out = BipartiteState {
        constraint_features: scatter(&state.constraint_features, &pc),
        variable_features: scatter(&state.variable_features, &pv),
        edges,
        vehicle_features: scatter(&state.vehicle_features, &pw),
        vehicle_membership: membership,
        vehicles: scatter(&state.vehicles, &pw),
    };
    (out, pw)
}
