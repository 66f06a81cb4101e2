//! Bipartite constraint/variable graph of the current search state, with
//! vehicle nodes pooling the route binaries of each `(fleet, vehicle)`.

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::milp::{encode_solution, MilpModel, Sense};
use crate::solution::{route_distance, Solution, VehicleKey};

pub const CONSTRAINT_DIM: usize = 4;
pub const VARIABLE_DIM: usize = 5;
pub const VEHICLE_DIM: usize = 3;

/// One constraint/variable incidence with its normalized coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteState {
    /// `[obj_cos_sim, bias, is_eq, is_le]` per row.
    pub constraint_features: Vec<[f64; CONSTRAINT_DIM]>,
    /// `[is_integer, is_continuous, obj_coef, sol_val, inc_val]` per column.
    pub variable_features: Vec<[f64; VARIABLE_DIM]>,
    pub edges: Vec<Edge>,
    /// `[used, unused, sol_cost]` per vehicle node.
    pub vehicle_features: Vec<[f64; VEHICLE_DIM]>,
    /// Route-binary columns pooled into each vehicle node.
    pub vehicle_membership: Vec<Vec<usize>>,
    pub vehicles: Vec<VehicleKey>,
}

impl BipartiteState {
    pub fn num_constraints(&self) -> usize {
        self.constraint_features.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variable_features.len()
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicle_features.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }
}

/// Cosine similarity of two sparse vectors over the same columns; 0 when
/// either is all zeros. `objective` must be dense.
pub fn obj_cos_sim(row: &[(usize, f64)], objective: &[f64]) -> f64 {
    cos_with_norm(row, objective, objective.iter().map(|c| c * c).sum::<f64>().sqrt())
}

fn cos_with_norm(row: &[(usize, f64)], objective: &[f64], no: f64) -> f64 {
    let dot: f64 = row.iter().map(|&(c, a)| a * objective[c]).sum();
    let nr = row.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt();
    if nr == 0.0 || no == 0.0 {
        return 0.0;
    }
    (dot / (nr * no)).clamp(-1.0, 1.0)
}

/// Builds the state for `current` with `incumbent` as best-so-far.
pub fn featurize(
    instance: &Instance,
    model: &MilpModel,
    current: &Solution,
    incumbent: &Solution,
) -> BipartiteState {
    let cur = encode_solution(model, instance, current);
    let inc = encode_solution(model, instance, incumbent);
    featurize_values(instance, model, current, &cur, &inc)
}

/// [`featurize`] with both solutions already encoded.
pub fn featurize_values(
    instance: &Instance,
    model: &MilpModel,
    current: &Solution,
    current_values: &[f64],
    incumbent_values: &[f64],
) -> BipartiteState {
    let objective = model.objective_dense();
    let obj_norm = objective.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut constraint_features = Vec::with_capacity(model.rows.len());
    let mut edges = Vec::new();
    for (r, row) in model.rows.iter().enumerate() {
        let norm = row.norm();
        // dividing by max(norm, |rhs|) keeps the bias inside [-1, 1]
        let scale = norm.max(row.rhs.abs());
        let bias = if scale > 0.0 { row.rhs / scale } else { 0.0 };
        let (eq, le) = match row.sense {
            Sense::Eq => (1.0, 0.0),
            Sense::Le => (0.0, 1.0),
        };
        constraint_features.push([cos_with_norm(&row.coefs, &objective, obj_norm), bias, eq, le]);
        for &(c, a) in &row.coefs {
            if a != 0.0 {
                edges.push(Edge { row: r, col: c, coef: a / norm });
            }
        }
    }

    let max_c = objective.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let horizon = model
        .bounds
        .iter()
        .enumerate()
        .filter(|&(c, _)| !model.vars.is_binary(c))
        .fold(0.0f64, |m, (_, b)| m.max(b.1));
    let variable_features = (0..model.num_vars())
        .map(|c| {
            let binary = model.vars.is_binary(c);
            let scale = if binary || horizon <= 0.0 { 1.0 } else { horizon };
            [
                if binary { 1.0 } else { 0.0 },
                if binary { 0.0 } else { 1.0 },
                if max_c > 0.0 { objective[c] / max_c } else { 0.0 },
                current_values[c] / scale,
                incumbent_values[c] / scale,
            ]
        })
        .collect();

    let vehicles = model.vars.vehicles().to_vec();
    let vehicle_features = vehicles
        .iter()
        .map(|&k| match current.route(k) {
            Some(r) if !r.visits.is_empty() => {
                let d = route_distance(instance, &r.visits);
                let cost = if current.objective > 0.0 { d / current.objective } else { 0.0 };
                [1.0, 0.0, cost]
            }
            _ => [0.0, 1.0, 0.0],
        })
        .collect();
    let vehicle_membership = vehicles.iter().map(|&k| model.vars.vehicle_binaries(k).collect()).collect();

    BipartiteState { constraint_features, variable_features, edges, vehicle_features, vehicle_membership, vehicles }
}
