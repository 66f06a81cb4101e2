//! Mixed-integer model of the multi-fleet routing problem: column indexing,
//! objective, sparse rows with big-M time linking, sub-model extraction and
//! LP text exchange.

mod check;
mod encode;
mod lp;

pub use check::{check_assignment, AssignmentViolation};
pub use encode::{decode_assignment, encode_solution, DecodeError};
pub use lp::{export_lp, parse_lp, parse_values, read_lp, write_lp, ValuesFile};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::instance::{Instance, NodeId};
use crate::solution::VehicleKey;

pub const DEFAULT_BIG_M: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("assignment has {got} values, model has {expected} columns")]
    Dimension { expected: usize, got: usize },
    #[error("column {0} is not a route binary and cannot be freed")]
    FreeContinuous(usize),
    #[error("column {0} out of range")]
    UnknownColumn(usize),
    #[error("LP parse error at line {line}: {message}")]
    LpParse { line: usize, message: String },
    #[error("values parse error at line {line}: {message}")]
    ValuesParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Vehicle `vehicle` of `fleet` drives from node `from` to node `to`.
    RouteBinary {
        from: NodeId,
        to: NodeId,
        vehicle: usize,
        fleet: usize,
    },
    /// Start of service at flight node `node` by the given vehicle.
    StartTime {
        node: NodeId,
        vehicle: usize,
        fleet: usize,
    },
}

impl VarKind {
    pub fn vehicle_key(&self) -> VehicleKey {
        match *self {
            VarKind::RouteBinary { vehicle, fleet, .. } | VarKind::StartTime { vehicle, fleet, .. } => {
                VehicleKey::new(fleet, vehicle)
            }
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, VarKind::RouteBinary { .. })
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKind::RouteBinary { from, to, vehicle, fleet } => {
                write!(f, "x_{from}_{to}_{vehicle}_{fleet}")
            }
            VarKind::StartTime { node, vehicle, fleet } => write!(f, "T_{node}_{vehicle}_{fleet}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarIndex {
    pub kind: VarKind,
    pub column: usize,
}

/// Bijection between semantic variables and columns.
///
/// Route binaries come first, one block of `N(N-1)` arcs per vehicle in
/// fleet-major vehicle order (`N = n + 2` nodes, every ordered pair of
/// distinct nodes). Start times follow, `n` per vehicle in the same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarMap {
    flights: usize,
    fleet_offsets: Vec<usize>,
    vehicles: Vec<VehicleKey>,
}

impl VarMap {
    pub fn new(flights: usize, vehicle_counts: &[usize]) -> Self {
        let mut fleet_offsets = Vec::with_capacity(vehicle_counts.len() + 1);
        let mut vehicles = Vec::new();
        let mut acc = 0;
        for (k, &v) in vehicle_counts.iter().enumerate() {
            fleet_offsets.push(acc);
            vehicles.extend((0..v).map(|i| VehicleKey::new(k, i)));
            acc += v;
        }
        fleet_offsets.push(acc);
        Self { flights, fleet_offsets, vehicles }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        let counts: Vec<usize> = instance.fleets.iter().map(|f| f.vehicle_count).collect();
        Self::new(instance.num_flights(), &counts)
    }

    pub fn num_flights(&self) -> usize {
        self.flights
    }

    pub fn num_nodes(&self) -> usize {
        self.flights + 2
    }

    pub fn num_fleets(&self) -> usize {
        self.fleet_offsets.len() - 1
    }

    pub fn vehicle_count(&self, fleet: usize) -> usize {
        self.fleet_offsets[fleet + 1] - self.fleet_offsets[fleet]
    }

    pub fn total_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Vehicles in global order.
    pub fn vehicles(&self) -> &[VehicleKey] {
        &self.vehicles
    }

    pub fn vehicle_index(&self, key: VehicleKey) -> usize {
        self.fleet_offsets[key.fleet] + key.vehicle
    }

    pub fn arcs_per_vehicle(&self) -> usize {
        let nn = self.num_nodes();
        nn * (nn - 1)
    }

    pub fn num_binaries(&self) -> usize {
        self.arcs_per_vehicle() * self.total_vehicles()
    }

    pub fn num_vars(&self) -> usize {
        self.num_binaries() + self.flights * self.total_vehicles()
    }

    pub fn is_binary(&self, column: usize) -> bool {
        column < self.num_binaries()
    }

    /// Column of arc `(i, j)` for a vehicle. Panics on self-loops.
    pub fn arc(&self, key: VehicleKey, i: NodeId, j: NodeId) -> usize {
        assert!(i != j, "no self-loop columns");
        let nn = self.num_nodes();
        let local = i * (nn - 1) + if j < i { j } else { j - 1 };
        self.vehicle_index(key) * self.arcs_per_vehicle() + local
    }

    /// Column of the start time of `flight` (flight id, not node) for a vehicle.
    pub fn start(&self, key: VehicleKey, flight: usize) -> usize {
        self.num_binaries() + self.vehicle_index(key) * self.flights + flight
    }

    /// Contiguous route-binary columns of one vehicle.
    pub fn vehicle_binaries(&self, key: VehicleKey) -> std::ops::Range<usize> {
        let a = self.arcs_per_vehicle();
        let h = self.vehicle_index(key);
        h * a..(h + 1) * a
    }

    pub fn kind(&self, column: usize) -> VarKind {
        let nb = self.num_binaries();
        if column < nb {
            let a = self.arcs_per_vehicle();
            let key = self.vehicles[column / a];
            let local = column % a;
            let nn = self.num_nodes();
            let from = local / (nn - 1);
            let r = local % (nn - 1);
            let to = if r < from { r } else { r + 1 };
            VarKind::RouteBinary { from, to, vehicle: key.vehicle, fleet: key.fleet }
        } else {
            assert!(column < self.num_vars(), "column {column} out of range");
            let rel = column - nb;
            let key = self.vehicles[rel / self.flights];
            VarKind::StartTime {
                node: Instance::flight_node(rel % self.flights),
                vehicle: key.vehicle,
                fleet: key.fleet,
            }
        }
    }

    /// Inverse of [`VarMap::kind`]; `None` for tuples with no column.
    pub fn column(&self, kind: VarKind) -> Option<usize> {
        let nn = self.num_nodes();
        let key = kind.vehicle_key();
        if key.fleet >= self.num_fleets() || key.vehicle >= self.vehicle_count(key.fleet) {
            return None;
        }
        match kind {
            VarKind::RouteBinary { from, to, .. } => {
                (from != to && from < nn && to < nn).then(|| self.arc(key, from, to))
            }
            VarKind::StartTime { node, .. } => {
                (node >= 1 && node <= self.flights).then(|| self.start(key, node - 1))
            }
        }
    }

    pub fn index(&self, column: usize) -> VarIndex {
        VarIndex { kind: self.kind(column), column }
    }

    /// Vehicle owning a column, for binaries and start times alike.
    pub fn owner(&self, column: usize) -> VehicleKey {
        let nb = self.num_binaries();
        if column < nb {
            self.vehicles[column / self.arcs_per_vehicle()]
        } else {
            self.vehicles[(column - nb) / self.flights]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// What a row enforces. Node arguments are routing node ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowFamily {
    /// Each flight entered exactly once per fleet.
    Cover { node: NodeId, fleet: usize },
    /// Inflow equals outflow at a flight node.
    Flow { node: NodeId, vehicle: usize, fleet: usize },
    FleetSize { fleet: usize },
    DepotBalance { fleet: usize },
    NoReturnToStart { fleet: usize },
    NoLeaveEnd { fleet: usize },
    /// Every vehicle leaves the start depot once, possibly straight to the end.
    Departure { vehicle: usize, fleet: usize },
    Capacity { vehicle: usize, fleet: usize },
    /// Big-M form of `x_ij = 1 => T_j >= T_i + s_i + t_ij`.
    TimeLink { from: NodeId, to: NodeId, vehicle: usize, fleet: usize },
    /// Service at `node` by `before` must finish before `after` starts,
    /// enforced only when both vehicles serve the node.
    Precedence { node: NodeId, before: VehicleKey, after: VehicleKey },
}

impl RowFamily {
    /// Deterministic row name, parseable back by [`RowFamily::from_name`].
    pub fn name(&self) -> String {
        match *self {
            RowFamily::Cover { node, fleet } => format!("cover_{node}_{fleet}"),
            RowFamily::Flow { node, vehicle, fleet } => format!("flow_{node}_{vehicle}_{fleet}"),
            RowFamily::FleetSize { fleet } => format!("fleet_{fleet}"),
            RowFamily::DepotBalance { fleet } => format!("balance_{fleet}"),
            RowFamily::NoReturnToStart { fleet } => format!("noreturn_{fleet}"),
            RowFamily::NoLeaveEnd { fleet } => format!("noleave_{fleet}"),
            RowFamily::Departure { vehicle, fleet } => format!("depart_{vehicle}_{fleet}"),
            RowFamily::Capacity { vehicle, fleet } => format!("cap_{vehicle}_{fleet}"),
            RowFamily::TimeLink { from, to, vehicle, fleet } => {
                format!("link_{from}_{to}_{vehicle}_{fleet}")
            }
            RowFamily::Precedence { node, before, after } => format!(
                "prec_{node}_{}_{}_{}_{}",
                before.vehicle, before.fleet, after.vehicle, after.fleet
            ),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let mut parts = name.split('_');
        let tag = parts.next()?;
        let nums: Vec<usize> = parts.map(str::parse).collect::<Result<_, _>>().ok()?;
        let family = match (tag, nums.as_slice()) {
            ("cover", &[node, fleet]) => RowFamily::Cover { node, fleet },
            ("flow", &[node, vehicle, fleet]) => RowFamily::Flow { node, vehicle, fleet },
            ("fleet", &[fleet]) => RowFamily::FleetSize { fleet },
            ("balance", &[fleet]) => RowFamily::DepotBalance { fleet },
            ("noreturn", &[fleet]) => RowFamily::NoReturnToStart { fleet },
            ("noleave", &[fleet]) => RowFamily::NoLeaveEnd { fleet },
            ("depart", &[vehicle, fleet]) => RowFamily::Departure { vehicle, fleet },
            ("cap", &[vehicle, fleet]) => RowFamily::Capacity { vehicle, fleet },
            ("link", &[from, to, vehicle, fleet]) => RowFamily::TimeLink { from, to, vehicle, fleet },
            ("prec", &[node, v1, k1, v2, k2]) => RowFamily::Precedence {
                node,
                before: VehicleKey::new(k1, v1),
                after: VehicleKey::new(k2, v2),
            },
            _ => return None,
        };
        Some(family)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub family: RowFamily,
    /// `(column, coefficient)` pairs with distinct columns in ascending order.
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefs.iter().map(|&(c, a)| a * values[c]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.coefs.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpModel {
    pub vars: VarMap,
    /// Nonzero objective coefficients, ascending by column.
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    pub bounds: Vec<(f64, f64)>,
    pub integrality: Vec<bool>,
    pub big_m: f64,
}

impl MilpModel {
    pub fn num_vars(&self) -> usize {
        self.vars.num_vars()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, a)| a * values[c]).sum()
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars()];
        for &(j, a) in &self.objective {
            c[j] = a;
        }
        c
    }
}

pub fn build_model(instance: &Instance) -> MilpModel {
    build_model_with(instance, DEFAULT_BIG_M)
}

pub fn build_model_with(instance: &Instance, big_m: f64) -> MilpModel {
    let map = VarMap::for_instance(instance);
    let vars = &map;
    let n = instance.num_flights();
    let nn = vars.num_nodes();
    let end = nn - 1;
    let nv = vars.num_vars();
    let flights = || 1..=n;

    let mut objective = Vec::new();
    for &key in vars.vehicles() {
        for i in 0..nn {
            for j in (0..nn).filter(|&j| j != i) {
                let c = instance.distance(i, j);
                if c != 0.0 {
                    objective.push((vars.arc(key, i, j), c));
                }
            }
        }
    }

    let mut bounds = vec![(0.0, 1.0); vars.num_binaries()];
    let mut integrality = vec![true; vars.num_binaries()];
    for &key in vars.vehicles() {
        for f in 0..n {
            let w = instance.window(f, key.fleet);
            bounds.push((w.earliest, w.latest));
            integrality.push(false);
        }
    }
    debug_assert_eq!(bounds.len(), nv);

    let mut rows = Vec::new();
    let mut push = |family, mut coefs: Vec<(usize, f64)>, sense, rhs| {
        coefs.sort_by_key(|&(c, _)| c);
        rows.push(Row { family, coefs, sense, rhs });
    };
    let fleet_vehicles = |k: usize| vars.vehicles().iter().copied().filter(move |key| key.fleet == k);

    for k in 0..instance.num_fleets() {
        for j in flights() {
            let coefs = fleet_vehicles(k)
                .flat_map(|key| (0..nn).filter(move |&i| i != j).map(move |i| (vars.arc(key, i, j), 1.0)))
                .collect();
            push(RowFamily::Cover { node: j, fleet: k }, coefs, Sense::Eq, 1.0);
        }
    }
    for &key in vars.vehicles() {
        for u in flights() {
            let mut coefs: Vec<(usize, f64)> =
                (0..end).filter(|&i| i != u).map(|i| (vars.arc(key, i, u), 1.0)).collect();
            coefs.extend((1..nn).filter(|&j| j != u).map(|j| (vars.arc(key, u, j), -1.0)));
            push(
                RowFamily::Flow { node: u, vehicle: key.vehicle, fleet: key.fleet },
                coefs,
                Sense::Eq,
                0.0,
            );
        }
    }
    for k in 0..instance.num_fleets() {
        let out_of_start: Vec<(usize, f64)> = fleet_vehicles(k)
            .flat_map(|key| flights().map(move |j| (vars.arc(key, 0, j), 1.0)))
            .collect();
        push(
            RowFamily::FleetSize { fleet: k },
            out_of_start.clone(),
            Sense::Le,
            vars.vehicle_count(k) as f64,
        );
        let mut balance = out_of_start;
        balance.extend(fleet_vehicles(k).flat_map(|key| flights().map(move |i| (vars.arc(key, i, end), -1.0))));
        push(RowFamily::DepotBalance { fleet: k }, balance, Sense::Eq, 0.0);
        let into_start = fleet_vehicles(k)
            .flat_map(|key| (1..nn).map(move |i| (vars.arc(key, i, 0), 1.0)))
            .collect();
        push(RowFamily::NoReturnToStart { fleet: k }, into_start, Sense::Eq, 0.0);
        let out_of_end = fleet_vehicles(k)
            .flat_map(|key| (0..end).map(move |j| (vars.arc(key, end, j), 1.0)))
            .collect();
        push(RowFamily::NoLeaveEnd { fleet: k }, out_of_end, Sense::Eq, 0.0);
    }
    for &key in vars.vehicles() {
        let coefs = (1..nn).map(|j| (vars.arc(key, 0, j), 1.0)).collect();
        push(
            RowFamily::Departure { vehicle: key.vehicle, fleet: key.fleet },
            coefs,
            Sense::Eq,
            1.0,
        );
    }
    for &key in vars.vehicles() {
        let mut coefs = Vec::new();
        for i in flights() {
            let q = instance.demand(i - 1, key.fleet) as f64;
            if q != 0.0 {
                coefs.extend((0..nn).filter(|&j| j != i).map(|j| (vars.arc(key, i, j), q)));
            }
        }
        push(
            RowFamily::Capacity { vehicle: key.vehicle, fleet: key.fleet },
            coefs,
            Sense::Le,
            instance.fleets[key.fleet].capacity as f64,
        );
    }
    for &key in vars.vehicles() {
        let k = key.fleet;
        for i in flights() {
            for j in flights().filter(|&j| j != i) {
                let (fi, fj) = (i - 1, j - 1);
                let rhs = big_m - instance.service(fi, k) - instance.flight_travel(k, fi, fj);
                push(
                    RowFamily::TimeLink { from: i, to: j, vehicle: key.vehicle, fleet: k },
                    vec![
                        (vars.start(key, fi), 1.0),
                        (vars.start(key, fj), -1.0),
                        (vars.arc(key, i, j), big_m),
                    ],
                    Sense::Le,
                    rhs,
                );
            }
        }
    }
    for i in flights() {
        let f = i - 1;
        for &(k1, k2) in instance.flight_precedence(f) {
            for b in fleet_vehicles(k1) {
                for a in fleet_vehicles(k2) {
                    let mut coefs = vec![(vars.start(b, f), 1.0), (vars.start(a, f), -1.0)];
                    coefs.extend((1..nn).filter(|&j| j != i).map(|j| (vars.arc(b, i, j), big_m)));
                    coefs.extend((1..nn).filter(|&j| j != i).map(|j| (vars.arc(a, i, j), big_m)));
                    push(
                        RowFamily::Precedence { node: i, before: b, after: a },
                        coefs,
                        Sense::Le,
                        2.0 * big_m - instance.service(f, k1),
                    );
                }
            }
        }
    }

    MilpModel { vars: map, objective, rows, bounds, integrality, big_m }
}

/// Copy of `model` in which every route binary outside `free` is fixed to its
/// value in `current`. Start times always stay free.
pub fn fix_and_extract(
    model: &MilpModel,
    current: &[f64],
    free: &BTreeSet<usize>,
) -> Result<MilpModel, ModelError> {
    if current.len() != model.num_vars() {
        return Err(ModelError::Dimension { expected: model.num_vars(), got: current.len() });
    }
    if let Some(&c) = free.iter().find(|&&c| !model.vars.is_binary(c)) {
        return Err(if c < model.num_vars() {
            ModelError::FreeContinuous(c)
        } else {
            ModelError::UnknownColumn(c)
        });
    }
    let mut sub = model.clone();
    for c in 0..model.vars.num_binaries() {
        if !free.contains(&c) {
            let v = current[c].round();
            sub.bounds[c] = (v, v);
        }
    }
    Ok(sub)
}

/// Closed-form model size `(rows, columns)` for an instance.
pub fn expected_size(instance: &Instance) -> (usize, usize) {
    let n = instance.num_flights();
    let k = instance.num_fleets();
    let nn = n + 2;
    let total_v = instance.total_vehicles();
    let cols = total_v * (nn * (nn - 1) + n);
    let mut prec = 0;
    for f in 0..n {
        for &(a, b) in instance.flight_precedence(f) {
            prec += instance.fleets[a].vehicle_count * instance.fleets[b].vehicle_count;
        }
    }
    let rows = n * k + n * total_v + 4 * k + 2 * total_v + n * (n.saturating_sub(1)) * total_v + prec;
    (rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::d1;
    use crate::instance::{generate, GeneratorConfig};

    #[test]
    fn d1_column_counts() {
        let m = build_model(&d1());
        assert_eq!(m.vars.num_binaries(), 24);
        assert_eq!(m.num_vars() - m.vars.num_binaries(), 4);
        let (rows, cols) = expected_size(&d1());
        assert_eq!((m.num_rows(), m.num_vars()), (rows, cols));
    }

    #[test]
    fn column_map_is_a_bijection() {
        let inst = generate(&GeneratorConfig::new(4, 3).with_vehicles(2), 3).unwrap();
        let vars = VarMap::for_instance(&inst);
        let mut seen = BTreeSet::new();
        for c in 0..vars.num_vars() {
            let kind = vars.kind(c);
            assert_eq!(vars.column(kind), Some(c));
            assert!(seen.insert(kind));
        }
        // enumerate tuples independently and check they hit every column once
        let nn = vars.num_nodes();
        let mut count = 0;
        for &key in vars.vehicles() {
            for i in 0..nn {
                for j in 0..nn {
                    let kind = VarKind::RouteBinary { from: i, to: j, vehicle: key.vehicle, fleet: key.fleet };
                    match vars.column(kind) {
                        Some(_) => count += 1,
                        None => assert_eq!(i, j),
                    }
                }
            }
        }
        assert_eq!(count, vars.num_binaries());
    }

    #[test]
    fn counts_match_closed_form_on_generated_instances() {
        for (n, k, seed) in [(3, 2, 1), (6, 4, 2), (8, 10, 3)] {
            let inst = generate(&GeneratorConfig::new(n, k).with_vehicles(3), seed).unwrap();
            let m = build_model(&inst);
            assert_eq!((m.num_rows(), m.num_vars()), expected_size(&inst));
        }
    }

    #[test]
    fn objective_only_on_binaries() {
        let m = build_model(&d1());
        assert!(m.objective.iter().all(|&(c, _)| m.vars.is_binary(c)));
        let key = VehicleKey::new(0, 0);
        assert_eq!(m.objective_dense()[m.vars.arc(key, 0, 3)], 0.0);
        assert_eq!(m.objective_dense()[m.vars.arc(key, 1, 2)], 10.0);
    }

    #[test]
    fn start_bounds_are_windows() {
        let m = build_model(&d1());
        let c = m.vars.start(VehicleKey::new(1, 0), 1);
        assert_eq!(m.bounds[c], (0.0, 1000.0));
        assert!(!m.integrality[c]);
    }

    #[test]
    fn time_link_row_matches_big_m_form() {
        let m = build_model(&d1());
        let key = VehicleKey::new(0, 0);
        let row = m
            .rows
            .iter()
            .find(|r| r.family == RowFamily::TimeLink { from: 1, to: 2, vehicle: 0, fleet: 0 })
            .unwrap();
        assert_eq!(row.sense, Sense::Le);
        assert_eq!(row.rhs, 1e6 - 5.0 - 10.0);
        let mut expect = vec![
            (m.vars.start(key, 0), 1.0),
            (m.vars.start(key, 1), -1.0),
            (m.vars.arc(key, 1, 2), 1e6),
        ];
        expect.sort_by_key(|&(c, _)| c);
        assert_eq!(row.coefs, expect);
    }

    #[test]
    fn fixing_counts() {
        let inst = d1();
        let m = build_model(&inst);
        let cur = encode_solution(&m, &inst, &crate::solution::tests::d1_optimal());
        let free: BTreeSet<usize> = m.vars.vehicle_binaries(VehicleKey::new(1, 0)).collect();
        let sub = fix_and_extract(&m, &cur, &free).unwrap();
        let fixed = (0..m.vars.num_binaries()).filter(|&c| sub.bounds[c].0 == sub.bounds[c].1).count();
        assert_eq!((free.len(), fixed), (12, 12));
        assert_eq!(sub.rows, m.rows);

        let all: BTreeSet<usize> = (0..m.vars.num_binaries()).collect();
        assert_eq!(fix_and_extract(&m, &cur, &all).unwrap(), m);

        let none = fix_and_extract(&m, &cur, &BTreeSet::new()).unwrap();
        assert!((0..m.vars.num_binaries()).all(|c| none.bounds[c].0 == none.bounds[c].1));
        assert_eq!(none.bounds[24..], m.bounds[24..]);
    }

    #[test]
    fn freeing_a_start_time_is_rejected() {
        let inst = d1();
        let m = build_model(&inst);
        let cur = vec![0.0; m.num_vars()];
        let free = BTreeSet::from([m.vars.start(VehicleKey::new(0, 0), 0)]);
        assert!(matches!(fix_and_extract(&m, &cur, &free), Err(ModelError::FreeContinuous(24))));
    }

    #[test]
    fn row_names_round_trip() {
        let m = build_model(&d1());
        for r in &m.rows {
            assert_eq!(RowFamily::from_name(&r.family.name()), Some(r.family));
        }
    }
}
