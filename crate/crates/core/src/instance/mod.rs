//! Problem instances for multi-fleet airport ground handling routing.
//!
//! Node numbering follows the routing graph: node `0` is the start depot,
//! nodes `1..=n` are flights (flight `f` lives at node `f + 1`) and node
//! `n + 1` is the end depot. Both depot nodes share `depot_position`.

mod catalog;
mod generator;

pub use catalog::{precedence_edges, OpKind, OPERATION_CATALOG};
pub use generator::{generate, GeneratorConfig, Interval, OperationSpec};

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current version of the instance file layout.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("unknown fleet {0}")]
    UnknownFleet(usize),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0} is not an edge")]
    SelfLoop(NodeId),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid instance at `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unsupported instance format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AircraftType {
    T1,
    T2,
    T3,
}

impl AircraftType {
    pub const ALL: [AircraftType; 3] = [AircraftType::T1, AircraftType::T2, AircraftType::T3];
}

impl fmt::Display for AircraftType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Service window `[earliest, latest]` for the start of an operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct TimeWindow {
    pub earliest: f64,
    pub latest: f64,
}

impl TimeWindow {
    pub fn new(earliest: f64, latest: f64) -> Self {
        Self { earliest, latest }
    }

    pub fn contains(&self, t: f64, tol: f64) -> bool {
        t >= self.earliest - tol && t <= self.latest + tol
    }
}

impl From<(f64, f64)> for TimeWindow {
    fn from((a, b): (f64, f64)) -> Self {
        Self::new(a, b)
    }
}

impl From<TimeWindow> for (f64, f64) {
    fn from(w: TimeWindow) -> Self {
        (w.earliest, w.latest)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub flight_id: usize,
    pub gate_position: Point,
    /// Minutes from the start of the planning horizon.
    pub arrival: f64,
    pub turnaround: f64,
    pub aircraft_type: AircraftType,
    /// Demand per operation, indexed by op id.
    pub demand: Vec<u32>,
}

/// One fleet of homogeneous vehicles performing a single operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    /// Equal to the op id this fleet performs.
    pub fleet_id: usize,
    pub name: String,
    pub vehicle_count: usize,
    pub capacity: u32,
    /// Distance units per minute.
    pub speed: f64,
    /// Service duration per flight, indexed by flight id.
    pub service_durations: Vec<f64>,
    /// Time window per flight, indexed by flight id.
    pub time_windows: Vec<TimeWindow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecedenceRule {
    pub aircraft_type: AircraftType,
    /// `(before, after)` op pairs; `before` must finish before `after` starts.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub flights: Vec<Flight>,
    pub fleets: Vec<Fleet>,
    pub precedence: Vec<PrecedenceRule>,
    pub depot_position: Point,
    pub rng_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format_version: u32,
    #[serde(flatten)]
    instance: Instance,
}

impl Instance {
    pub fn num_flights(&self) -> usize {
        self.flights.len()
    }

    pub fn num_fleets(&self) -> usize {
        self.fleets.len()
    }

    /// Number of routing nodes, `n + 2`.
    pub fn num_nodes(&self) -> usize {
        self.flights.len() + 2
    }

    pub fn end_depot(&self) -> NodeId {
        self.flights.len() + 1
    }

    pub fn total_vehicles(&self) -> usize {
        self.fleets.iter().map(|f| f.vehicle_count).sum()
    }

    #[inline]
    pub fn flight_node(flight: usize) -> NodeId {
        flight + 1
    }

    /// Flight id for a node, `None` for either depot.
    #[inline]
    pub fn node_flight(&self, node: NodeId) -> Option<usize> {
        (node >= 1 && node <= self.flights.len()).then(|| node - 1)
    }

    #[inline]
    pub fn position(&self, node: NodeId) -> Point {
        match self.node_flight(node) {
            Some(f) => self.flights[f].gate_position,
            None => self.depot_position,
        }
    }

    /// Arc cost `c_ij`, the Euclidean distance between node positions.
    #[inline]
    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        self.position(i).distance(&self.position(j))
    }

    /// Distance between two flights.
    #[inline]
    pub fn flight_distance(&self, a: usize, b: usize) -> f64 {
        self.flights[a]
            .gate_position
            .distance(&self.flights[b].gate_position)
    }

    /// Unchecked travel time between flights for a fleet.
    #[inline]
    pub fn flight_travel(&self, fleet: usize, a: usize, b: usize) -> f64 {
        self.flight_distance(a, b) / self.fleets[fleet].speed
    }

    /// Travel time `t_ij^k` between two routing nodes.
    pub fn travel_time(&self, fleet: usize, i: NodeId, j: NodeId) -> Result<f64, InstanceError> {
        let fl = self.fleets.get(fleet).ok_or(InstanceError::UnknownFleet(fleet))?;
        for node in [i, j] {
            if node >= self.num_nodes() {
                return Err(InstanceError::UnknownNode(node));
            }
        }
        if i == j {
            return Err(InstanceError::SelfLoop(i));
        }
        Ok(self.distance(i, j) / fl.speed)
    }

    pub fn demand(&self, flight: usize, fleet: usize) -> u32 {
        self.flights[flight].demand[fleet]
    }

    pub fn service(&self, flight: usize, fleet: usize) -> f64 {
        self.fleets[fleet].service_durations[flight]
    }

    pub fn window(&self, flight: usize, fleet: usize) -> TimeWindow {
        self.fleets[fleet].time_windows[flight]
    }

    pub fn precedence_for(&self, ty: AircraftType) -> &[(usize, usize)] {
        self.precedence
            .iter()
            .find(|r| r.aircraft_type == ty)
            .map(|r| r.edges.as_slice())
            .unwrap_or(&[])
    }

    /// Precedence pairs that apply to a given flight.
    pub fn flight_precedence(&self, flight: usize) -> &[(usize, usize)] {
        self.precedence_for(self.flights[flight].aircraft_type)
    }

    /// Fleets ordered so that every precedence predecessor (over all aircraft
    /// types) comes first. Ties go to the lower fleet id.
    pub fn fleet_order(&self) -> Vec<usize> {
        let k = self.num_fleets();
        let mut indeg = vec![0usize; k];
        let mut succ = vec![Vec::new(); k];
        for rule in &self.precedence {
            for &(a, b) in &rule.edges {
                if !succ[a].contains(&b) {
                    succ[a].push(b);
                    indeg[b] += 1;
                }
            }
        }
        let mut order = Vec::with_capacity(k);
        let mut ready: std::collections::BTreeSet<usize> =
            (0..k).filter(|&f| indeg[f] == 0).collect();
        while let Some(f) = ready.pop_first() {
            order.push(f);
            for &s in &succ[f] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        // The merged relation of valid instances is acyclic; fall back to id
        // order for anything left over.
        for f in 0..k {
            if !order.contains(&f) {
                order.push(f);
            }
        }
        order
    }

    /// Checks every structural invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.flights.len();
        let k = self.fleets.len();
        if !(self.depot_position.x.is_finite() && self.depot_position.y.is_finite()) {
            return Err(invalid("depot_position", "non-finite coordinate"));
        }
        for (idx, f) in self.flights.iter().enumerate() {
            let field = format!("flights[{idx}]");
            if f.flight_id != idx {
                return Err(invalid(
                    format!("{field}.flight_id"),
                    format!("expected {idx}, found {}", f.flight_id),
                ));
            }
            if f.demand.len() != k {
                return Err(invalid(
                    format!("{field}.demand"),
                    format!(
                        "has {} entries but {k} operations are declared",
                        f.demand.len()
                    ),
                ));
            }
            if !(f.arrival.is_finite() && f.turnaround.is_finite() && f.turnaround >= 0.0) {
                return Err(invalid(field, "arrival/turnaround must be finite"));
            }
            if !(f.gate_position.x.is_finite() && f.gate_position.y.is_finite()) {
                return Err(invalid(format!("{field}.gate_position"), "non-finite coordinate"));
            }
        }
        for (idx, fl) in self.fleets.iter().enumerate() {
            let field = format!("fleets[{idx}]");
            if fl.fleet_id != idx {
                return Err(invalid(
                    format!("{field}.fleet_id"),
                    format!("expected {idx}, found {}", fl.fleet_id),
                ));
            }
            if fl.vehicle_count == 0 {
                return Err(invalid(format!("{field}.vehicle_count"), "must be at least 1"));
            }
            if !(fl.speed > 0.0 && fl.speed.is_finite()) {
                return Err(invalid(format!("{field}.speed"), "must be positive"));
            }
            if fl.service_durations.len() != n {
                return Err(invalid(
                    format!("{field}.service_durations"),
                    format!("expected {n} entries, found {}", fl.service_durations.len()),
                ));
            }
            if fl.time_windows.len() != n {
                return Err(invalid(
                    format!("{field}.time_windows"),
                    format!("expected {n} entries, found {}", fl.time_windows.len()),
                ));
            }
            for (i, s) in fl.service_durations.iter().enumerate() {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(invalid(
                        format!("{field}.service_durations[{i}]"),
                        "must be non-negative",
                    ));
                }
            }
            for (i, w) in fl.time_windows.iter().enumerate() {
                if !(w.earliest.is_finite() && w.latest.is_finite()) {
                    return Err(invalid(format!("{field}.time_windows[{i}]"), "non-finite bound"));
                }
                if w.earliest > w.latest {
                    return Err(invalid(
                        format!("{field}.time_windows[{i}]"),
                        format!("inverted time window [{}, {}]", w.earliest, w.latest),
                    ));
                }
            }
            let max_demand = self.flights.iter().map(|f| f.demand[idx]).max().unwrap_or(0);
            if fl.capacity < max_demand {
                return Err(invalid(
                    format!("{field}.capacity"),
                    format!("capacity {} below single demand {max_demand}", fl.capacity),
                ));
            }
        }
        let mut seen = Vec::new();
        for (idx, rule) in self.precedence.iter().enumerate() {
            let field = format!("precedence[{idx}]");
            if seen.contains(&rule.aircraft_type) {
                return Err(invalid(field, "duplicate rule for aircraft type"));
            }
            seen.push(rule.aircraft_type);
            for (e, &(a, b)) in rule.edges.iter().enumerate() {
                if a >= k || b >= k {
                    return Err(invalid(
                        format!("{field}.edges[{e}]"),
                        format!("references undeclared op_id ({a}, {b})"),
                    ));
                }
                if a == b {
                    return Err(invalid(format!("{field}.edges[{e}]"), "self precedence"));
                }
            }
            if catalog::topological_order(k, &rule.edges).is_none() {
                return Err(invalid(field, "precedence relation contains a cycle"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format_version: INSTANCE_FORMAT_VERSION,
            instance: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.format_version != INSTANCE_FORMAT_VERSION {
            return Err(InstanceError::Version(file.format_version));
        }
        file.instance.validate()?;
        Ok(file.instance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two flights on a line, two fleets `0 ≺ 1`, one vehicle each.
    pub(crate) fn d1() -> Instance {
        let flights = vec![
            Flight {
                flight_id: 0,
                gate_position: Point::new(10.0, 0.0),
                arrival: 0.0,
                turnaround: 1000.0,
                aircraft_type: AircraftType::T1,
                demand: vec![10, 10],
            },
            Flight {
                flight_id: 1,
                gate_position: Point::new(20.0, 0.0),
                arrival: 0.0,
                turnaround: 1000.0,
                aircraft_type: AircraftType::T1,
                demand: vec![10, 10],
            },
        ];
        let fleet = |id: usize, name: &str| Fleet {
            fleet_id: id,
            name: name.into(),
            vehicle_count: 1,
            capacity: 100,
            speed: 1.0,
            service_durations: vec![5.0, 5.0],
            time_windows: vec![TimeWindow::new(0.0, 1000.0); 2],
        };
        Instance {
            flights,
            fleets: vec![fleet(0, "A"), fleet(1, "B")],
            precedence: vec![PrecedenceRule {
                aircraft_type: AircraftType::T1,
                edges: vec![(0, 1)],
            }],
            depot_position: Point::new(0.0, 0.0),
            rng_seed: 0,
        }
    }

    #[test]
    fn travel_time_is_euclidean_over_speed() {
        let inst = d1();
        assert_eq!(inst.travel_time(0, 0, 1).unwrap(), 10.0);
        assert_eq!(inst.travel_time(0, 1, 2).unwrap(), 10.0);
    }

    #[test]
    fn depot_pair_has_zero_travel() {
        let inst = d1();
        assert_eq!(inst.travel_time(1, 0, inst.end_depot()).unwrap(), 0.0);
    }

    #[test]
    fn travel_time_rejects_bad_lookups() {
        let inst = d1();
        assert!(matches!(inst.travel_time(0, 1, 1), Err(InstanceError::SelfLoop(1))));
        assert!(matches!(inst.travel_time(7, 0, 1), Err(InstanceError::UnknownFleet(7))));
        assert!(matches!(inst.travel_time(0, 0, 9), Err(InstanceError::UnknownNode(9))));
    }

    #[test]
    fn d1_round_trips_through_json() {
        let inst = d1();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d1.json");
        inst.save(&path).unwrap();
        assert_eq!(Instance::load(&path).unwrap(), inst);
    }

    #[test]
    fn inverted_window_is_rejected() {
        let mut inst = d1();
        inst.fleets[1].time_windows[0] = TimeWindow::new(50.0, 10.0);
        let err = Instance::from_json(&inst.to_json()).unwrap_err();
        assert!(err.to_string().contains("inverted time window"), "{err}");
        assert!(err.to_string().contains("fleets[1].time_windows[0]"), "{err}");
    }

    #[test]
    fn undeclared_op_is_rejected() {
        let mut inst = d1();
        inst.precedence[0].edges.push((1, 5));
        let err = Instance::from_json(&inst.to_json()).unwrap_err();
        assert!(err.to_string().contains("undeclared op_id"), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Instance::from_json("{\n \"format_version\": 1,\n \"flights\": [}").unwrap_err();
        match err {
            InstanceError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = d1().to_json().replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(Instance::from_json(&text), Err(InstanceError::Version(7))));
    }

    #[test]
    fn fleet_order_follows_precedence() {
        let mut inst = d1();
        inst.precedence[0].edges = vec![(1, 0)];
        assert_eq!(inst.fleet_order(), vec![1, 0]);
    }
}
