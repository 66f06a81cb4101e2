//! Synthetic instance generator.
//!
//! Gates are laid out as three terminals of thirty gates each, east of a
//! single depot. Flights arrive in hourly batches; every operation gets a
//! time window inside the turnaround whose start is offset by the
//! operation's depth in the aircraft type's precedence DAG.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{depths, precedence_edges, OpKind, OPERATION_CATALOG};
use super::{
    AircraftType, Fleet, Flight, Instance, InstanceError, Point, PrecedenceRule, TimeWindow,
};

/// Closed interval `[low, high]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(T, T)", into = "(T, T)")]
pub struct Interval<T: Copy> {
    pub low: T,
    pub high: T,
}

impl<T: Copy> Interval<T> {
    pub const fn new(low: T, high: T) -> Self {
        Self { low, high }
    }
}

impl<T: Copy> From<(T, T)> for Interval<T> {
    fn from((low, high): (T, T)) -> Self {
        Self { low, high }
    }
}

impl<T: Copy> From<Interval<T>> for (T, T) {
    fn from(i: Interval<T>) -> Self {
        (i.low, i.high)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub op_id: usize,
    pub kind: OpKind,
    pub service_duration_range: Interval<f64>,
    pub vehicle_speed: f64,
    pub fleet_size_range: Interval<usize>,
    pub capacity_ratio_range: Interval<f64>,
}

impl OperationSpec {
    pub fn from_kind(op_id: usize, kind: OpKind) -> Self {
        let (lo, hi) = kind.service_minutes();
        Self {
            op_id,
            kind,
            service_duration_range: Interval::new(lo, hi),
            vehicle_speed: kind.speed(),
            fleet_size_range: Interval::new(10, 20),
            capacity_ratio_range: Interval::new(0.7, 0.9),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub flights: usize,
    pub operations: Vec<OperationSpec>,
    pub hourly_arrivals: Interval<u32>,
    pub turnaround: Interval<f64>,
    pub demand: Interval<u32>,
    /// Exact vehicle count for every fleet instead of `fleet_size_range`.
    #[serde(default)]
    pub vehicles_override: Option<usize>,
    pub terminals: usize,
    pub gates_per_terminal: usize,
}

impl GeneratorConfig {
    /// `flights` flights served by the first `ops` operations of the catalog.
    pub fn new(flights: usize, ops: usize) -> Self {
        let operations = OPERATION_CATALOG
            .iter()
            .take(ops.min(OPERATION_CATALOG.len()))
            .enumerate()
            .map(|(i, &k)| OperationSpec::from_kind(i, k))
            .collect();
        Self {
            flights,
            operations,
            hourly_arrivals: Interval::new(5, 25),
            turnaround: Interval::new(30.0, 60.0),
            demand: Interval::new(5, 15),
            vehicles_override: None,
            terminals: 3,
            gates_per_terminal: 30,
        }
    }

    pub fn with_vehicles(mut self, vehicles: usize) -> Self {
        self.vehicles_override = Some(vehicles);
        self
    }

    pub fn with_hourly_arrivals(mut self, low: u32, high: u32) -> Self {
        self.hourly_arrivals = Interval::new(low, high);
        self
    }

    fn validate(&self) -> Result<(), InstanceError> {
        fn check<T: Copy + PartialOrd>(name: &str, i: Interval<T>) -> Result<(), InstanceError> {
            if i.low > i.high {
                return Err(InstanceError::Config(format!("{name}: low > high")));
            }
            Ok(())
        }
        check("hourly_arrivals", self.hourly_arrivals)?;
        check("turnaround", self.turnaround)?;
        check("demand", self.demand)?;
        if self.hourly_arrivals.high == 0 && self.flights > 0 {
            return Err(InstanceError::Config("hourly_arrivals must allow arrivals".into()));
        }
        if self.turnaround.low <= 0.0 {
            return Err(InstanceError::Config("turnaround must be positive".into()));
        }
        if self.demand.low == 0 {
            return Err(InstanceError::Config("demand must be positive".into()));
        }
        if self.terminals == 0 || self.gates_per_terminal == 0 {
            return Err(InstanceError::Config("at least one gate is required".into()));
        }
        if self.vehicles_override == Some(0) {
            return Err(InstanceError::Config("vehicle override must be positive".into()));
        }
        for (i, op) in self.operations.iter().enumerate() {
            let name = format!("operations[{i}]");
            if op.op_id != i {
                return Err(InstanceError::Config(format!("{name}: op_id must equal {i}")));
            }
            check(&format!("{name}.service_duration_range"), op.service_duration_range)?;
            check(&format!("{name}.fleet_size_range"), op.fleet_size_range)?;
            check(&format!("{name}.capacity_ratio_range"), op.capacity_ratio_range)?;
            if op.service_duration_range.low <= 0.0 {
                return Err(InstanceError::Config(format!("{name}: durations must be positive")));
            }
            if !(op.vehicle_speed > 0.0) {
                return Err(InstanceError::Config(format!("{name}: speed must be positive")));
            }
            if op.fleet_size_range.low == 0 && self.vehicles_override.is_none() {
                return Err(InstanceError::Config(format!("{name}: fleet size must be positive")));
            }
            if op.capacity_ratio_range.low <= 0.0 || op.capacity_ratio_range.high > 1.0 {
                return Err(InstanceError::Config(format!(
                    "{name}: capacity ratio must lie in (0, 1]"
                )));
            }
        }
        let mut kinds: Vec<OpKind> = self.operations.iter().map(|o| o.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.operations.len() {
            return Err(InstanceError::Config("operations must be distinct".into()));
        }
        Ok(())
    }
}

fn gate_positions(terminals: usize, per_terminal: usize) -> Vec<Point> {
    let mut gates = Vec::with_capacity(terminals * per_terminal);
    for t in 0..terminals {
        let cx = 1500.0 + 1000.0 * t as f64;
        let rows = per_terminal.div_ceil(2);
        for g in 0..per_terminal {
            let side = if g % 2 == 0 { -120.0 } else { 120.0 };
            let row = (g / 2) as f64 - (rows as f64 - 1.0) / 2.0;
            gates.push(Point::new(cx + side, 60.0 * row));
        }
    }
    gates
}

/// Picks `(vehicles, capacity)` so that `total / (vehicles * capacity)`
/// lands in the ratio interval while one vehicle can always carry the
/// largest single demand. Without an override, the vehicle count shrinks
/// until both hold.
fn size_fleet(
    total: u32,
    max_demand: u32,
    mut vehicles: usize,
    ratio: f64,
    bounds: Interval<f64>,
    fixed_vehicles: bool,
) -> (usize, u32) {
    if total == 0 {
        return (vehicles, max_demand.max(1));
    }
    let total_f = total as f64;
    loop {
        let v = vehicles as f64;
        let mut cap = ((total_f / (v * ratio)).ceil() as u32).max(1);
        if cap > 1
            && total_f / (v * cap as f64) < bounds.low
            && total_f / (v * (cap - 1) as f64) <= bounds.high
        {
            cap -= 1;
        }
        if cap >= max_demand {
            return (vehicles, cap);
        }
        if fixed_vehicles || vehicles == 1 {
            return (vehicles, max_demand);
        }
        vehicles -= 1;
    }
}

/// Generates a random instance. Equal `(config, seed)` always yields an
/// identical instance.
pub fn generate(config: &GeneratorConfig, seed: u64) -> Result<Instance, InstanceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.flights;
    let kinds: Vec<OpKind> = config.operations.iter().map(|o| o.kind).collect();
    let k = kinds.len();

    let gates = gate_positions(config.terminals, config.gates_per_terminal);

    let mut arrivals = Vec::with_capacity(n);
    let mut hour = 0u32;
    while arrivals.len() < n {
        let count = rng.random_range(config.hourly_arrivals.low..=config.hourly_arrivals.high);
        for _ in 0..count {
            if arrivals.len() == n {
                break;
            }
            arrivals.push(60.0 * hour as f64 + rng.random_range(0.0..60.0));
        }
        hour += 1;
    }
    arrivals.sort_by(f64::total_cmp);

    let precedence: Vec<PrecedenceRule> = AircraftType::ALL
        .iter()
        .map(|&ty| PrecedenceRule {
            aircraft_type: ty,
            edges: precedence_edges(&kinds, ty),
        })
        .collect();
    let type_depths: Vec<Vec<usize>> = precedence.iter().map(|r| depths(k, &r.edges)).collect();

    let flights: Vec<Flight> = arrivals
        .iter()
        .enumerate()
        .map(|(id, &arrival)| {
            let gate = gates[rng.random_range(0..gates.len())];
            let turnaround = rng.random_range(config.turnaround.low..=config.turnaround.high);
            let aircraft_type = AircraftType::ALL[rng.random_range(0..3)];
            let demand = (0..k)
                .map(|_| rng.random_range(config.demand.low..=config.demand.high))
                .collect();
            Flight {
                flight_id: id,
                gate_position: gate,
                arrival,
                turnaround,
                aircraft_type,
                demand,
            }
        })
        .collect();

    let mut fleets = Vec::with_capacity(k);
    for (op_id, spec) in config.operations.iter().enumerate() {
        let drawn = match config.vehicles_override {
            Some(v) => v,
            None => rng.random_range(spec.fleet_size_range.low..=spec.fleet_size_range.high),
        };
        let ratio = rng.random_range(spec.capacity_ratio_range.low..=spec.capacity_ratio_range.high);
        let mut service_durations = Vec::with_capacity(n);
        let mut time_windows = Vec::with_capacity(n);
        for f in &flights {
            let ty = AircraftType::ALL
                .iter()
                .position(|&t| t == f.aircraft_type)
                .unwrap();
            let d = &type_depths[ty];
            let levels = d.iter().max().map_or(1, |m| m + 1) as f64;
            let slot = f.turnaround / levels;
            let s = rng
                .random_range(spec.service_duration_range.low..=spec.service_duration_range.high)
                .min(slot);
            let a = f.arrival + f.turnaround * d[op_id] as f64 / levels;
            let b = f.arrival + f.turnaround - s;
            service_durations.push(s);
            time_windows.push(TimeWindow::new(a, b));
        }
        let total: u32 = flights.iter().map(|f| f.demand[op_id]).sum();
        let max_demand = flights.iter().map(|f| f.demand[op_id]).max().unwrap_or(0);
        let (vehicle_count, capacity) = size_fleet(
            total,
            max_demand,
            drawn.max(1),
            ratio,
            spec.capacity_ratio_range,
            config.vehicles_override.is_some(),
        );
        fleets.push(Fleet {
            fleet_id: op_id,
            name: spec.kind.name().to_string(),
            vehicle_count,
            capacity,
            speed: spec.vehicle_speed,
            service_durations,
            time_windows,
        });
    }

    let instance = Instance {
        flights,
        fleets,
        precedence,
        depot_position: Point::new(0.0, 0.0),
        rng_seed: seed,
    };
    debug_assert!(instance.validate().is_ok());
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_flights_still_has_fleets() {
        let inst = generate(&GeneratorConfig::new(0, 4), 3).unwrap();
        assert!(inst.flights.is_empty());
        assert_eq!(inst.fleets.len(), 4);
        assert!(inst.fleets.iter().all(|f| f.vehicle_count >= 1));
    }

    #[test]
    fn demand_to_capacity_ratio_in_range() {
        for seed in 0..200 {
            let inst = generate(&GeneratorConfig::new(20, 10), seed).unwrap();
            for (k, fleet) in inst.fleets.iter().enumerate() {
                let total: u32 = inst.flights.iter().map(|f| f.demand[k]).sum();
                let ratio = total as f64 / (fleet.vehicle_count as f64 * fleet.capacity as f64);
                assert!((0.7..=0.9).contains(&ratio), "seed {seed} fleet {k}: {ratio}");
                assert!(fleet.vehicle_count <= 20);
            }
        }
    }

    #[test]
    fn generated_values_respect_ranges() {
        let inst = generate(&GeneratorConfig::new(40, 10), 11).unwrap();
        for f in &inst.flights {
            assert!((30.0..=60.0).contains(&f.turnaround));
            assert!(f.demand.iter().all(|d| (5..=15).contains(d)));
        }
        inst.validate().unwrap();
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GeneratorConfig::new(15, 5);
        assert_eq!(generate(&cfg, 9).unwrap().to_json(), generate(&cfg, 9).unwrap().to_json());
        assert_ne!(generate(&cfg, 9).unwrap().to_json(), generate(&cfg, 10).unwrap().to_json());
    }

    #[test]
    fn inverted_range_is_a_config_error() {
        let mut cfg = GeneratorConfig::new(5, 3);
        cfg.turnaround = Interval::new(60.0, 30.0);
        assert!(matches!(generate(&cfg, 0), Err(InstanceError::Config(_))));
        let mut cfg = GeneratorConfig::new(5, 3);
        cfg.operations[1].fleet_size_range = Interval::new(5, 2);
        assert!(matches!(generate(&cfg, 0), Err(InstanceError::Config(_))));
    }

    #[test]
    fn vehicle_override_is_exact() {
        let inst = generate(&GeneratorConfig::new(4, 2).with_vehicles(1), 5).unwrap();
        for fleet in &inst.fleets {
            assert_eq!(fleet.vehicle_count, 1);
        }
    }

    #[test]
    fn earliest_starts_leave_room_for_predecessors() {
        // each op fits inside its depth slot, so predecessors started at
        // their window opening finish before the successor's window opens
        let inst = generate(&GeneratorConfig::new(30, 10), 2).unwrap();
        for (i, f) in inst.flights.iter().enumerate() {
            for &(a, b) in inst.precedence_for(f.aircraft_type) {
                let wa = inst.window(i, a);
                let wb = inst.window(i, b);
                assert!(wa.earliest + inst.service(i, a) <= wb.earliest + 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn travel_times_obey_triangle_inequality(seed in 0u64..10_000, n in 2usize..12) {
            let inst = generate(&GeneratorConfig::new(n, 3), seed).unwrap();
            let nodes = inst.num_nodes();
            for k in 0..inst.num_fleets() {
                for i in 0..nodes {
                    for j in 0..nodes {
                        if i == j { continue; }
                        let tij = inst.travel_time(k, i, j).unwrap();
                        prop_assert!((tij - inst.travel_time(k, j, i).unwrap()).abs() < 1e-12);
                        for m in 0..nodes {
                            if m == i || m == j { continue; }
                            let via = inst.travel_time(k, i, m).unwrap() + inst.travel_time(k, m, j).unwrap();
                            prop_assert!(tij <= via + 1e-9);
                        }
                    }
                }
            }
        }
    }
}
