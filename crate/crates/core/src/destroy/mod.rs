//! Heuristic destroy operators. All but [`RandomDestroy`] free whole
//! vehicles: every route binary of each selected `(fleet, vehicle)`.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::instance::Instance;
use crate::lns::{DestroyOperator, LnsContext, LnsRng};
use crate::milp::{MilpModel, VarMap};
use crate::solution::{route_distance, Solution, VehicleKey};

/// Number of vehicles whose columns make up a `degree` share of all route
/// binaries: the ceiling of `degree * total`, never more than `total`.
pub fn vehicles_for_degree(total_vehicles: usize, degree: f64) -> usize {
    // the epsilon keeps exact products like 0.4 * 5 from rounding up
    let raw = (degree * total_vehicles as f64 - 1e-9).ceil();
    (raw.max(0.0) as usize).min(total_vehicles)
}

/// All route-binary columns of the given vehicles.
pub fn vehicle_columns(vars: &VarMap, keys: impl IntoIterator<Item = VehicleKey>) -> BTreeSet<usize> {
    keys.into_iter().flat_map(|k| vars.vehicle_binaries(k)).collect()
}

/// Vehicles that own at least one column of `columns`, in key order.
pub fn vehicles_of(vars: &VarMap, columns: &BTreeSet<usize>) -> BTreeSet<VehicleKey> {
    columns.iter().map(|&c| vars.owner(c)).collect()
}

/// Vehicles whose route binaries are all in `columns`.
pub fn fully_free_vehicles(vars: &VarMap, columns: &BTreeSet<usize>) -> Vec<VehicleKey> {
    vars.vehicles()
        .iter()
        .copied()
        .filter(|&k| vars.vehicle_binaries(k).all(|c| columns.contains(&c)))
        .collect()
}

/// `round(degree * |X|)` binaries sampled uniformly, at least one.
pub fn random_destroy(model: &MilpModel, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
    let total = model.vars.num_binaries();
    let count = ((degree * total as f64).round() as usize).clamp(1, total);
    sample(rng, total, count).into_iter().collect()
}

/// `vehicles_for_degree` vehicles chosen uniformly without replacement.
pub fn vehicle_random(model: &MilpModel, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
    let keys = random_vehicles(&model.vars, vehicles_for_degree(model.vars.total_vehicles(), degree), rng);
    vehicle_columns(&model.vars, keys)
}

fn random_vehicles(vars: &VarMap, count: usize, rng: &mut LnsRng) -> Vec<VehicleKey> {
    let all = vars.vehicles();
    sample(rng, all.len(), count.min(all.len())).into_iter().map(|i| all[i]).collect()
}

/// Longest routes first (ties to lower `(fleet, vehicle)`), padded with
/// unused vehicles in key order when too few are in use.
pub fn vehicle_worst(
    model: &MilpModel,
    instance: &Instance,
    solution: &Solution,
    degree: f64,
) -> BTreeSet<usize> {
    let take = vehicles_for_degree(model.vars.total_vehicles(), degree);
    let ranked = worst_order(model, instance, solution);
    vehicle_columns(&model.vars, ranked.into_iter().take(take))
}

/// Every vehicle, longest route first, ties and unused vehicles in key order.
pub fn worst_order(
    model: &MilpModel,
    instance: &Instance,
    solution: &Solution,
) -> Vec<VehicleKey> {
    let mut used: Vec<(f64, VehicleKey)> = solution
        .routes
        .iter()
        .map(|r| (route_distance(instance, &r.visits), r.key()))
        .collect();
    used.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut order: Vec<VehicleKey> = used.into_iter().map(|(_, k)| k).collect();
    let in_use: BTreeSet<VehicleKey> = order.iter().copied().collect();
    order.extend(model.vars.vehicles().iter().copied().filter(|k| !in_use.contains(k)));
    order
}

/// Half the degree from [`vehicle_random`], half from [`vehicle_worst`].
/// When the two picks overlap, random vehicles top the union back up.
pub fn vehicle_worst_random(
    model: &MilpModel,
    instance: &Instance,
    solution: &Solution,
    degree: f64,
    rng: &mut LnsRng,
) -> BTreeSet<usize> {
    let total = model.vars.total_vehicles();
    let half = vehicles_for_degree(total, degree / 2.0);
    let target = (2 * half).min(total);
    let mut chosen: BTreeSet<VehicleKey> = random_vehicles(&model.vars, half, rng).into_iter().collect();
    chosen.extend(worst_order(model, instance, solution).into_iter().take(half));
    if chosen.len() < target {
        let rest: Vec<VehicleKey> =
            model.vars.vehicles().iter().copied().filter(|k| !chosen.contains(k)).collect();
        let extra = sample(rng, rest.len(), target - chosen.len());
        chosen.extend(extra.into_iter().map(|i| rest[i]));
    }
    vehicle_columns(&model.vars, chosen)
}

/// Degree range for the variable-degree heuristic by instance size.
pub fn sample_a_range(num_flights: usize) -> (f64, f64) {
    match num_flights {
        0..=20 => (0.2, 0.7),
        21..=50 => (0.2, 0.5),
        _ => (0.2, 0.4),
    }
}

/// [`vehicle_random`] with the degree drawn uniformly from `[low, high]`
/// at every call; the degree passed in is ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleRandomSampleA {
    pub low: f64,
    pub high: f64,
}

impl VehicleRandomSampleA {
    pub fn for_instance(instance: &Instance) -> Self {
        let (low, high) = sample_a_range(instance.num_flights());
        Self { low, high }
    }
}

/// [`vehicle_random`] over the vehicles not picked by the previous call. An
/// exhausted pool falls back to every vehicle.
#[derive(Clone, Debug, Default)]
pub struct VehicleRandomSampleD {
    previous: BTreeSet<VehicleKey>,
}

impl DestroyOperator for VehicleRandomSampleA {
    fn select(&mut self, ctx: &LnsContext<'_>, _degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        let degree = if self.high > self.low { rng.random_range(self.low..=self.high) } else { self.low };
        vehicle_random(ctx.model, degree, rng)
    }
    fn name(&self) -> &str {
        "Vehicle-random-sampleA"
    }
}

impl DestroyOperator for VehicleRandomSampleD {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        let vars = &ctx.model.vars;
        let mut pool: Vec<VehicleKey> = vars.vehicles().iter().copied().filter(|k| !self.previous.contains(k)).collect();
        if pool.is_empty() {
            pool = vars.vehicles().to_vec();
        }
        let count = vehicles_for_degree(vars.total_vehicles(), degree).min(pool.len());
        let picked: BTreeSet<VehicleKey> = sample(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
        self.previous = picked.clone();
        vehicle_columns(vars, picked)
    }
    fn name(&self) -> &str {
        "Vehicle-random-sampleD"
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomDestroy;

#[derive(Clone, Copy, Debug, Default)]
pub struct VehicleRandom;

#[derive(Clone, Copy, Debug, Default)]
pub struct VehicleWorst;

#[derive(Clone, Copy, Debug, Default)]
pub struct VehicleWorstRandom;

impl DestroyOperator for RandomDestroy {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        random_destroy(ctx.model, degree, rng)
    }
    fn name(&self) -> &str {
        "Random"
    }
}

impl DestroyOperator for VehicleRandom {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        vehicle_random(ctx.model, degree, rng)
    }
    fn name(&self) -> &str {
        "Vehicle-random"
    }
}

impl DestroyOperator for VehicleWorst {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, _rng: &mut LnsRng) -> BTreeSet<usize> {
        vehicle_worst(ctx.model, ctx.instance, ctx.current, degree)
    }
    fn name(&self) -> &str {
        "Vehicle-worst"
    }
}

impl DestroyOperator for VehicleWorstRandom {
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize> {
        vehicle_worst_random(ctx.model, ctx.instance, ctx.current, degree, rng)
    }
    fn name(&self) -> &str {
        "Vehicle-worst-random"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::d1;
    use crate::instance::{generate, GeneratorConfig};
    use crate::milp::build_model;
    use crate::solution::{initial_solution, Route, StartTimes};
    use rand::SeedableRng;

    #[test]
    fn degree_to_vehicle_count() {
        assert_eq!(vehicles_for_degree(5, 0.4), 2);
        assert_eq!(vehicles_for_degree(5, 0.5), 3);
        assert_eq!(vehicles_for_degree(5, 0.999), 5);
        assert_eq!(vehicles_for_degree(10, 0.2), 2);
        assert_eq!(vehicles_for_degree(5, 1e-12), 0);
    }

    #[test]
    fn random_destroy_size_and_determinism() {
        let m = build_model(&d1());
        let mut a = LnsRng::seed_from_u64(3);
        let mut b = LnsRng::seed_from_u64(3);
        let x = random_destroy(&m, 0.5, &mut a);
        assert_eq!(x.len(), 12);
        assert_eq!(x, random_destroy(&m, 0.5, &mut b));
        assert!(x.iter().all(|&c| m.vars.is_binary(c)));
        assert_eq!(random_destroy(&m, 1e-6, &mut a).len(), 1);
    }

    #[test]
    fn vehicle_random_on_d1() {
        let m = build_model(&d1());
        let mut rng = LnsRng::seed_from_u64(1);
        let x = vehicle_random(&m, 0.5, &mut rng);
        assert_eq!(x.len(), 12);
        assert_eq!(fully_free_vehicles(&m.vars, &x).len(), 1);
        let all = vehicle_random(&m, 0.999, &mut rng);
        assert_eq!(all, (0..24).collect());
    }

    /// Five single-fleet vehicles with route lengths set by `visits`.
    fn five_vehicle_case(visits: &[&[usize]]) -> (Instance, Solution) {
        let mut inst = generate(&GeneratorConfig::new(6, 1).with_vehicles(5), 4).unwrap();
        inst.fleets[0].capacity = 1000;
        let routes = visits
            .iter()
            .enumerate()
            .map(|(v, r)| Route { fleet: 0, vehicle: v, visits: r.to_vec() })
            .collect();
        let s = Solution::new(&inst, routes, StartTimes::empty(6, 1));
        (inst, s)
    }

    #[test]
    fn worst_prefers_long_routes_and_pads_with_unused() {
        let (inst, s) = five_vehicle_case(&[&[0], &[1, 2, 3], &[], &[4, 5], &[]]);
        let m = build_model(&inst);
        let order = worst_order(&m, &inst, &s);
        let d = |v: usize| route_distance(&inst, &s.route(VehicleKey::new(0, v)).unwrap().visits);
        assert!(d(order[0].vehicle) >= d(order[1].vehicle));
        assert_eq!(&order[3..], &[VehicleKey::new(0, 2), VehicleKey::new(0, 4)]);
        let x = vehicle_worst(&m, &inst, &s, 0.999);
        assert_eq!(x.len(), m.vars.num_binaries());
    }

    #[test]
    fn worst_ties_go_to_lower_ids() {
        let (inst, _) = five_vehicle_case(&[]);
        let m = build_model(&inst);
        let empty = Solution::empty(&inst);
        let x = vehicle_worst(&m, &inst, &empty, 0.4);
        assert_eq!(x, vehicle_columns(&m.vars, [VehicleKey::new(0, 0), VehicleKey::new(0, 1)]));
        assert!(vehicle_worst(&m, &inst, &empty, 1e-12).is_empty());
    }

    #[test]
    fn worst_random_split_and_top_up() {
        let inst = generate(&GeneratorConfig::new(3, 2).with_vehicles(5), 2).unwrap();
        let m = build_model(&inst);
        let s = initial_solution(&inst).unwrap();
        assert_eq!(vehicles_for_degree(10, 0.2), 2);
        for seed in 0..50 {
            let mut rng = LnsRng::seed_from_u64(seed);
            let x = vehicle_worst_random(&m, &inst, &s, 0.4, &mut rng);
            // 2 random + 2 worst, topped up whenever they overlap
            assert_eq!(fully_free_vehicles(&m.vars, &x).len(), 4, "seed {seed}");
        }
    }

    #[test]
    fn vehicle_random_is_uniform() {
        let (inst, _) = five_vehicle_case(&[]);
        let m = build_model(&inst);
        let mut rng = LnsRng::seed_from_u64(11);
        let mut hits = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            for k in vehicles_of(&m.vars, &vehicle_random(&m, 0.4, &mut rng)) {
                hits[k.vehicle] += 1;
            }
        }
        for h in hits {
            let freq = h as f64 / draws as f64;
            assert!((freq - 0.4).abs() <= 0.02, "{freq}");
        }
    }

    fn ctx_parts() -> (Instance, MilpModel, Solution, Vec<f64>) {
        let inst = generate(&GeneratorConfig::new(4, 2).with_vehicles(5), 3).unwrap();
        let m = build_model(&inst);
        let s = initial_solution(&inst).unwrap();
        let x = crate::milp::encode_solution(&m, &inst, &s);
        (inst, m, s, x)
    }

    #[test]
    fn sample_d_is_disjoint_between_calls() {
        let (inst, m, s, x) = ctx_parts();
        let ctx = LnsContext { instance: &inst, model: &m, current: &s, current_values: &x, incumbent: &s, incumbent_values: &x };
        let mut op = VehicleRandomSampleD::default();
        let mut rng = LnsRng::seed_from_u64(5);
        let mut prev = fully_free_vehicles(&m.vars, &op.select(&ctx, 0.4, &mut rng));
        assert_eq!(prev.len(), 4);
        for _ in 0..50 {
            let next = fully_free_vehicles(&m.vars, &op.select(&ctx, 0.4, &mut rng));
            assert_eq!(next.len(), 4);
            assert!(next.iter().all(|k| !prev.contains(k)));
            prev = next;
        }
    }

    #[test]
    fn sample_a_degree_stays_in_range() {
        let (inst, m, s, x) = ctx_parts();
        let ctx = LnsContext { instance: &inst, model: &m, current: &s, current_values: &x, incumbent: &s, incumbent_values: &x };
        let mut op = VehicleRandomSampleA::for_instance(&inst);
        assert_eq!((op.low, op.high), (0.2, 0.7));
        let mut rng = LnsRng::seed_from_u64(6);
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            let n = fully_free_vehicles(&m.vars, &op.select(&ctx, 0.9, &mut rng)).len();
            assert!((2..=7).contains(&n), "{n}");
            seen.insert(n);
        }
        assert!(seen.len() >= 4, "{seen:?}");
        assert_eq!(sample_a_range(50), (0.2, 0.5));
        assert_eq!(sample_a_range(100), (0.2, 0.4));
    }
}
