mod common;

use agh_lns::milp::{check_assignment, encode_solution, RowFamily, Sense};
use agh_lns::solution::{schedule_earliest, Route};
use agh_lns::{build_model, check_feasible, generate, initial_solution, GeneratorConfig, Instance, Solution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_instance(seed: u64) -> Option<(Instance, Solution)> {
    let inst = generate(&GeneratorConfig::new(4, 3), seed).ok()?;
    let sol = initial_solution(&inst).ok()?;
    Some((inst, sol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The big-M rows hold exactly when the product form does, for any
    /// binaries and start times inside their windows.
    #[test]
    fn big_m_rows_match_product_form(seed in 0u64..500, draw in any::<u64>()) {
        let inst = generate(&GeneratorConfig::new(3, 2).with_vehicles(2), seed).unwrap();
        let model = build_model(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let values: Vec<f64> = (0..model.num_vars())
            .map(|c| {
                if model.vars.is_binary(c) {
                    f64::from(u8::from(rng.random_bool(0.5)))
                } else {
                    let (lo, hi) = model.bounds[c];
                    rng.random_range(lo..=hi)
                }
            })
            .collect();
        for row in model.rows.iter() {
            let RowFamily::TimeLink { from, to, vehicle, fleet } = row.family else { continue };
            let key = agh_lns::VehicleKey::new(fleet, vehicle);
            let (fi, fj) = (from - 1, to - 1);
            let x = values[model.vars.arc(key, from, to)];
            let lhs = values[model.vars.start(key, fi)] + inst.service(fi, fleet)
                + inst.flight_distance(fi, fj) / inst.fleets[fleet].speed
                - values[model.vars.start(key, fj)];
            let product_ok = x * lhs <= 1e-6;
            let big_m_ok = row.activity(&values) <= row.rhs + 1e-6;
            prop_assert_eq!(row.sense, Sense::Le);
            prop_assert_eq!(product_ok, big_m_ok, "row {}", row.family.name());
        }
    }

    /// The route checker and the row checker agree on perturbed solutions.
    #[test]
    fn checkers_agree(seed in 0u64..300, draw in any::<u64>()) {
        let Some((inst, sol)) = small_instance(seed) else { return Ok(()) };
        let model = build_model(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let mut routes = sol.routes.clone();
        let mut times = sol.start_times.clone();
        match rng.random_range(0..3) {
            // move a visit to another vehicle of the same fleet
            0 => {
                let r = rng.random_range(0..routes.len());
                let fleet = routes[r].fleet;
                let target = rng.random_range(0..inst.fleets[fleet].vehicle_count);
                let pos = rng.random_range(0..routes[r].visits.len());
                let f = routes[r].visits.remove(pos);
                match routes.iter_mut().find(|q| q.fleet == fleet && q.vehicle == target) {
                    Some(q) => {
                        let at = rng.random_range(0..=q.visits.len());
                        q.visits.insert(at, f);
                    }
                    None => routes.push(Route { fleet, vehicle: target, visits: vec![f] }),
                }
            }
            // shift one start time
            1 => {
                let f = rng.random_range(0..inst.num_flights());
                let k = rng.random_range(0..inst.num_fleets());
                let t = times.get(f, k).unwrap();
                times.set(f, k, t + rng.random_range(-30.0..30.0));
            }
            _ => {}
        }
        let perturbed = Solution::new(&inst, routes, times);
        let routes_ok = check_feasible(&inst, &perturbed).is_empty();
        let values = encode_solution(&model, &inst, &perturbed);
        let rows_ok = check_assignment(&model, &values).unwrap().is_empty();
        prop_assert_eq!(routes_ok, rows_ok);
    }

    /// Every earliest start sits on a lower bound: its window opening, its
    /// route predecessor or a precedence predecessor.
    #[test]
    fn earliest_starts_are_tight(seed in 0u64..300) {
        let Some((inst, sol)) = small_instance(seed) else { return Ok(()) };
        let plan = sol.plan(&inst);
        let times = schedule_earliest(&inst, &plan).unwrap();
        for r in &sol.routes {
            for (pos, &f) in r.visits.iter().enumerate() {
                let k = r.fleet;
                let t = times.get(f, k).unwrap();
                let mut bounds = vec![inst.window(f, k).earliest];
                if pos > 0 {
                    let p = r.visits[pos - 1];
                    bounds.push(times.get(p, k).unwrap() + inst.service(p, k) + inst.flight_travel(k, p, f));
                }
                for &(before, after) in inst.flight_precedence(f) {
                    if after == k {
                        bounds.push(times.get(f, before).unwrap() + inst.service(f, before));
                    }
                }
                let lower = bounds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((t - lower).abs() <= 1e-6, "flight {} fleet {}: {} vs {}", f, k, t, lower);
            }
        }
    }
}

#[test]
fn brute_force_never_exceeds_construction() {
    for inst in common::tiny_instances(6, 70) {
        let best = common::brute_force_single_vehicle(&inst).expect("initial solution exists");
        let init = initial_solution(&inst).unwrap();
        assert!(best <= init.objective + 1e-9);
    }
}
