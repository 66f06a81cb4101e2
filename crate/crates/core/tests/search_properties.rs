mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use agh_lns::destroy::{RandomDestroy, VehicleRandom, VehicleRandomSampleA, VehicleRandomSampleD, VehicleWorst, VehicleWorstRandom};
use agh_lns::lns::{LnsContext, LnsError};
use agh_lns::{
    build_model, check_feasible, generate, initial_solution, run_lns, DestroyOperator, ExactOracle, GeneratorConfig,
    LnsConfig, Matheuristic, RepairFailure, RepairOperator, Solution,
};

struct AlwaysFails {
    fatal: bool,
}

impl RepairOperator for AlwaysFails {
    fn repair(&mut self, _: &LnsContext<'_>, _: &BTreeSet<usize>, _: Duration) -> Result<Solution, RepairFailure> {
        if self.fatal {
            Err(RepairFailure::DecodedInfeasible("test".into()))
        } else {
            Err(RepairFailure::Timeout)
        }
    }

    fn name(&self) -> &str {
        "always-fails"
    }
}

fn operators() -> Vec<Box<dyn DestroyOperator>> {
    vec![
        Box::new(RandomDestroy),
        Box::new(VehicleRandom),
        Box::new(VehicleWorst),
        Box::new(VehicleWorstRandom),
        Box::new(VehicleRandomSampleA { low: 0.2, high: 0.7 }),
        Box::new(VehicleRandomSampleD::default()),
    ]
}

fn config(seed: u64) -> LnsConfig {
    LnsConfig { iterations: 8, destroy_degree: 0.4, seed, ..Default::default() }
}

fn trace_without_time(outcome: &agh_lns::LnsOutcome) -> String {
    let mut buf = Vec::new();
    outcome.trace.write_csv(&mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.remove(1);
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn traces_are_monotone_and_reproducible() {
    for seed in 0..4u64 {
        let inst = generate(&GeneratorConfig::new(6, 3), 40 + seed).unwrap();
        let Ok(init) = initial_solution(&inst) else { continue };
        let model = build_model(&inst);
        for (mut a, mut b) in operators().into_iter().zip(operators()) {
            let first = run_lns(&inst, &model, &init, a.as_mut(), &mut Matheuristic, &config(seed)).unwrap();
            let second = run_lns(&inst, &model, &init, b.as_mut(), &mut Matheuristic, &config(seed)).unwrap();
            let curve = first.trace.incumbent_curve();
            assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{}: {curve:?}", a.name());
            assert_eq!(trace_without_time(&first), trace_without_time(&second), "{}", a.name());
            assert!(check_feasible(&inst, &first.best).is_empty());
            assert!(first.best.objective <= init.objective);
        }
    }
}

#[test]
fn failing_repair_keeps_the_start() {
    let inst = generate(&GeneratorConfig::new(5, 2), 3).unwrap();
    let init = initial_solution(&inst).unwrap();
    let model = build_model(&inst);
    let out = run_lns(&inst, &model, &init, &mut VehicleRandom, &mut AlwaysFails { fatal: false }, &config(1)).unwrap();
    assert_eq!(out.best, init);
    assert_eq!(out.trace.records.len(), 8);
    assert!(out.trace.records.iter().all(|r| r.objective.is_none() && !r.accepted));
}

#[test]
fn fatal_repair_failure_stops_the_search() {
    let inst = generate(&GeneratorConfig::new(5, 2), 3).unwrap();
    let init = initial_solution(&inst).unwrap();
    let model = build_model(&inst);
    let err = run_lns(&inst, &model, &init, &mut VehicleRandom, &mut AlwaysFails { fatal: true }, &config(1)).unwrap_err();
    assert!(matches!(err, LnsError::Repair(RepairFailure::DecodedInfeasible(_))));
}

#[test]
fn empty_instance_runs() {
    let inst = generate(&GeneratorConfig::new(0, 3), 1).unwrap();
    let init = initial_solution(&inst).unwrap();
    assert_eq!(init.objective, 0.0);
    let model = build_model(&inst);
    let out = run_lns(&inst, &model, &init, &mut VehicleRandom, &mut Matheuristic, &config(0)).unwrap();
    assert_eq!(out.best.objective, 0.0);
    assert!(out.trace.incumbent_curve().iter().all(|&v| v == 0.0));
}

#[test]
fn infeasible_start_is_rejected() {
    let inst = generate(&GeneratorConfig::new(4, 2), 5).unwrap();
    let model = build_model(&inst);
    let empty = Solution::empty(&inst);
    let err = run_lns(&inst, &model, &empty, &mut VehicleRandom, &mut Matheuristic, &config(0)).unwrap_err();
    assert!(matches!(err, LnsError::InfeasibleStart(_)));
}

#[test]
fn exact_oracle_matches_brute_force() {
    for inst in common::tiny_instances(6, 11) {
        let init = initial_solution(&inst).unwrap();
        let model = build_model(&inst);
        let all: BTreeSet<usize> = (0..model.vars.num_binaries()).collect();
        let values = agh_lns::milp::encode_solution(&model, &inst, &init);
        let ctx = LnsContext {
            instance: &inst,
            model: &model,
            current: &init,
            current_values: &values,
            incumbent: &init,
            incumbent_values: &values,
        };
        let repaired = ExactOracle.repair(&ctx, &all, Duration::from_secs(1)).unwrap();
        assert!(check_feasible(&inst, &repaired).is_empty());
        assert_eq!(Some(repaired.objective), common::brute_force_single_vehicle(&inst));
    }
}
