//! Fixtures shared by the benchmarks.

use agh_lns::experiment::constructible_instances;
use agh_lns::{build_model, initial_solution, Instance, MilpModel, Preset, Solution};

pub struct Fixture {
    pub instance: Instance,
    pub model: MilpModel,
    pub initial: Solution,
}

/// First constructible instance of a preset.
pub fn fixture(preset: Preset) -> Fixture {
    let (_, instance) = constructible_instances(&preset.generator(), 1, 0)
        .expect("preset instances are constructible")
        .remove(0);
    let model = build_model(&instance);
    let initial = initial_solution(&instance).expect("checked constructible");
    Fixture { instance, model, initial }
}
