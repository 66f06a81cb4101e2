//! Large neighborhood search with learned destroy policies for multi-fleet
//! airport ground handling vehicle routing.

pub mod deploy;
pub mod destroy;
pub mod experiment;
pub mod features;
pub mod instance;
pub mod lns;
pub mod milp;
pub mod nn;
pub mod repair;
pub mod solution;
pub mod training;

pub use deploy::{Deployment, PolicyDestroy};
pub use experiment::{primal_gap, run_experiment, vehicle_utilization, ExperimentConfig, Preset};
pub use features::{featurize, BipartiteState};
pub use instance::{generate, GeneratorConfig, Instance, InstanceError};
pub use lns::{run_lns, DestroyOperator, LnsConfig, LnsOutcome, LnsTrace, RepairFailure, RepairOperator};
pub use milp::{build_model, MilpModel, VarMap};
pub use nn::{policy_forward, PolicyDims, PolicyParams};
pub use repair::{ExactOracle, ExternalSolver, Matheuristic};
pub use solution::{check_feasible, initial_solution, Solution, VehicleKey};
pub use training::{forward_train, TrainConfig, TrainingInstance};
