//! Demo collection from Vehicle-random rollouts and forward training of
//! one policy per LNS step.

use std::collections::BTreeSet;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::{Deployment, PolicyDestroy};
use crate::destroy::{fully_free_vehicles, vehicle_columns, VehicleRandom};
use crate::features::{featurize_values, BipartiteState};
use crate::instance::Instance;
use crate::lns::{derive_rng, DestroyOperator, LnsRng, RepairFailure, RepairOperator, SearchState};
use crate::milp::{build_model, MilpModel, VarMap};
use crate::nn::{accumulate_gradients, bce_loss, policy_forward, sgd_step, NnError, PolicyDims, PolicyParams};
use crate::repair::Matheuristic;
use crate::solution::{initial_solution, ConstructionFailed, Solution, VehicleKey};

const IMPROVE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no initial solution for instance {id}: {source}")]
    Construction { id: usize, source: ConstructionFailed },
    #[error(transparent)]
    Network(#[from] NnError),
    #[error("repair failed fatally: {0}")]
    Repair(#[from] RepairFailure),
    #[error("demo file line {line}: {source}")]
    DemoParse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    pub instance_id: usize,
    /// LNS step the demo was collected at, from 1.
    pub iteration: usize,
    /// Repaired objective of the chosen rollout.
    pub objective: f64,
    /// Columns the chosen rollout destroyed.
    pub destroyed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demo {
    pub state: BipartiteState,
    /// 1.0 for each selected vehicle node, else 0.0.
    pub action: Vec<f64>,
    pub meta: DemoMeta,
}

impl Demo {
    pub fn selected_vehicles(&self) -> Vec<VehicleKey> {
        self.state
            .vehicles
            .iter()
            .zip(&self.action)
            .filter(|&(_, &a)| a > 0.5)
            .map(|(&k, _)| k)
            .collect()
    }

    /// Route binaries of the selected vehicles.
    pub fn decode(&self, vars: &VarMap) -> BTreeSet<usize> {
        vehicle_columns(vars, self.selected_vehicles())
    }
}

pub fn write_demos(path: impl AsRef<Path>, demos: &[Demo]) -> Result<(), TrainError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for d in demos {
        serde_json::to_writer(&mut out, d).map_err(|e| TrainError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_demos(path: impl AsRef<Path>) -> Result<Vec<Demo>, TrainError> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut demos = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        demos.push(serde_json::from_str(&line).map_err(|source| TrainError::DemoParse { line: i + 1, source })?);
    }
    Ok(demos)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Policies per epoch, one per LNS step.
    pub lns_iterations: usize,
    /// Vehicle-random rollouts per instance and step.
    pub samples: usize,
    pub lr: f64,
    pub batch: usize,
    pub destroy_degree: f64,
    pub acceptance_slack: f64,
    pub repair_budget: Duration,
    /// LNS iterations per validation run.
    pub validation_iterations: usize,
    pub dims: PolicyDims,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lns_iterations: 5,
            samples: 10,
            lr: 1e-4,
            batch: 16,
            destroy_degree: 0.4,
            acceptance_slack: 0.01,
            repair_budget: Duration::from_secs(1),
            validation_iterations: 10,
            dims: PolicyDims::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let counts = [
            ("epochs", self.epochs),
            ("lns_iterations", self.lns_iterations),
            ("samples", self.samples),
            ("batch", self.batch),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(TrainError::Config(format!("{name} must be positive")));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config("learning rate must be finite and non-negative".into()));
        }
        if !(self.destroy_degree > 0.0 && self.destroy_degree < 1.0) {
            return Err(TrainError::Config("destroy degree must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// An instance with its model and a constructed starting solution.
#[derive(Clone, Debug)]
pub struct TrainingInstance {
    pub id: usize,
    pub instance: Instance,
    pub model: MilpModel,
    pub initial: Solution,
}

impl TrainingInstance {
    pub fn new(id: usize, instance: Instance) -> Result<Self, TrainError> {
        let initial = initial_solution(&instance).map_err(|source| TrainError::Construction { id, source })?;
        let model = build_model(&instance);
        Ok(Self { id, instance, model, initial })
    }

    pub fn start(&self) -> SearchState {
        SearchState::new(&self.instance, &self.model, self.initial.clone())
    }
}

/// Outcome of one collection round.
#[derive(Clone, Debug, Default)]
pub struct Collection {
    pub demos: Vec<Demo>,
    /// Repaired objective of every rollout, per instance (`None` if repair failed).
    pub rollouts: Vec<Vec<Option<f64>>>,
}

/// Runs `samples` one-step Vehicle-random rollouts from each instance's
/// current solution and keeps the strictly best improving one as a demo.
#[allow(clippy::too_many_arguments)]
pub fn collect_demos(
    instances: &[TrainingInstance],
    states: &[SearchState],
    samples: usize,
    repair: &mut dyn RepairOperator,
    degree: f64,
    budget: Duration,
    iteration: usize,
    rng: &mut LnsRng,
) -> Result<Collection, TrainError> {
    let mut out = Collection::default();
    let mut destroy = VehicleRandom;
    for (inst, state) in instances.iter().zip(states) {
        let ctx = state.context(&inst.instance, &inst.model);
        let mut best_obj = state.current.objective;
        let mut best: Option<(f64, BTreeSet<usize>)> = None;
        let mut objectives = Vec::with_capacity(samples);
        for _ in 0..samples {
            let free = destroy.select(&ctx, degree, rng);
            let obj = match repair.repair(&ctx, &free, budget) {
                Ok(s) => Some(s.objective),
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(_) => None,
            };
            objectives.push(obj);
            if let Some(o) = obj {
                if o < best_obj - IMPROVE_EPS {
                    best_obj = o;
                    best = Some((o, free));
                }
            }
        }
        out.rollouts.push(objectives);
        let Some((objective, destroyed)) = best else { continue };
        let state_features = featurize_values(
            &inst.instance,
            &inst.model,
            &state.current,
            &state.current_values,
            &state.incumbent_values,
        );
        let chosen: BTreeSet<VehicleKey> = fully_free_vehicles(&inst.model.vars, &destroyed).into_iter().collect();
        let action = state_features.vehicles.iter().map(|k| if chosen.contains(k) { 1.0 } else { 0.0 }).collect();
        out.demos.push(Demo {
            state: state_features,
            action,
            meta: DemoMeta { instance_id: inst.id, iteration, objective, destroyed: destroyed.into_iter().collect() },
        });
    }
    Ok(out)
}

/// Mean loss over every vehicle node of every demo.
pub fn dataset_loss(params: &PolicyParams, demos: &[Demo]) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    let mut terms = 0usize;
    for d in demos {
        let p = policy_forward(params, &d.state)?;
        sum += bce_loss(&p, &d.action) * p.len() as f64;
        terms += p.len();
    }
    Ok(if terms == 0 { 0.0 } else { sum / terms as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassReport {
    pub loss_before: f64,
    pub loss_after: f64,
    pub batches: usize,
}

/// One shuffled pass of mini-batch SGD over `demos`.
pub fn supervise_train(
    params: &mut PolicyParams,
    demos: &[Demo],
    lr: f64,
    batch: usize,
    rng: &mut LnsRng,
) -> Result<PassReport, TrainError> {
    if demos.is_empty() {
        return Err(TrainError::Config("no demos to train on".into()));
    }
    let loss_before = dataset_loss(params, demos)?;
    let mut order: Vec<usize> = (0..demos.len()).collect();
    order.shuffle(rng);
    let mut batches = 0;
    for chunk in order.chunks(batch.max(1)) {
        let terms: usize = chunk.iter().map(|&i| demos[i].action.len()).sum();
        let mut grads = PolicyParams::zeros(params.dims);
        for &i in chunk {
            accumulate_gradients(params, &demos[i].state, &demos[i].action, 1.0 / terms.max(1) as f64, &mut grads)?;
        }
        sgd_step(params, &grads, lr);
        batches += 1;
    }
    let loss_after = dataset_loss(params, demos)?;
    Ok(PassReport { loss_before, loss_after, batches })
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub epoch: usize,
    /// LNS step within the epoch, from 1.
    pub iteration: usize,
    pub demos: usize,
    pub pass: Option<PassReport>,
    pub params: PolicyParams,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoints: Vec<Checkpoint>,
    /// `(checkpoint index, mean validation incumbent)` for each validated
    /// checkpoint: the last policy of every epoch.
    pub validation: Vec<(usize, f64)>,
    /// Index of the selected checkpoint; `None` without checkpoints.
    pub selected: Option<usize>,
    pub initial: PolicyParams,
}

impl TrainOutcome {
    pub fn best_params(&self) -> &PolicyParams {
        self.selected.map_or(&self.initial, |i| &self.checkpoints[i].params)
    }
}

/// Mean incumbent after `iterations` IL-sample steps from each instance's
/// initial solution.
pub fn validate_policy(
    params: &PolicyParams,
    instances: &[TrainingInstance],
    config: &TrainConfig,
    seed: u64,
) -> Result<f64, TrainError> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut destroy = PolicyDestroy::new(params.clone(), Deployment::Sample)?;
    let mut repair = Matheuristic;
    for inst in instances {
        let mut rng = derive_rng(seed, &[inst.id as u64]);
        let mut state = inst.start();
        for _ in 0..config.validation_iterations {
            state.step(
                &inst.instance,
                &inst.model,
                &mut destroy,
                &mut repair,
                config.destroy_degree,
                config.acceptance_slack,
                config.repair_budget,
                &mut rng,
            )?;
        }
        total += state.incumbent.objective;
    }
    Ok(total / instances.len() as f64)
}

/// Forward training. Within an epoch, step `t` collects demos at the current
/// solutions, trains `pi_t` from `pi_(t-1)` and advances every instance one
/// IL-sample step with `pi_t`. Each epoch restarts from the initial solutions
/// while the policy chain carries on. A step without demos keeps the previous
/// policy.
pub fn forward_train(
    train: &[TrainingInstance],
    validation: &[TrainingInstance],
    config: &TrainConfig,
    mut log: impl FnMut(&str),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let initial = PolicyParams::init(config.dims, config.seed);
    let mut outcome = TrainOutcome { checkpoints: Vec::new(), validation: Vec::new(), selected: None, initial: initial.clone() };
    if train.is_empty() {
        return Ok(outcome);
    }
    let mut params = initial;
    let mut repair = Matheuristic;
    for epoch in 0..config.epochs {
        let mut states: Vec<SearchState> = train.iter().map(TrainingInstance::start).collect();
        for t in 1..=config.lns_iterations {
            let mut rng = derive_rng(config.seed, &[epoch as u64, t as u64, 0]);
            let collection = collect_demos(
                train,
                &states,
                config.samples,
                &mut repair,
                config.destroy_degree,
                config.repair_budget,
                t,
                &mut rng,
            )?;
            let pass = if collection.demos.is_empty() {
                log(&format!("epoch {epoch} step {t}: no improving rollout, policy kept"));
                None
            } else {
                let report = supervise_train(&mut params, &collection.demos, config.lr, config.batch, &mut rng)?;
                log(&format!(
                    "epoch {epoch} step {t}: {} demos, loss {:.6} -> {:.6}",
                    collection.demos.len(),
                    report.loss_before,
                    report.loss_after
                ));
                Some(report)
            };
            let mut destroy = PolicyDestroy::new(params.clone(), Deployment::Sample)?;
            for (inst, state) in train.iter().zip(&mut states) {
                let mut step_rng = derive_rng(config.seed, &[epoch as u64, t as u64, 1, inst.id as u64]);
                state.step(
                    &inst.instance,
                    &inst.model,
                    &mut destroy,
                    &mut repair,
                    config.destroy_degree,
                    config.acceptance_slack,
                    config.repair_budget,
                    &mut step_rng,
                )?;
            }
            outcome.checkpoints.push(Checkpoint {
                epoch,
                iteration: t,
                demos: collection.demos.len(),
                pass,
                params: params.clone(),
            });
        }
        if !validation.is_empty() {
            let idx = outcome.checkpoints.len() - 1;
            let score = validate_policy(&params, validation, config, config.seed ^ 0x5eed)?;
            log(&format!("epoch {epoch}: validation mean incumbent {score:.3}"));
            outcome.validation.push((idx, score));
        }
    }
    outcome.selected = if outcome.validation.is_empty() {
        Some(outcome.checkpoints.len() - 1)
    } else {
        outcome
            .validation
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|&(i, _)| i)
    };
    Ok(outcome)
}
