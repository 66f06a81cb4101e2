//! The destroy/repair loop: operator interfaces, acceptance and tracing.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::Instance;
use crate::milp::{encode_solution, MilpModel};
use crate::solution::{Solution, Violation};

/// Random source shared by every stochastic operator.
pub type LnsRng = ChaCha8Rng;

/// Seed of an independent stream for one `(seed, tag...)` tuple.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for &t in tags {
        h = splitmix(h ^ t.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    h
}

pub fn derive_rng(seed: u64, tags: &[u64]) -> LnsRng {
    LnsRng::seed_from_u64(derive_seed(seed, tags))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What operators see of the search state at one iteration.
pub struct LnsContext<'a> {
    pub instance: &'a Instance,
    pub model: &'a MilpModel,
    pub current: &'a Solution,
    /// `current` encoded as a full column assignment.
    pub current_values: &'a [f64],
    pub incumbent: &'a Solution,
    pub incumbent_values: &'a [f64],
}

pub trait DestroyOperator {
    /// Route-binary columns to free for the next repair.
    fn select(&mut self, ctx: &LnsContext<'_>, degree: f64, rng: &mut LnsRng) -> BTreeSet<usize>;

    fn name(&self) -> &str;
}

pub trait RepairOperator {
    /// Re-optimizes the free columns of `ctx.current`, keeping everything else
    /// fixed. A returned solution must be feasible.
    fn repair(
        &mut self,
        ctx: &LnsContext<'_>,
        free: &BTreeSet<usize>,
        budget: Duration,
    ) -> Result<Solution, RepairFailure>;

    fn name(&self) -> &str;
}

#[derive(Debug, Error)]
pub enum RepairFailure {
    #[error("flight {flight} cannot be reinserted for fleet {fleet}")]
    Unrepairable { flight: usize, fleet: usize },
    #[error("repair budget exhausted before a feasible solution was found")]
    Timeout,
    #[error("subproblem too large for exhaustive repair: {pairs} services over {vehicles} vehicles")]
    GuardExceeded { pairs: usize, vehicles: usize },
    #[error("external solver failed: {0}")]
    SolverError(String),
    #[error("solver reported the subproblem infeasible")]
    Infeasible,
    #[error("cannot read solver output: {0}")]
    ParseError(String),
    /// The solver's answer decodes to an infeasible solution. This points at
    /// a modelling or encoding bug and stops the search.
    #[error("decoded solution is infeasible: {0}")]
    DecodedInfeasible(String),
}

impl RepairFailure {
    pub fn is_fatal(&self) -> bool {
        matches!(self, RepairFailure::DecodedInfeasible(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LnsConfig {
    pub iterations: usize,
    pub wall_clock: Duration,
    /// Fraction of route binaries to free per iteration, in `(0, 1)`.
    pub destroy_degree: f64,
    pub acceptance_slack: f64,
    pub repair_budget: Duration,
    pub seed: u64,
}

impl Default for LnsConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            wall_clock: Duration::from_secs(3600),
            destroy_degree: 0.2,
            acceptance_slack: 0.01,
            repair_budget: Duration::from_secs(1),
            seed: 0,
        }
    }
}

impl LnsConfig {
    pub fn validate(&self) -> Result<(), LnsError> {
        if !(self.destroy_degree > 0.0 && self.destroy_degree < 1.0) {
            return Err(LnsError::Config(format!(
                "destroy degree {} outside (0, 1)",
                self.destroy_degree
            )));
        }
        if self.wall_clock.is_zero() || self.repair_budget.is_zero() {
            return Err(LnsError::Config("budgets must be positive".into()));
        }
        if !(self.acceptance_slack >= 0.0 && self.acceptance_slack.is_finite()) {
            return Err(LnsError::Config("acceptance slack must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LnsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("initial solution is infeasible: {0}")]
    InfeasibleStart(Violation),
    #[error("repair aborted the search: {0}")]
    Repair(RepairFailure),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub elapsed_s: f64,
    /// Columns freed by the destroy step.
    pub destroyed: Vec<usize>,
    /// Repaired objective; `None` when repair failed.
    pub objective: Option<f64>,
    pub accepted: bool,
    pub incumbent: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LnsTrace {
    pub initial_objective: f64,
    pub records: Vec<TraceRecord>,
}

impl LnsTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "elapsed_s", "obj", "incumbent", "accepted"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.6}", r.elapsed_s),
                r.objective.map_or_else(String::new, |o| o.to_string()),
                r.incumbent.to_string(),
                r.accepted.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Incumbent objective after each iteration, starting with the initial.
    pub fn incumbent_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.records.iter().map(|r| r.incumbent))
            .collect()
    }
}

/// Accept a candidate that is at most `slack` (relative) worse than the incumbent.
pub fn accept(candidate: f64, incumbent: f64, slack: f64) -> bool {
    candidate <= (1.0 + slack) * incumbent
}

#[derive(Clone, Debug)]
pub struct LnsOutcome {
    pub best: Solution,
    pub trace: LnsTrace,
}

/// Current and best solution of one search, with their encodings.
#[derive(Clone, Debug)]
pub struct SearchState {
    pub current: Solution,
    pub current_values: Vec<f64>,
    pub incumbent: Solution,
    pub incumbent_values: Vec<f64>,
}

/// What one destroy/repair iteration did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub destroyed: BTreeSet<usize>,
    /// Repaired objective; `None` when repair failed.
    pub objective: Option<f64>,
    pub accepted: bool,
}

impl SearchState {
    pub fn new(instance: &Instance, model: &MilpModel, initial: Solution) -> Self {
        let values = encode_solution(model, instance, &initial);
        Self { current: initial.clone(), current_values: values.clone(), incumbent: initial, incumbent_values: values }
    }

    pub fn context<'a>(&'a self, instance: &'a Instance, model: &'a MilpModel) -> LnsContext<'a> {
        LnsContext {
            instance,
            model,
            current: &self.current,
            current_values: &self.current_values,
            incumbent: &self.incumbent,
            incumbent_values: &self.incumbent_values,
        }
    }

    /// Destroy, repair and accept or reject. Only fatal repair failures are
    /// returned as errors.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        instance: &Instance,
        model: &MilpModel,
        destroy: &mut dyn DestroyOperator,
        repair: &mut dyn RepairOperator,
        degree: f64,
        slack: f64,
        budget: Duration,
        rng: &mut LnsRng,
    ) -> Result<StepOutcome, RepairFailure> {
        let ctx = self.context(instance, model);
        let destroyed = destroy.select(&ctx, degree, rng);
        let candidate = match repair.repair(&ctx, &destroyed, budget) {
            Ok(c) => c,
            Err(e) if e.is_fatal() => return Err(e),
            Err(_) => return Ok(StepOutcome { destroyed, objective: None, accepted: false }),
        };
        let objective = candidate.objective;
        let accepted = accept(objective, self.incumbent.objective, slack);
        if accepted {
            self.current_values = encode_solution(model, instance, &candidate);
            self.current = candidate;
            if self.current.objective < self.incumbent.objective {
                self.incumbent = self.current.clone();
                self.incumbent_values = self.current_values.clone();
            }
        }
        Ok(StepOutcome { destroyed, objective: Some(objective), accepted })
    }
}

/// Runs destroy/repair iterations from `initial` until the iteration count or
/// the wall-clock budget runs out, whichever comes first. A failed repair
/// keeps the current solution and counts as a rejected iteration.
pub fn run_lns(
    instance: &Instance,
    model: &MilpModel,
    initial: &Solution,
    destroy: &mut dyn DestroyOperator,
    repair: &mut dyn RepairOperator,
    config: &LnsConfig,
) -> Result<LnsOutcome, LnsError> {
    config.validate()?;
    if let Some(v) = crate::solution::check_feasible(instance, initial).into_iter().next() {
        return Err(LnsError::InfeasibleStart(v));
    }
    let mut rng = LnsRng::seed_from_u64(config.seed);
    let start = Instant::now();
    let mut state = SearchState::new(instance, model, initial.clone());
    let mut trace = LnsTrace { initial_objective: initial.objective, records: Vec::new() };

    for iteration in 0..config.iterations {
        if start.elapsed() >= config.wall_clock {
            break;
        }
        let step = state
            .step(
                instance,
                model,
                destroy,
                repair,
                config.destroy_degree,
                config.acceptance_slack,
                config.repair_budget,
                &mut rng,
            )
            .map_err(LnsError::Repair)?;
        trace.records.push(TraceRecord {
            iteration,
            elapsed_s: start.elapsed().as_secs_f64(),
            destroyed: step.destroyed.into_iter().collect(),
            objective: step.objective,
            accepted: step.accepted,
            incumbent: state.incumbent.objective,
        });
    }
    Ok(LnsOutcome { best: state.incumbent, trace })
}
