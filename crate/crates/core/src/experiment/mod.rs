//! Metrics, desk-scale presets and the batch experiment runner.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deploy::{Deployment, PolicyDestroy};
use crate::destroy::{RandomDestroy, VehicleRandom, VehicleRandomSampleA, VehicleRandomSampleD, VehicleWorst, VehicleWorstRandom};
use crate::instance::{generate, GeneratorConfig, Instance, InstanceError};
use crate::lns::{derive_seed, run_lns, DestroyOperator, LnsConfig, LnsTrace, RepairOperator};
use crate::milp::{build_model, check_assignment, encode_solution, MilpModel};
use crate::nn::PolicyParams;
use crate::repair::{external_solver_repair, ExactOracle, ExternalSolver, Matheuristic};
use crate::solution::{check_feasible, initial_solution, Solution};

/// Relative distance to the best known objective, in percent. Zero when both
/// are zero.
pub fn primal_gap(objective: f64, best: f64) -> f64 {
    let denom = objective.abs().max(best.abs());
    if denom == 0.0 {
        return 0.0;
    }
    (objective - best).abs() / denom * 100.0
}

/// Non-empty routes per fleet.
pub fn vehicle_utilization(instance: &Instance, solution: &Solution) -> Vec<usize> {
    let mut used = vec![0; instance.num_fleets()];
    for r in solution.routes.iter().filter(|r| !r.visits.is_empty()) {
        used[r.fleet] += 1;
    }
    used
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "AGH-mini")]
    AghMini,
    #[serde(rename = "AGH-small")]
    AghSmall,
    #[serde(rename = "AGH-20-lite")]
    Agh20Lite,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::AghMini => "AGH-mini",
            Preset::AghSmall => "AGH-small",
            Preset::Agh20Lite => "AGH-20-lite",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Preset::AghMini, Preset::AghSmall, Preset::Agh20Lite].into_iter().find(|p| p.name() == name)
    }

    pub fn generator(self) -> GeneratorConfig {
        match self {
            Preset::AghMini => GeneratorConfig::new(5, 3),
            Preset::AghSmall => GeneratorConfig::new(10, 3),
            Preset::Agh20Lite => GeneratorConfig::new(20, 5),
        }
    }
}

/// Seeds tried per requested instance before giving up.
pub const MAX_SEED_ATTEMPTS: usize = 50;

/// `count` instances whose initial construction succeeds, taking generator
/// seeds `seed, seed + 1, ...` and skipping the ones that fail. Returns the
/// seed used for each instance.
pub fn constructible_instances(
    config: &GeneratorConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<(u64, Instance)>, InstanceError> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    let limit = seed + (count * MAX_SEED_ATTEMPTS) as u64;
    while out.len() < count {
        if s >= limit {
            return Err(InstanceError::Config(format!(
                "only {} of {count} constructible instances within {} seeds",
                out.len(),
                limit - seed
            )));
        }
        let inst = generate(config, s)?;
        if initial_solution(&inst).is_ok() {
            out.push((s, inst));
        }
        s += 1;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DestroySpec {
    Random,
    VehicleRandom,
    VehicleWorst,
    VehicleWorstRandom,
    /// Degree range defaults by instance size when omitted.
    VehicleRandomSampleA {
        #[serde(default)]
        range: Option<(f64, f64)>,
    },
    VehicleRandomSampleD,
    Policy { weights: PathBuf, deployment: Deployment },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RepairSpec {
    Matheuristic,
    Exact,
    /// Command template; `AGH_SOLVER_CMD` overrides it when set.
    External { command: String, gap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub name: String,
    pub destroy: DestroySpec,
    pub repair: RepairSpec,
    pub destroy_degree: f64,
    pub iterations: usize,
    /// Total budget per run, seconds.
    pub time_limit_s: f64,
    /// Budget per repair call, seconds.
    pub repair_limit_s: f64,
    #[serde(default = "default_slack")]
    pub acceptance_slack: f64,
}

fn default_slack() -> f64 {
    0.01
}

impl MethodConfig {
    pub fn new(name: impl Into<String>, destroy: DestroySpec, repair: RepairSpec) -> Self {
        Self {
            name: name.into(),
            destroy,
            repair,
            destroy_degree: 0.4,
            iterations: 10,
            time_limit_s: 60.0,
            repair_limit_s: 1.0,
            acceptance_slack: default_slack(),
        }
    }

    fn mipgap(&self) -> Option<f64> {
        match &self.repair {
            RepairSpec::External { gap, .. } => Some(*gap),
            _ => None,
        }
    }

    fn lns_config(&self, seed: u64) -> LnsConfig {
        LnsConfig {
            iterations: self.iterations,
            wall_clock: Duration::from_secs_f64(self.time_limit_s),
            destroy_degree: self.destroy_degree,
            acceptance_slack: self.acceptance_slack,
            repair_budget: Duration::from_secs_f64(self.repair_limit_s),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum InstanceSource {
    Preset { preset: Preset, count: usize, seed: u64 },
    Files { paths: Vec<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub instances: InstanceSource,
    pub methods: Vec<MethodConfig>,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("cannot parse experiment config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot write results: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Unavailable(String),
    Failed(String),
}

impl RunStatus {
    fn label(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::Unavailable(why) => format!("unavailable: {why}"),
            RunStatus::Failed(why) => format!("error: {why}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub instance: String,
    pub method: String,
    pub status: RunStatus,
    pub initial: f64,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub runtime_s: f64,
    pub iterations: usize,
    pub utilization: Vec<usize>,
    pub trace_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub mipgap: Option<f64>,
    pub limit_s: f64,
    pub destroy_degree: f64,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub time_s: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// A loaded instance ready for runs.
pub struct Prepared {
    pub name: String,
    pub instance: Instance,
    pub model: MilpModel,
    pub initial: Solution,
}

pub fn prepare_instances(source: &InstanceSource) -> Result<Vec<Prepared>, ExperimentError> {
    let raw: Vec<(String, Instance)> = match source {
        InstanceSource::Preset { preset, count, seed } => constructible_instances(&preset.generator(), *count, *seed)?
            .into_iter()
            .map(|(s, inst)| (format!("{}-{s}", preset.name()), inst))
            .collect(),
        InstanceSource::Files { paths } => paths
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                Instance::load(p).map(|i| (name, i))
            })
            .collect::<Result<_, _>>()?,
    };
    raw.into_iter()
        .map(|(name, instance)| {
            let initial = initial_solution(&instance)
                .map_err(|e| ExperimentError::Config(format!("instance {name}: no initial solution: {e}")))?;
            let model = build_model(&instance);
            Ok(Prepared { name, instance, model, initial })
        })
        .collect()
}

fn make_destroy(spec: &DestroySpec, instance: &Instance) -> Result<Box<dyn DestroyOperator>, RunStatus> {
    Ok(match spec {
        DestroySpec::Random => Box::new(RandomDestroy),
        DestroySpec::VehicleRandom => Box::new(VehicleRandom),
        DestroySpec::VehicleWorst => Box::new(VehicleWorst),
        DestroySpec::VehicleWorstRandom => Box::new(VehicleWorstRandom),
        DestroySpec::VehicleRandomSampleA { range } => Box::new(match range {
            Some((low, high)) => VehicleRandomSampleA { low: *low, high: *high },
            None => VehicleRandomSampleA::for_instance(instance),
        }),
        DestroySpec::VehicleRandomSampleD => Box::new(VehicleRandomSampleD::default()),
        DestroySpec::Policy { weights, deployment } => {
            let params = PolicyParams::load(weights).map_err(|e| RunStatus::Unavailable(e.to_string()))?;
            Box::new(PolicyDestroy::new(params, *deployment).map_err(|e| RunStatus::Unavailable(e.to_string()))?)
        }
    })
}

fn make_repair(spec: &RepairSpec, prepared: &Prepared) -> Result<Box<dyn RepairOperator>, RunStatus> {
    Ok(match spec {
        RepairSpec::Matheuristic => Box::new(Matheuristic),
        RepairSpec::Exact => Box::new(ExactOracle),
        RepairSpec::External { command, gap } => {
            let solver = ExternalSolver::from_env_or(command.clone(), *gap);
            // everything fixed: any working solver hands back the current solution
            let values = encode_solution(&prepared.model, &prepared.instance, &prepared.initial);
            external_solver_repair(
                &prepared.instance,
                &prepared.model,
                &values,
                &Default::default(),
                &solver,
                Duration::from_secs(10),
            )
            .map_err(|e| RunStatus::Unavailable(e.to_string()))?;
            Box::new(solver)
        }
    })
}

/// Re-checks a reported solution against both the routing rules and the
/// MILP rows.
pub fn verify(prepared: &Prepared, solution: &Solution) -> Result<(), String> {
    if let Some(v) = check_feasible(&prepared.instance, solution).first() {
        return Err(format!("infeasible result: {v}"));
    }
    let values = encode_solution(&prepared.model, &prepared.instance, solution);
    let violations = check_assignment(&prepared.model, &values).map_err(|e| e.to_string())?;
    if let Some(v) = violations.first() {
        return Err(format!("result violates the model: {v:?}"));
    }
    Ok(())
}

/// One method on one instance. Panics inside the run are caught and reported
/// as a failed row.
pub fn run_method(
    prepared: &Prepared,
    method: &MethodConfig,
    seed: u64,
) -> (ResultRow, Option<LnsTrace>) {
    let mut row = ResultRow {
        instance: prepared.name.clone(),
        method: method.name.clone(),
        status: RunStatus::Ok,
        initial: prepared.initial.objective,
        objective: None,
        gap: None,
        runtime_s: 0.0,
        iterations: 0,
        utilization: Vec::new(),
        trace_file: None,
    };
    let ops = make_destroy(&method.destroy, &prepared.instance)
        .and_then(|d| make_repair(&method.repair, prepared).map(|r| (d, r)));
    let (mut destroy, mut repair) = match ops {
        Ok(ops) => ops,
        Err(status) => {
            row.status = status;
            return (row, None);
        }
    };
    let config = method.lns_config(seed);
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        run_lns(&prepared.instance, &prepared.model, &prepared.initial, destroy.as_mut(), repair.as_mut(), &config)
    }));
    row.runtime_s = start.elapsed().as_secs_f64();
    match result {
        Ok(Ok(outcome)) => {
            row.iterations = outcome.trace.records.len();
            match verify(prepared, &outcome.best) {
                Ok(()) => {
                    row.objective = Some(outcome.best.objective);
                    row.utilization = vehicle_utilization(&prepared.instance, &outcome.best);
                }
                Err(why) => row.status = RunStatus::Failed(why),
            }
            (row, Some(outcome.trace))
        }
        Ok(Err(e)) => {
            row.status = RunStatus::Failed(e.to_string());
            (row, None)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_else(|| "panic".into());
            row.status = RunStatus::Failed(format!("panic: {msg}"));
            (row, None)
        }
    }
}

/// Fills in per-instance gaps against the best successful method.
pub fn assign_gaps(rows: &mut [ResultRow]) {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows.iter() {
        if let Some(o) = r.objective {
            let b = best.entry(r.instance.clone()).or_insert(o);
            *b = b.min(o);
        }
    }
    for r in rows.iter_mut() {
        r.gap = r.objective.map(|o| primal_gap(o, best[&r.instance]));
    }
}

pub fn summarize(rows: &[ResultRow], methods: &[MethodConfig]) -> Vec<SummaryRow> {
    methods
        .iter()
        .map(|m| {
            let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.method == m.name && r.objective.is_some()).collect();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
            };
            SummaryRow {
                method: m.name.clone(),
                mipgap: m.mipgap(),
                limit_s: m.repair_limit_s,
                destroy_degree: m.destroy_degree,
                objective: mean(&|r| r.objective.unwrap()),
                gap: mean(&|r| r.gap.unwrap()),
                time_s: mean(&|r| r.runtime_s).unwrap_or(0.0),
                runs: ok.len(),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Writes the incumbent curves of a trace: iteration and elapsed time
/// against the incumbent objective.
pub fn write_curve(path: &Path, trace: &LnsTrace) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "elapsed_s", "incumbent"])?;
    w.write_record(["0".to_string(), "0".to_string(), trace.initial_objective.to_string()])?;
    for r in &trace.records {
        w.write_record([(r.iteration + 1).to_string(), format!("{:.6}", r.elapsed_s), r.incumbent.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every method on every instance and writes `results.csv`,
/// `summary.csv` and one curve file per run under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport, ExperimentError> {
    if config.methods.is_empty() {
        return Err(ExperimentError::Config("no methods".into()));
    }
    let mut names: Vec<&str> = config.methods.iter().map(|m| m.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != config.methods.len() {
        return Err(ExperimentError::Config("method names must be unique".into()));
    }
    let prepared = prepare_instances(&config.instances)?;
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;

    let jobs: Vec<(usize, usize)> =
        (0..prepared.len()).flat_map(|i| (0..config.methods.len()).map(move |m| (i, m))).collect();
    let run = |&(i, m): &(usize, usize)| {
        let seed = derive_seed(config.seed, &[i as u64, m as u64]);
        run_method(&prepared[i], &config.methods[m], seed)
    };
    let results: Vec<(ResultRow, Option<LnsTrace>)> = if config.workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };

    let mut rows = Vec::with_capacity(results.len());
    for (mut row, trace) in results {
        if let Some(trace) = trace {
            let file = format!("{}__{}.csv", file_safe(&row.instance), file_safe(&row.method));
            write_curve(&traces_dir.join(&file), &trace)?;
            row.trace_file = Some(format!("traces/{file}"));
        }
        rows.push(row);
    }
    assign_gaps(&mut rows);
    let summary = summarize(&rows, &config.methods);

    let mut w = csv::Writer::from_path(out_dir.join("results.csv"))?;
    w.write_record([
        "instance", "method", "status", "initial", "objective", "gap_pct", "runtime_s", "iterations", "vehicles_used",
        "trace",
    ])?;
    for r in &rows {
        w.write_record([
            r.instance.clone(),
            r.method.clone(),
            r.status.label(),
            r.initial.to_string(),
            fmt_opt(r.objective, 4),
            fmt_opt(r.gap, 4),
            format!("{:.3}", r.runtime_s),
            r.iterations.to_string(),
            r.utilization.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            r.trace_file.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    w.write_record(["Method", "Mipgap", "Limit", "D_d", "Obj.", "Gap", "Time", "Runs"])?;
    for s in &summary {
        w.write_record([
            s.method.clone(),
            fmt_opt(s.mipgap, 2),
            format!("{}s", s.limit_s),
            s.destroy_degree.to_string(),
            fmt_opt(s.objective, 2),
            s.gap.map_or_else(|| "-".into(), |g| format!("{g:.2}%")),
            format!("{:.2}s", s.time_s),
            s.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(ExperimentReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::d1;
    use crate::solution::tests::d1_optimal;

    #[test]
    fn gap_examples() {
        assert!((primal_gap(110.0, 100.0) - 9.090909090909092).abs() < 1e-9);
        assert_eq!(primal_gap(100.0, 100.0), 0.0);
        assert!((primal_gap(100.0, 110.0) - 9.090909090909092).abs() < 1e-9);
        assert_eq!(primal_gap(0.0, 0.0), 0.0);
    }

    #[test]
    fn utilization_counts() {
        let inst = d1();
        assert_eq!(vehicle_utilization(&inst, &d1_optimal()), vec![1, 1]);
        assert_eq!(vehicle_utilization(&inst, &Solution::empty(&inst)), vec![0, 0]);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [Preset::AghMini, Preset::AghSmall, Preset::Agh20Lite] {
            assert_eq!(Preset::from_name(p.name()), Some(p));
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert_eq!(Preset::Agh20Lite.generator().operations.len(), 5);
    }

    #[test]
    fn constructible_instances_skip_failures() {
        let got = constructible_instances(&Preset::AghMini.generator(), 6, 0).unwrap();
        assert_eq!(got.len(), 6);
        assert!(got.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(got.iter().all(|(_, i)| initial_solution(i).is_ok()));
    }

    #[test]
    fn gaps_of_best_are_zero() {
        let row = |inst: &str, m: &str, o: Option<f64>| ResultRow {
            instance: inst.into(),
            method: m.into(),
            status: RunStatus::Ok,
            initial: 0.0,
            objective: o,
            gap: None,
            runtime_s: 0.0,
            iterations: 0,
            utilization: vec![],
            trace_file: None,
        };
        let mut rows = vec![row("a", "x", Some(100.0)), row("a", "y", Some(110.0)), row("a", "z", None)];
        assign_gaps(&mut rows);
        assert_eq!(rows[0].gap, Some(0.0));
        assert!((rows[1].gap.unwrap() - 100.0 / 11.0).abs() < 1e-9);
        assert_eq!(rows[2].gap, None);
    }
}
