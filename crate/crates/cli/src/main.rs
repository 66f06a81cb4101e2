use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use agh_lns::destroy::{RandomDestroy, VehicleRandom, VehicleRandomSampleA, VehicleRandomSampleD, VehicleWorst, VehicleWorstRandom};
use agh_lns::experiment::constructible_instances;
use agh_lns::training::TrainingInstance;
use agh_lns::{
    build_model, check_feasible, forward_train, initial_solution, primal_gap, run_experiment, run_lns, vehicle_utilization,
    Deployment, DestroyOperator, ExactOracle, ExperimentConfig, ExternalSolver, GeneratorConfig, Instance, LnsConfig,
    Matheuristic, PolicyDestroy, PolicyParams, Preset, RepairOperator, TrainConfig,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "agh", version, about = "LNS for multi-fleet airport ground handling routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files.
    Gen(GenArgs),
    /// Run one LNS method on one instance.
    Solve(SolveArgs),
    /// Train a destroy policy by forward training.
    Train(TrainArgs),
    /// Run an experiment config and write result tables.
    Eval(EvalArgs),
    /// Primal gap between an objective and the best known one.
    Gap { objective: f64, best: f64 },
}

#[derive(Args)]
struct InstanceSet {
    /// Desk preset: AGH-mini, AGH-small or AGH-20-lite.
    #[arg(long, value_parser = parse_preset, conflicts_with_all = ["flights", "ops"])]
    preset: Option<Preset>,
    #[arg(long)]
    flights: Option<usize>,
    /// Number of operation types (fleets).
    #[arg(long)]
    ops: Option<usize>,
    /// Vehicles per fleet instead of the drawn fleet size.
    #[arg(long)]
    vehicles: Option<usize>,
}

impl InstanceSet {
    fn generator(&self) -> Result<GeneratorConfig> {
        let mut config = match (self.preset, self.flights, self.ops) {
            (Some(p), _, _) => p.generator(),
            (None, Some(n), Some(k)) => GeneratorConfig::new(n, k),
            _ => bail!("give --preset or both --flights and --ops"),
        };
        if let Some(v) = self.vehicles {
            config = config.with_vehicles(v);
        }
        Ok(config)
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| format!("unknown preset {s}"))
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    set: InstanceSet,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only instances with a constructible initial solution.
    #[arg(long)]
    constructible: bool,
    #[arg(long, default_value = "instances")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Operator {
    Random,
    VehicleRandom,
    VehicleWorst,
    VehicleWorstRandom,
    SampleA,
    SampleD,
    IlSample,
    IlSampleA,
    IlSampleD,
}

#[derive(Clone, Copy, ValueEnum)]
enum Repair {
    Matheuristic,
    Exact,
    External,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "vehicle-random")]
    operator: Operator,
    /// Policy weights for the il-* operators.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "matheuristic")]
    repair: Repair,
    /// Command template for the external solver; `AGH_SOLVER_CMD` wins when set.
    #[arg(long, default_value = "")]
    solver_cmd: String,
    #[arg(long, default_value_t = 0.1)]
    mipgap: f64,
    /// Destroy degree D_d.
    #[arg(long, default_value_t = 0.4)]
    degree: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Total budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    /// Budget per repair call in seconds.
    #[arg(long, default_value_t = 1.0)]
    repair_budget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the best solution.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    set: InstanceSet,
    #[arg(long, default_value_t = 20)]
    train_count: usize,
    #[arg(long, default_value_t = 10)]
    validation_count: usize,
    /// First generator seed; validation instances follow the training ones.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    /// Training settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    degree: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "policy.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment config in JSON.
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn generate_set(set: &InstanceSet, count: usize, seed: u64, constructible: bool) -> Result<Vec<(u64, Instance)>> {
    let config = set.generator()?;
    if constructible {
        return Ok(constructible_instances(&config, count, seed)?);
    }
    (0..count as u64)
        .map(|i| Ok((seed + i, agh_lns::generate(&config, seed + i)?)))
        .collect()
}

fn gen(args: GenArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    for (seed, inst) in generate_set(&args.set, args.count, args.seed, args.constructible)? {
        let path = args.out.join(format!("instance-{seed}.json"));
        inst.save(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn load_policy(path: Option<&Path>, deployment: Deployment) -> Result<Box<dyn DestroyOperator>> {
    let path = path.context("--weights is required for policy operators")?;
    let params = PolicyParams::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(Box::new(PolicyDestroy::new(params, deployment)?))
}

fn destroy_operator(op: Operator, instance: &Instance, weights: Option<&Path>) -> Result<Box<dyn DestroyOperator>> {
    Ok(match op {
        Operator::Random => Box::new(RandomDestroy),
        Operator::VehicleRandom => Box::new(VehicleRandom),
        Operator::VehicleWorst => Box::new(VehicleWorst),
        Operator::VehicleWorstRandom => Box::new(VehicleWorstRandom),
        Operator::SampleA => Box::new(VehicleRandomSampleA::for_instance(instance)),
        Operator::SampleD => Box::new(VehicleRandomSampleD::default()),
        Operator::IlSample => load_policy(weights, Deployment::Sample)?,
        Operator::IlSampleA => load_policy(weights, Deployment::SampleA)?,
        Operator::IlSampleD => load_policy(weights, Deployment::SampleD)?,
    })
}

fn solve(args: SolveArgs) -> Result<()> {
    let instance = Instance::load(&args.instance).with_context(|| format!("loading {}", args.instance.display()))?;
    let model = build_model(&instance);
    let initial = initial_solution(&instance)?;
    let mut destroy = destroy_operator(args.operator, &instance, args.weights.as_deref())?;
    let mut repair: Box<dyn RepairOperator> = match args.repair {
        Repair::Matheuristic => Box::new(Matheuristic),
        Repair::Exact => Box::new(ExactOracle),
        Repair::External => {
            let solver = ExternalSolver::from_env_or(args.solver_cmd.clone(), args.mipgap);
            if solver.command.trim().is_empty() {
                bail!("external repair needs --solver-cmd or AGH_SOLVER_CMD");
            }
            Box::new(solver)
        }
    };
    let config = LnsConfig {
        iterations: args.iterations,
        wall_clock: Duration::from_secs_f64(args.budget),
        destroy_degree: args.degree,
        acceptance_slack: 0.01,
        repair_budget: Duration::from_secs_f64(args.repair_budget),
        seed: args.seed,
    };
    let start = Instant::now();
    let outcome = run_lns(&instance, &model, &initial, destroy.as_mut(), repair.as_mut(), &config)?;
    if let Some(v) = check_feasible(&instance, &outcome.best).first() {
        bail!("search returned an infeasible solution: {v}");
    }
    println!(
        "{} + {}: initial {:.3}, best {:.3} after {} iterations in {:.2}s; vehicles used {:?}",
        destroy.name(),
        repair.name(),
        initial.objective,
        outcome.best.objective,
        outcome.trace.records.len(),
        start.elapsed().as_secs_f64(),
        vehicle_utilization(&instance, &outcome.best)
    );
    if let Some(path) = &args.out {
        outcome.best.save(path)?;
    }
    if let Some(path) = &args.trace {
        outcome.trace.write_csv(fs::File::create(path)?)?;
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.degree {
        config.destroy_degree = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let all = generate_set(&args.set, args.train_count + args.validation_count, args.instance_seed, true)?;
    let wrap = |items: &[(u64, Instance)]| -> Result<Vec<TrainingInstance>> {
        items.iter().enumerate().map(|(i, (_, inst))| Ok(TrainingInstance::new(i, inst.clone())?)).collect()
    };
    let train = wrap(&all[..args.train_count])?;
    let validation = wrap(&all[args.train_count..])?;
    let start = Instant::now();
    let outcome = forward_train(&train, &validation, &config, |line| {
        eprintln!("[{:>7.1}s] {line}", start.elapsed().as_secs_f64());
    })?;
    outcome.best_params().save(&args.out)?;
    match outcome.selected {
        Some(i) => println!("saved checkpoint {i} to {}", args.out.display()),
        None => println!("saved {} to {}", if outcome.checkpoints.is_empty() { "initial policy" } else { "last checkpoint" }, args.out.display()),
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    fs::create_dir_all(&args.out)?;
    let report = run_experiment(&config, &args.out)?;
    for s in &report.summary {
        let obj = s.objective.map_or_else(|| "-".to_string(), |o| format!("{o:.2}"));
        let gap = s.gap.map_or_else(|| "-".to_string(), |g| format!("{g:.2}%"));
        println!("{:<24} obj {obj:>12} gap {gap:>8} time {:.2}s runs {}", s.method, s.time_s, s.runs);
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gap { objective, best } => {
            println!("{:.4}%", primal_gap(objective, best));
            Ok(())
        }
    }
}
