//! Repair through any MILP solver that reads LP text and writes `name value`
//! lines.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::process::Command;
use std::time::Duration;

use crate::instance::Instance;
use crate::lns::{LnsContext, RepairFailure, RepairOperator};
use crate::milp::{decode_assignment, export_lp, fix_and_extract, parse_values, DecodeError, MilpModel, VarMap};
use crate::solution::{check_feasible, Solution};

/// Overrides the configured command template when set.
pub const SOLVER_ENV: &str = "AGH_SOLVER_CMD";

/// Shell command template. `{input}` is the LP file, `{output}` the values
/// file the solver must write, `{timelimit}` seconds and `{gap}` the
/// relative MIP gap.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalSolver {
    pub command: String,
    pub gap: f64,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>, gap: f64) -> Self {
        Self { command: command.into(), gap }
    }

    /// Uses `$AGH_SOLVER_CMD` if present, else `fallback`.
    pub fn from_env_or(fallback: impl Into<String>, gap: f64) -> Self {
        let command = std::env::var(SOLVER_ENV).unwrap_or_else(|_| fallback.into());
        Self::new(command, gap)
    }

    fn render(&self, input: &str, output: &str, budget: Duration) -> String {
        self.command
            .replace("{input}", input)
            .replace("{output}", output)
            .replace("{timelimit}", &format!("{}", budget.as_secs_f64()))
            .replace("{gap}", &format!("{}", self.gap))
    }
}

/// `name value` text for a full assignment, zeros included.
pub fn format_values(vars: &VarMap, values: &[f64]) -> String {
    let mut out = String::new();
    for (c, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{} {}", vars.kind(c), v);
    }
    out
}

/// Fixes every non-free binary at its current value, hands the sub-model to
/// the solver and decodes the answer.
pub fn external_solver_repair(
    instance: &Instance,
    model: &MilpModel,
    current_values: &[f64],
    free: &BTreeSet<usize>,
    solver: &ExternalSolver,
    budget: Duration,
) -> Result<Solution, RepairFailure> {
    let sub = fix_and_extract(model, current_values, free).map_err(|e| RepairFailure::SolverError(e.to_string()))?;
    let dir = tempfile::Builder::new()
        .prefix("agh-repair-")
        .tempdir()
        .map_err(|e| RepairFailure::SolverError(e.to_string()))?;
    let input = dir.path().join("sub.lp");
    let output = dir.path().join("sub.sol");
    std::fs::write(&input, export_lp(&sub)).map_err(|e| RepairFailure::SolverError(e.to_string()))?;

    let cmd = solver.render(&input.to_string_lossy(), &output.to_string_lossy(), budget);
    let result = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| RepairFailure::SolverError(e.to_string()))?;
    if !result.status.success() {
        return Err(RepairFailure::SolverError(String::from_utf8_lossy(&result.stderr).trim().to_owned()));
    }
    let text = std::fs::read_to_string(&output)
        .map_err(|e| RepairFailure::ParseError(format!("missing solution file: {e}")))?;
    let parsed = parse_values(&model.vars, &text).map_err(|e| RepairFailure::ParseError(e.to_string()))?;
    if let Some(status) = &parsed.status {
        if status.eq_ignore_ascii_case("infeasible") {
            return Err(RepairFailure::Infeasible);
        }
    }
    let solution = match decode_assignment(model, instance, &parsed.values) {
        Ok(s) => s,
        Err(e @ DecodeError::NonIntegral { .. }) => return Err(RepairFailure::ParseError(e.to_string())),
        Err(e) => return Err(RepairFailure::DecodedInfeasible(e.to_string())),
    };
    let violations = check_feasible(instance, &solution);
    if let Some(v) = violations.first() {
        return Err(RepairFailure::DecodedInfeasible(format!(
            "{} violation(s), first: {v}",
            violations.len()
        )));
    }
    Ok(solution)
}

impl RepairOperator for ExternalSolver {
    fn repair(
        &mut self,
        ctx: &LnsContext<'_>,
        free: &BTreeSet<usize>,
        budget: Duration,
    ) -> Result<Solution, RepairFailure> {
        external_solver_repair(ctx.instance, ctx.model, ctx.current_values, free, self, budget)
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::destroy::vehicle_columns;
    use crate::instance::tests::d1;
    use crate::milp::{build_model, encode_solution};
    use crate::repair::exact_oracle_repair;
    use crate::solution::tests::d1_optimal;
    use crate::solution::{schedule_earliest, VehicleKey};

    /// A "solver" that copies a prepared answer to the output path.
    fn canned(answer: &str) -> (tempfile::TempDir, ExternalSolver) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("answer.sol");
        std::fs::write(&path, answer).unwrap();
        let cmd = format!("test -s {{input}} && cp '{}' {{output}}", path.display());
        (dir, ExternalSolver::new(cmd, 0.1))
    }

    #[test]
    fn identity_round_trip() {
        let inst = d1();
        let m = build_model(&inst);
        let s = d1_optimal();
        let x = encode_solution(&m, &inst, &s);
        let (_dir, solver) = canned(&format_values(&m.vars, &x));
        let out = external_solver_repair(&inst, &m, &x, &BTreeSet::new(), &solver, Duration::from_secs(1)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn oracle_answer_through_the_adapter() {
        let inst = d1();
        let m = build_model(&inst);
        let mut plan = d1_optimal().plan(&inst);
        plan.routes[0][0] = vec![1, 0];
        let st = schedule_earliest(&inst, &plan).unwrap();
        let bad = Solution::from_plan(&inst, plan, st);
        let free = vehicle_columns(&m.vars, [VehicleKey::new(0, 0)]);
        let oracle = exact_oracle_repair(&inst, &m.vars, &bad, &free).unwrap();
        let (_dir, solver) = canned(&format_values(&m.vars, &encode_solution(&m, &inst, &oracle)));
        let cur = encode_solution(&m, &inst, &bad);
        let out = external_solver_repair(&inst, &m, &cur, &free, &solver, Duration::from_secs(1)).unwrap();
        assert_eq!(out.objective, oracle.objective);
    }

    #[test]
    fn fractional_answer_is_a_parse_error() {
        let inst = d1();
        let m = build_model(&inst);
        let x = encode_solution(&m, &inst, &d1_optimal());
        let (_dir, solver) = canned("x_0_1_0_0 0.5\n");
        match external_solver_repair(&inst, &m, &x, &BTreeSet::new(), &solver, Duration::from_secs(1)) {
            Err(RepairFailure::ParseError(msg)) => assert!(msg.contains("non-integral binary"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solver_failures_are_reported() {
        let inst = d1();
        let m = build_model(&inst);
        let x = encode_solution(&m, &inst, &d1_optimal());
        let failing = ExternalSolver::new("echo broken >&2; exit 3", 0.1);
        match external_solver_repair(&inst, &m, &x, &BTreeSet::new(), &failing, Duration::from_secs(1)) {
            Err(RepairFailure::SolverError(msg)) => assert_eq!(msg, "broken"),
            other => panic!("unexpected {other:?}"),
        }
        let (_dir, infeasible) = canned("status infeasible\n");
        assert!(matches!(
            external_solver_repair(&inst, &m, &x, &BTreeSet::new(), &infeasible, Duration::from_secs(1)),
            Err(RepairFailure::Infeasible)
        ));
    }

    #[test]
    fn wrong_answer_is_fatal() {
        let inst = d1();
        let m = build_model(&inst);
        let x = encode_solution(&m, &inst, &d1_optimal());
        let mut wrong = x.clone();
        wrong[m.vars.start(VehicleKey::new(1, 0), 0)] = 1.0;
        let (_dir, solver) = canned(&format_values(&m.vars, &wrong));
        let err = external_solver_repair(&inst, &m, &x, &BTreeSet::new(), &solver, Duration::from_secs(1)).unwrap_err();
        assert!(err.is_fatal(), "{err}");
    }

    #[test]
    fn placeholders_are_substituted() {
        let s = ExternalSolver::new("solve {input} -o {output} -t {timelimit} -g {gap}", 0.2);
        assert_eq!(
            s.render("a.lp", "a.sol", Duration::from_millis(1500)),
            "solve a.lp -o a.sol -t 1.5 -g 0.2"
        );
    }
}
