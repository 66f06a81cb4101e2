use super::{MilpModel, ModelError, Sense};

const TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum AssignmentViolation {
    /// Row `row` misses its right-hand side by `excess` (> 0).
    Row { row: usize, excess: f64 },
    Bound { column: usize, value: f64 },
    Integrality { column: usize, value: f64 },
}

/// Every row, bound and integrality violation of a full assignment. An empty
/// report means the assignment is feasible for `model`.
pub fn check_assignment(
    model: &MilpModel,
    values: &[f64],
) -> Result<Vec<AssignmentViolation>, ModelError> {
    if values.len() != model.num_vars() {
        return Err(ModelError::Dimension { expected: model.num_vars(), got: values.len() });
    }
    let mut out = Vec::new();
    for (column, (&v, &(lo, hi))) in values.iter().zip(&model.bounds).enumerate() {
        if v < lo - TOL || v > hi + TOL {
            out.push(AssignmentViolation::Bound { column, value: v });
        }
        if model.integrality[column] && (v - v.round()).abs() > TOL {
            out.push(AssignmentViolation::Integrality { column, value: v });
        }
    }
    for (i, row) in model.rows.iter().enumerate() {
        let lhs = row.activity(values);
        // rounding noise in sums of big-M terms grows with their size, but
        // only by a few ulps; a relative 1e-6 here would hide real excesses
        let tol = TOL + 1e-12 * row.rhs.abs();
        let excess = match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        if excess > tol {
            out.push(AssignmentViolation::Row { row: i, excess });
        }
    }
    Ok(out)
}
