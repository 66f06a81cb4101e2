//! Built-in ground handling operations and their precedence structure.

use serde::{Deserialize, Serialize};

use super::AircraftType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Deboarding,
    Fueling,
    Boarding,
    Catering,
    Cleaning,
    Pushback,
    Loading,
    PotableWater,
    Lavatory,
    BridgeRemoval,
}

/// Catalog order doubles as the selection order when fewer than ten
/// operations are requested, so small instances keep a precedence chain.
pub const OPERATION_CATALOG: [OpKind; 10] = [
    OpKind::Deboarding,
    OpKind::Fueling,
    OpKind::Boarding,
    OpKind::Catering,
    OpKind::Cleaning,
    OpKind::Pushback,
    OpKind::Loading,
    OpKind::PotableWater,
    OpKind::Lavatory,
    OpKind::BridgeRemoval,
];

impl OpKind {
    /// Priority level for the first aircraft type (1 runs first).
    pub fn priority(self) -> u8 {
        match self {
            OpKind::Deboarding => 1,
            OpKind::Fueling
            | OpKind::Catering
            | OpKind::Cleaning
            | OpKind::Loading
            | OpKind::PotableWater
            | OpKind::Lavatory => 2,
            OpKind::Boarding => 3,
            OpKind::BridgeRemoval => 4,
            OpKind::Pushback => 5,
        }
    }

    /// Default service duration range in minutes.
    pub fn service_minutes(self) -> (f64, f64) {
        match self {
            OpKind::Deboarding => (3.0, 6.0),
            OpKind::Fueling => (4.0, 8.0),
            OpKind::Boarding => (4.0, 8.0),
            OpKind::Catering => (3.0, 7.0),
            OpKind::Cleaning => (4.0, 8.0),
            OpKind::Pushback => (2.0, 4.0),
            OpKind::Loading => (4.0, 8.0),
            OpKind::PotableWater => (2.0, 4.0),
            OpKind::Lavatory => (2.0, 4.0),
            OpKind::BridgeRemoval => (1.0, 2.0),
        }
    }

    /// Default vehicle speed in metres per minute.
    pub fn speed(self) -> f64 {
        match self {
            OpKind::Deboarding | OpKind::Boarding => 250.0,
            OpKind::Fueling => 300.0,
            OpKind::Catering | OpKind::Loading => 320.0,
            OpKind::Cleaning | OpKind::PotableWater | OpKind::Lavatory => 350.0,
            OpKind::Pushback | OpKind::BridgeRemoval => 200.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Deboarding => "deboarding",
            OpKind::Fueling => "fueling",
            OpKind::Boarding => "boarding",
            OpKind::Catering => "catering",
            OpKind::Cleaning => "cleaning",
            OpKind::Pushback => "pushback",
            OpKind::Loading => "loading",
            OpKind::PotableWater => "potable-water",
            OpKind::Lavatory => "lavatory",
            OpKind::BridgeRemoval => "bridge-removal",
        }
    }
}

/// Catalog-level precedence for an aircraft type, as catalog index pairs.
fn catalog_edges(ty: AircraftType) -> Vec<(OpKind, OpKind)> {
    let mut edges = Vec::new();
    for &a in &OPERATION_CATALOG {
        for &b in &OPERATION_CATALOG {
            if b.priority() == a.priority() + 1 {
                edges.push((a, b));
            }
        }
    }
    match ty {
        AircraftType::T1 => {}
        AircraftType::T2 => {
            // catering may run at level 1 or 2
            edges.retain(|&e| e != (OpKind::Deboarding, OpKind::Catering));
        }
        AircraftType::T3 => {
            // cleaning at level 1 or 2; catering any time before pushback
            edges.retain(|&(a, b)| {
                (a, b) != (OpKind::Deboarding, OpKind::Cleaning)
                    && a != OpKind::Catering
                    && b != OpKind::Catering
            });
            edges.push((OpKind::Catering, OpKind::Pushback));
        }
    }
    edges
}

/// Precedence edges between the selected operations (given by their op ids,
/// i.e. positions in `ops`) for one aircraft type. The relation is the
/// catalog relation's transitive closure restricted to `ops`, then reduced.
pub fn precedence_edges(ops: &[OpKind], ty: AircraftType) -> Vec<(usize, usize)> {
    let all = OPERATION_CATALOG.len();
    let idx = |k: OpKind| OPERATION_CATALOG.iter().position(|&c| c == k).unwrap();
    let mut reach = vec![vec![false; all]; all];
    for (a, b) in catalog_edges(ty) {
        reach[idx(a)][idx(b)] = true;
    }
    for m in 0..all {
        for i in 0..all {
            if reach[i][m] {
                for j in 0..all {
                    if reach[m][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let sel: Vec<usize> = ops.iter().map(|&k| idx(k)).collect();
    let mut edges = Vec::new();
    for (a, &ca) in sel.iter().enumerate() {
        for (b, &cb) in sel.iter().enumerate() {
            if !reach[ca][cb] {
                continue;
            }
            let implied = sel.iter().any(|&cm| reach[ca][cm] && reach[cm][cb]);
            if !implied {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Kahn ordering of `0..k` under `edges`; `None` if cyclic.
pub(crate) fn topological_order(k: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; k];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..k).rev().filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    (order.len() == k).then_some(order)
}

/// Longest-path depth of every op in the precedence DAG (sources at 0).
pub(crate) fn depths(k: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let order = topological_order(k, edges).expect("precedence relation is acyclic");
    let mut depth = vec![0usize; k];
    for v in order {
        for &(a, b) in edges {
            if a == v {
                depth[b] = depth[b].max(depth[a] + 1);
            }
        }
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_catalog_is_acyclic_for_every_type() {
        for ty in AircraftType::ALL {
            let edges = precedence_edges(&OPERATION_CATALOG, ty);
            assert!(topological_order(10, &edges).is_some(), "{ty}");
        }
    }

    #[test]
    fn first_type_has_five_levels() {
        let edges = precedence_edges(&OPERATION_CATALOG, AircraftType::T1);
        let d = depths(10, &edges);
        assert_eq!(d.iter().max(), Some(&4));
        // fueling, catering and cleaning all precede boarding
        for op in [1, 3, 4] {
            assert!(edges.contains(&(op, 2)));
        }
    }

    #[test]
    fn relaxed_types_free_catering_and_cleaning() {
        let t2 = precedence_edges(&OPERATION_CATALOG, AircraftType::T2);
        assert!(!t2.contains(&(0, 3)));
        assert!(t2.contains(&(3, 2)));
        let t3 = precedence_edges(&OPERATION_CATALOG, AircraftType::T3);
        assert!(!t3.contains(&(0, 4)));
        assert!(!t3.iter().any(|&(a, b)| b == 3 || (a == 3 && b != 5)));
        assert!(t3.contains(&(3, 5)));
    }

    #[test]
    fn subset_keeps_transitive_order() {
        // deboarding, boarding, pushback: bridge removal is dropped but the
        // chain survives through the closure
        let ops = [OpKind::Deboarding, OpKind::Boarding, OpKind::Pushback];
        let edges = precedence_edges(&ops, AircraftType::T1);
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn three_op_prefix_is_a_chain() {
        for ty in AircraftType::ALL {
            let edges = precedence_edges(&OPERATION_CATALOG[..3], ty);
            assert_eq!(edges, vec![(0, 1), (1, 2)], "{ty}");
        }
    }
}
