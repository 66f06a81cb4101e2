//! LP text export and import, plus the `name value` solution file format
//! used to read results back from an external solver.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MilpModel, ModelError, Row, RowFamily, Sense, VarKind, VarMap};

const TERMS_PER_LINE: usize = 8;

impl VarKind {
    /// Inverse of the `Display` naming (`x_i_j_v_k` / `T_i_v_k`).
    pub fn from_name(name: &str) -> Option<Self> {
        let mut parts = name.split('_');
        let tag = parts.next()?;
        let nums: Vec<usize> = parts.map(str::parse).collect::<Result<_, _>>().ok()?;
        match (tag, nums.as_slice()) {
            ("x", &[from, to, vehicle, fleet]) => Some(VarKind::RouteBinary { from, to, vehicle, fleet }),
            ("T", &[node, vehicle, fleet]) => Some(VarKind::StartTime { node, vehicle, fleet }),
            _ => None,
        }
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    for (pos, &(c, a)) in terms.iter().enumerate() {
        if pos > 0 && pos % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        if pos == 0 && sign == '+' {
            let _ = write!(out, " {} {}", a, names[c]);
        } else {
            let _ = write!(out, " {sign} {} {}", a.abs(), names[c]);
        }
    }
}

/// LP-format text for `model`. Every column appears in the Bounds section in
/// column order, which is what lets [`parse_lp`] rebuild the column map.
pub fn export_lp(model: &MilpModel) -> String {
    let names: Vec<String> = (0..model.num_vars()).map(|c| model.vars.kind(c).to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ big_m {}", model.big_m);
    out.push_str("Minimize\n obj:");
    if model.objective.is_empty() && !names.is_empty() {
        write_terms(&mut out, &[(0, 0.0)], &names);
    } else {
        write_terms(&mut out, &model.objective, &names);
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.family.name());
        write_terms(&mut out, &row.coefs, &names);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {sense} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (c, &(lo, hi)) in model.bounds.iter().enumerate() {
        let _ = writeln!(out, " {lo} <= {} <= {hi}", names[c]);
    }
    out.push_str("Generals\n");
    for (c, _) in model.integrality.iter().enumerate().filter(|(_, &i)| i) {
        let _ = writeln!(out, " {}", names[c]);
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, export_lp(model))?;
    Ok(())
}

pub fn read_lp(path: impl AsRef<Path>) -> Result<MilpModel, ModelError> {
    parse_lp(&fs::read_to_string(path)?)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Generals,
    End,
}

fn lp_err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::LpParse { line, message: message.into() }
}

fn number(tok: &str, line: usize) -> Result<f64, ModelError> {
    tok.parse::<f64>().map_err(|_| lp_err(line, format!("expected a number, found '{tok}'")))
}

/// A statement: the line it starts on and its whitespace-split tokens.
type Statement = (usize, Vec<String>);

/// Parses text produced by [`export_lp`] back into a model.
pub fn parse_lp(text: &str) -> Result<MilpModel, ModelError> {
    let mut section = Section::Preamble;
    let mut big_m = super::DEFAULT_BIG_M;
    let mut objective: Vec<Statement> = Vec::new();
    let mut constraints: Vec<Statement> = Vec::new();
    let mut bounds: Vec<Statement> = Vec::new();
    let mut generals: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(comment) = raw.trim_start().strip_prefix('\\') {
            let mut it = comment.split_whitespace();
            if it.next() == Some("big_m") {
                let tok = it.next().ok_or_else(|| lp_err(line, "big_m without value"))?;
                big_m = number(tok, line)?;
            }
            continue;
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let header = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "generals" | "general" | "gen" => Some(Section::Generals),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(h) = header {
            section = h;
            continue;
        }
        let tokens = || trimmed.split_whitespace().map(str::to_owned);
        match section {
            Section::Objective | Section::Constraints => {
                let target = if section == Section::Objective { &mut objective } else { &mut constraints };
                if trimmed.contains(':') {
                    target.push((line, tokens().collect()));
                } else {
                    let last = target.last_mut().ok_or_else(|| lp_err(line, "continuation without a statement"))?;
                    last.1.extend(tokens());
                }
            }
            Section::Bounds => bounds.push((line, tokens().collect())),
            Section::Generals => generals.extend(tokens().map(|t| (line, t))),
            Section::Preamble => return Err(lp_err(line, "content before the objective section")),
            Section::End => return Err(lp_err(line, "content after End")),
        }
    }

    // the Bounds listing fixes the column order
    let mut kinds = Vec::with_capacity(bounds.len());
    let mut var_bounds = Vec::with_capacity(bounds.len());
    for (line, toks) in &bounds {
        let [lo, le1, name, le2, hi] = toks.as_slice() else {
            return Err(lp_err(*line, "expected 'lower <= name <= upper'"));
        };
        if le1 != "<=" || le2 != "<=" {
            return Err(lp_err(*line, "expected 'lower <= name <= upper'"));
        }
        let kind = VarKind::from_name(name).ok_or_else(|| lp_err(*line, format!("unknown column '{name}'")))?;
        kinds.push(kind);
        var_bounds.push((number(lo, *line)?, number(hi, *line)?));
    }
    let vars = infer_var_map(&kinds).ok_or_else(|| lp_err(0, "bounds do not cover a complete column set"))?;
    for (c, kind) in kinds.iter().enumerate() {
        if vars.column(*kind) != Some(c) {
            return Err(lp_err(bounds[c].0, format!("column '{kind}' out of order")));
        }
    }
    let lookup: HashMap<String, usize> = kinds.iter().enumerate().map(|(c, k)| (k.to_string(), c)).collect();
    let column = |name: &str, line: usize| {
        lookup.get(name).copied().ok_or_else(|| lp_err(line, format!("unknown column '{name}'")))
    };

    let mut obj = Vec::new();
    for (line, toks) in &objective {
        let (_, terms, tail) = linear_expr(toks, *line, &column)?;
        if !tail.is_empty() {
            return Err(lp_err(*line, "objective has trailing tokens"));
        }
        obj.extend(terms.into_iter().filter(|&(_, a)| a != 0.0));
    }
    obj.sort_by_key(|&(c, _)| c);

    let mut rows = Vec::with_capacity(constraints.len());
    for (line, toks) in &constraints {
        let (name, mut coefs, tail) = linear_expr(toks, *line, &column)?;
        let family = RowFamily::from_name(&name).ok_or_else(|| lp_err(*line, format!("unknown row '{name}'")))?;
        let [sense, rhs] = tail else {
            return Err(lp_err(*line, "expected '<sense> <rhs>' after the terms"));
        };
        let sense = match sense.as_str() {
            "<=" | "=<" | "<" => Sense::Le,
            "=" => Sense::Eq,
            other => return Err(lp_err(*line, format!("unsupported sense '{other}'"))),
        };
        coefs.sort_by_key(|&(c, _)| c);
        rows.push(Row { family, coefs, sense, rhs: number(rhs, *line)? });
    }

    let mut integrality = vec![false; vars.num_vars()];
    for (line, name) in &generals {
        integrality[column(name, *line)?] = true;
    }

    Ok(MilpModel { vars, objective: obj, rows, bounds: var_bounds, integrality, big_m })
}

/// `name: [+|-] [coef] col ...` up to the first sense token.
fn linear_expr<'t>(
    toks: &'t [String],
    line: usize,
    column: &impl Fn(&str, usize) -> Result<usize, ModelError>,
) -> Result<(String, Vec<(usize, f64)>, &'t [String]), ModelError> {
    let first = toks.first().ok_or_else(|| lp_err(line, "empty statement"))?;
    let name = first.strip_suffix(':').ok_or_else(|| lp_err(line, "statement must start with 'name:'"))?;
    let mut terms = Vec::new();
    let mut i = 1;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while i < toks.len() {
        let t = toks[i].as_str();
        match t {
            "<=" | "=<" | "<" | "=" | ">=" | "=>" | ">" => break,
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => match t.parse::<f64>() {
                Ok(v) => coef = Some(v),
                Err(_) => {
                    terms.push((column(t, line)?, sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            },
        }
        i += 1;
    }
    Ok((name.to_owned(), terms, &toks[i..]))
}

fn infer_var_map(kinds: &[VarKind]) -> Option<VarMap> {
    let mut max_node = 0;
    let mut counts: Vec<usize> = Vec::new();
    for kind in kinds {
        let key = kind.vehicle_key();
        if counts.len() <= key.fleet {
            counts.resize(key.fleet + 1, 0);
        }
        counts[key.fleet] = counts[key.fleet].max(key.vehicle + 1);
        if let VarKind::RouteBinary { from, to, .. } = *kind {
            max_node = max_node.max(from).max(to);
        }
    }
    if max_node == 0 {
        return None;
    }
    let vars = VarMap::new(max_node - 1, &counts);
    (vars.num_vars() == kinds.len()).then_some(vars)
}

/// A solver result: optional status word plus one value per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ValuesFile {
    pub status: Option<String>,
    pub values: Vec<f64>,
}

/// Reads `name value` lines. Columns a solver left out are taken as zero;
/// a `status <word>` line is passed through. `#` starts a comment.
pub fn parse_values(vars: &VarMap, text: &str) -> Result<ValuesFile, ModelError> {
    let mut values = vec![0.0; vars.num_vars()];
    let mut status = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| ModelError::ValuesParse { line, message };
        let mut it = content.split_whitespace();
        let (Some(name), Some(val), None) = (it.next(), it.next(), it.next()) else {
            return Err(err(format!("expected 'name value', found '{content}'")));
        };
        if name == "status" {
            status = Some(val.to_owned());
            continue;
        }
        let c = VarKind::from_name(name)
            .and_then(|k| vars.column(k))
            .ok_or_else(|| err(format!("unknown column '{name}'")))?;
        values[c] = val.parse().map_err(|_| err(format!("bad value '{val}'")))?;
    }
    Ok(ValuesFile { status, values })
}
