//! MPS reader.
//!
//! Accepts fixed- and free-format MPS (whitespace-delimited tokens) with the
//! sections NAME, OBJSENSE, ROWS, COLUMNS (including `MARKER
//! INTORG`/`INTEND`), RHS, RANGES, BOUNDS and ENDATA. Anything else is
//! rejected, never skipped silently.
//!
//! Conventions:
//! * default bounds are `0 <= x < +inf`; `BOUNDS` keys override them;
//! * a `RANGES` entry replaces its row by two one-sided rows (the original
//!   sense first, the implied companion immediately after);
//! * the first `N` row is the objective; further `N` rows are free rows whose
//!   column entries are ignored;
//! * the objective sense defaults to minimize, `OBJSENSE MAX` flips it.

use std::collections::HashMap;

use thiserror::Error;

use crate::milp::{ConsSense, Constraint, MilpInstance, ObjSense, VarType};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: unknown section '{name}'")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown row type '{ty}'")]
    UnknownRowType { line: usize, ty: String },
    #[error("line {line}: reference to undeclared row '{name}'")]
    UndeclaredRow { line: usize, name: String },
    #[error("line {line}: reference to undeclared column '{name}'")]
    UndeclaredColumn { line: usize, name: String },
    #[error("line {line}: unsupported bound key '{key}'")]
    UnsupportedBoundKey { line: usize, key: String },
    #[error("line {line}: expected a number, got '{token}'")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("missing ROWS section")]
    MissingRows,
    #[error("instance invalid after parse: {0}")]
    Invalid(#[from] crate::milp::MilpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objsense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Free,
    Cons(ConsSense),
}

struct RowData {
    kind: RowKind,
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    range: Option<f64>,
}

/// Parse MPS bytes into a [`MilpInstance`].
pub fn parse_mps(bytes: &[u8]) -> Result<MilpInstance, MpsError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MpsError::NotUtf8)?;

    let mut name = String::from("mps-instance");
    let mut sense = ObjSense::Minimize;
    let mut section = Section::Preamble;

    let mut row_names: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<RowData> = Vec::new();
    let mut objective_row: Option<usize> = None;

    let mut col_names: HashMap<String, usize> = HashMap::new();
    let mut col_objective: Vec<f64> = Vec::new();
    let mut col_types: Vec<VarType> = Vec::new();
    let mut col_lb: Vec<Option<f64>> = Vec::new();
    let mut col_ub: Vec<Option<f64>> = Vec::new();
    let mut integer_mode = false;

    let parse_num = |token: &str, line: usize| -> Result<f64, MpsError> {
        token.parse::<f64>().map_err(|_| MpsError::BadNumber {
            line,
            token: token.to_string(),
        })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let tokens: Vec<&str> = raw.split_whitespace().collect();

        if is_header {
            let head = tokens[0].to_ascii_uppercase();
            match head.as_str() {
                "NAME" => {
                    if tokens.len() > 1 {
                        name = tokens[1].to_string();
                    }
                    continue;
                }
                "OBJSENSE" => {
                    // Sense may share the header line or follow on its own.
                    if tokens.len() > 1 {
                        sense = parse_objsense(tokens[1], line_no)?;
                        section = Section::Preamble;
                    } else {
                        section = Section::Objsense;
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "RANGES" => {
                    section = Section::Ranges;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "ENDATA" => break,
                other => {
                    return Err(MpsError::UnknownSection {
                        line: line_no,
                        name: other.to_string(),
                    });
                }
            }
        }

        match section {
            Section::Objsense => {
                sense = parse_objsense(tokens[0], line_no)?;
                section = Section::Preamble;
            }
            Section::Rows => {
                if tokens.len() < 2 {
                    return Err(MpsError::Syntax {
                        line: line_no,
                        msg: "ROWS entry needs a type and a name".into(),
                    });
                }
                let kind = match tokens[0].to_ascii_uppercase().as_str() {
                    "N" => RowKind::Free,
                    "L" => RowKind::Cons(ConsSense::Le),
                    "G" => RowKind::Cons(ConsSense::Ge),
                    "E" => RowKind::Cons(ConsSense::Eq),
                    other => {
                        return Err(MpsError::UnknownRowType {
                            line: line_no,
                            ty: other.to_string(),
                        });
                    }
                };
                let row_name = tokens[1].to_string();
                let row_idx = rows.len();
                rows.push(RowData {
                    kind,
                    coeffs: Vec::new(),
                    rhs: 0.0,
                    range: None,
                });
                row_names.insert(row_name, row_idx);
                if matches!(kind, RowKind::Free) && objective_row.is_none() {
                    objective_row = Some(row_idx);
                }
            }
            Section::Columns => {
                // MARKER lines toggle integrality for following columns.
                if tokens.iter().any(|t| t.trim_matches('\'') == "MARKER") {
                    if tokens.iter().any(|t| t.trim_matches('\'') == "INTORG") {
                        integer_mode = true;
                    } else if tokens.iter().any(|t| t.trim_matches('\'') == "INTEND") {
                        integer_mode = false;
                    } else {
                        return Err(MpsError::Syntax {
                            line: line_no,
                            msg: "MARKER without INTORG/INTEND".into(),
                        });
                    }
                    continue;
                }
                if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
                    return Err(MpsError::Syntax {
                        line: line_no,
                        msg: "COLUMNS entry needs a column name and (row, value) pairs".into(),
                    });
                }
                let col = *col_names.entry(tokens[0].to_string()).or_insert_with(|| {
                    col_objective.push(0.0);
                    col_types.push(if integer_mode {
                        VarType::Integer
                    } else {
                        VarType::Continuous
                    });
                    col_lb.push(Some(0.0));
                    col_ub.push(None);
                    col_objective.len() - 1
                });
                for pair in tokens[1..].chunks(2) {
                    let row_idx = *row_names.get(pair[0]).ok_or_else(|| MpsError::UndeclaredRow {
                        line: line_no,
                        name: pair[0].to_string(),
                    })?;
                    let value = parse_num(pair[1], line_no)?;
                    if Some(row_idx) == objective_row {
                        col_objective[col] = value;
                    } else if matches!(rows[row_idx].kind, RowKind::Cons(_)) {
                        rows[row_idx].coeffs.push((col, value));
                    }
                    // Entries on extra free rows are ignored.
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
                    return Err(MpsError::Syntax {
                        line: line_no,
                        msg: "RHS entry needs a set name and (row, value) pairs".into(),
                    });
                }
                for pair in tokens[1..].chunks(2) {
                    let row_idx = *row_names.get(pair[0]).ok_or_else(|| MpsError::UndeclaredRow {
                        line: line_no,
                        name: pair[0].to_string(),
                    })?;
                    let value = parse_num(pair[1], line_no)?;
                    // RHS on the objective row is a constant offset; it does
                    // not change the feasible region so it is dropped.
                    if matches!(rows[row_idx].kind, RowKind::Cons(_)) {
                        rows[row_idx].rhs = value;
                    }
                }
            }
            Section::Ranges => {
                if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
                    return Err(MpsError::Syntax {
                        line: line_no,
                        msg: "RANGES entry needs a set name and (row, value) pairs".into(),
                    });
                }
                for pair in tokens[1..].chunks(2) {
                    let row_idx = *row_names.get(pair[0]).ok_or_else(|| MpsError::UndeclaredRow {
                        line: line_no,
                        name: pair[0].to_string(),
                    })?;
                    if matches!(rows[row_idx].kind, RowKind::Free) {
                        return Err(MpsError::Syntax {
                            line: line_no,
                            msg: format!("RANGES on free row '{}'", pair[0]),
                        });
                    }
                    rows[row_idx].range = Some(parse_num(pair[1], line_no)?);
                }
            }
            Section::Bounds => {
                let key = tokens[0].to_ascii_uppercase();
                let needs_value = matches!(key.as_str(), "UP" | "LO" | "FX" | "UI" | "LI");
                let min_tokens = if needs_value { 4 } else { 3 };
                if tokens.len() < min_tokens {
                    return Err(MpsError::Syntax {
                        line: line_no,
                        msg: format!("BOUNDS entry '{key}' is incomplete"),
                    });
                }
                let col_name = tokens[2];
                let col = *col_names
                    .get(col_name)
                    .ok_or_else(|| MpsError::UndeclaredColumn {
                        line: line_no,
                        name: col_name.to_string(),
                    })?;
                let value = if needs_value {
                    Some(parse_num(tokens[3], line_no)?)
                } else {
                    None
                };
                match key.as_str() {
                    "UP" => col_ub[col] = value,
                    "LO" => col_lb[col] = value,
                    "FX" => {
                        col_lb[col] = value;
                        col_ub[col] = value;
                    }
                    "FR" => {
                        col_lb[col] = None;
                        col_ub[col] = None;
                    }
                    "MI" => col_lb[col] = None,
                    "PL" => col_ub[col] = None,
                    "BV" => {
                        col_types[col] = VarType::Binary;
                        col_lb[col] = Some(0.0);
                        col_ub[col] = Some(1.0);
                    }
                    "UI" => {
                        col_types[col] = VarType::Integer;
                        col_ub[col] = value;
                    }
                    "LI" => {
                        col_types[col] = VarType::Integer;
                        col_lb[col] = value;
                    }
                    other => {
                        return Err(MpsError::UnsupportedBoundKey {
                            line: line_no,
                            key: other.to_string(),
                        });
                    }
                }
            }
            Section::Preamble => {
                return Err(MpsError::Syntax {
                    line: line_no,
                    msg: "data before any section header".into(),
                });
            }
        }
    }

    if rows.is_empty() && row_names.is_empty() {
        return Err(MpsError::MissingRows);
    }

    // Expand each ranged row into its (original, companion) pair in place.
    let mut constraints = Vec::new();
    for row in &rows {
        let RowKind::Cons(row_sense) = row.kind else {
            continue;
        };
        constraints.push(Constraint {
            coeffs: row.coeffs.clone(),
            sense: row_sense,
            rhs: row.rhs,
        });
        if let Some(range) = row.range {
            let (companion_sense, companion_rhs) = match row_sense {
                ConsSense::Le => (ConsSense::Ge, row.rhs - range.abs()),
                ConsSense::Ge => (ConsSense::Le, row.rhs + range.abs()),
                ConsSense::Eq => {
                    // E row with range r: b <= ax <= b + r for r >= 0,
                    // b + r <= ax <= b otherwise.
                    let last = constraints.last_mut().expect("just pushed");
                    if range >= 0.0 {
                        last.sense = ConsSense::Ge;
                        (ConsSense::Le, row.rhs + range)
                    } else {
                        last.sense = ConsSense::Le;
                        (ConsSense::Ge, row.rhs + range)
                    }
                }
            };
            constraints.push(Constraint {
                coeffs: row.coeffs.clone(),
                sense: companion_sense,
                rhs: companion_rhs,
            });
        }
    }

    let instance = MilpInstance {
        id: name,
        sense,
        objective: col_objective,
        var_types: col_types,
        var_lb: col_lb,
        var_ub: col_ub,
        constraints,
    };
    instance.validate()?;
    Ok(instance)
}

fn parse_objsense(token: &str, line: usize) -> Result<ObjSense, MpsError> {
    match token.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(ObjSense::Maximize),
        "MIN" | "MINIMIZE" => Ok(ObjSense::Minimize),
        other => Err(MpsError::Syntax {
            line,
            msg: format!("unknown objective sense '{other}'"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{emit_milp_json, parse_milp_json};

    const MINIMAL: &str = "\
NAME          tiny
ROWS
 N  COST
 L  LIM1
COLUMNS
    X1        COST      1.0        LIM1      2.0
    X2        COST      3.0        LIM1      4.0
RHS
    RHS1      LIM1      10.0
ENDATA
";

    #[test]
    fn parses_minimal_le_instance() {
        let inst = parse_mps(MINIMAL.as_bytes()).unwrap();
        assert_eq!(inst.id, "tiny");
        assert_eq!(inst.sense, ObjSense::Minimize);
        assert_eq!(inst.n_vars(), 2);
        assert_eq!(inst.objective, vec![1.0, 3.0]);
        assert_eq!(inst.var_types, vec![VarType::Continuous, VarType::Continuous]);
        assert_eq!(inst.n_cons(), 1);
        assert_eq!(inst.constraints[0].coeffs, vec![(0, 2.0), (1, 4.0)]);
        assert_eq!(inst.constraints[0].sense, ConsSense::Le);
        assert_eq!(inst.constraints[0].rhs, 10.0);
        // MPS default bounds.
        assert_eq!(inst.var_lb, vec![Some(0.0), Some(0.0)]);
        assert_eq!(inst.var_ub, vec![None, None]);
    }

    #[test]
    fn intorg_marker_types_integer() {
        let doc = "\
NAME m
ROWS
 N obj
 G r1
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    X1        obj       1.0        r1        1.0
    MARKER                 'MARKER'                 'INTEND'
    X2        obj       1.0        r1        1.0
RHS
    rhs       r1        1.0
ENDATA
";
        let inst = parse_mps(doc.as_bytes()).unwrap();
        assert_eq!(inst.var_types, vec![VarType::Integer, VarType::Continuous]);
        assert_eq!(inst.constraints[0].sense, ConsSense::Ge);
    }

    #[test]
    fn objsense_max_and_bounds() {
        let doc = "\
NAME m
OBJSENSE
    MAX
ROWS
 N obj
 L r1
COLUMNS
    X1        obj       2.0        r1        1.0
    X2        obj       1.0        r1        1.0
RHS
    rhs       r1        5.0
BOUNDS
 UP bnd       X1        4.0
 MI bnd       X2
 BV bnd       X1
ENDATA
";
        let inst = parse_mps(doc.as_bytes()).unwrap();
        assert_eq!(inst.sense, ObjSense::Maximize);
        // BV overrode the earlier UP.
        assert_eq!(inst.var_types[0], VarType::Binary);
        assert_eq!(inst.var_lb[0], Some(0.0));
        assert_eq!(inst.var_ub[0], Some(1.0));
        assert_eq!(inst.var_lb[1], None);
    }

    #[test]
    fn ranges_expand_to_two_rows() {
        let doc = "\
NAME m
ROWS
 N obj
 L r1
 E r2
COLUMNS
    X1        obj       1.0        r1        1.0
    X1        r2        3.0
RHS
    rhs       r1        8.0        r2        6.0
RANGES
    rng       r1        2.0        r2        1.5
ENDATA
";
        let inst = parse_mps(doc.as_bytes()).unwrap();
        assert_eq!(inst.n_cons(), 4);
        // L row: ax <= 8 and ax >= 8 - |2| = 6.
        assert_eq!(inst.constraints[0].sense, ConsSense::Le);
        assert_eq!(inst.constraints[0].rhs, 8.0);
        assert_eq!(inst.constraints[1].sense, ConsSense::Ge);
        assert_eq!(inst.constraints[1].rhs, 6.0);
        // E row with positive range: 6 <= ax <= 7.5.
        assert_eq!(inst.constraints[2].sense, ConsSense::Ge);
        assert_eq!(inst.constraints[2].rhs, 6.0);
        assert_eq!(inst.constraints[3].sense, ConsSense::Le);
        assert_eq!(inst.constraints[3].rhs, 7.5);
    }

    #[test]
    fn unknown_section_is_rejected() {
        let doc = "NAME m\nROWS\n N obj\nSOS\n S1 s1 x 1\nENDATA\n";
        let err = parse_mps(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, MpsError::UnknownSection { name, .. } if name == "SOS"));
    }

    #[test]
    fn undeclared_row_is_rejected() {
        let doc = "\
NAME m
ROWS
 N obj
COLUMNS
    X1        nosuch    1.0
ENDATA
";
        let err = parse_mps(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, MpsError::UndeclaredRow { name, .. } if name == "nosuch"));
    }

    #[test]
    fn unsupported_bound_key_is_rejected() {
        let doc = "\
NAME m
ROWS
 N obj
 L r1
COLUMNS
    X1        obj       1.0        r1        1.0
RHS
    rhs       r1        1.0
BOUNDS
 SC bnd       X1        2.0
ENDATA
";
        let err = parse_mps(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, MpsError::UnsupportedBoundKey { key, .. } if key == "SC"));
    }

    // Round-trip oracle: parse, re-export in the canonical format, parse
    // again; the two parses must agree exactly.
    #[test]
    fn canonical_reexport_round_trips() {
        for doc in [
            MINIMAL,
            "\
NAME m2
OBJSENSE MAX
ROWS
 N obj
 L r1
 G r2
 E r3
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    X1        obj       1.5        r1        1.0
    X1        r2        2.0        r3        -1.0
    MARKER                 'MARKER'                 'INTEND'
    X2        obj       -0.25      r1        3.0
RHS
    rhs       r1        7.0        r2        1.0
RANGES
    rng       r1        4.0
BOUNDS
 UP bnd       X1        9.0
 FR bnd       X2
ENDATA
",
        ] {
            let first = parse_mps(doc.as_bytes()).unwrap();
            let again = parse_milp_json(emit_milp_json(&first).as_bytes()).unwrap();
            assert_eq!(first, again);
        }
    }
}
