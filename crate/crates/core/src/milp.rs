//! MILP instance model and the canonical JSON instance format.
//!
//! An instance is `max/min w^T x` subject to sparse linear constraints with
//! senses `<=`, `>=`, `=`, optional variable bounds and per-variable
//! integrality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("malformed instance document: {0}")]
    Malformed(String),
    #[error("{path}: column index {index} out of range (n_vars = {n_vars})")]
    IndexOutOfRange {
        path: String,
        index: usize,
        n_vars: usize,
    },
    #[error("{path}: duplicate column index {index}")]
    DuplicateColumn { path: String, index: usize },
    #[error("lb > ub at variable {index} ({lb} > {ub})")]
    BoundOrder { index: usize, lb: f64, ub: f64 },
    #[error("{path}: length {actual} does not match n_vars = {expected}")]
    LengthMismatch {
        path: String,
        actual: usize,
        expected: usize,
    },
    #[error("{path}: value must be finite, got {value}")]
    NonFinite { path: String, value: f64 },
}

/// Objective sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjSense {
    Maximize,
    Minimize,
}

/// Variable domain type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Continuous,
    Integer,
    Binary,
}

impl VarType {
    pub fn is_integral(self) -> bool {
        matches!(self, VarType::Integer | VarType::Binary)
    }
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// One sparse constraint row: `sum(coeffs) sense rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse (column, coefficient) pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: ConsSense,
    pub rhs: f64,
}

/// A mixed integer linear program: objective `w`, constraint matrix `A` and
/// right-hand side `b` stored as sparse rows, variable types and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub id: String,
    pub sense: ObjSense,
    /// Objective coefficients, length defines the number of variables.
    pub objective: Vec<f64>,
    pub var_types: Vec<VarType>,
    pub var_lb: Vec<Option<f64>>,
    pub var_ub: Vec<Option<f64>>,
    pub constraints: Vec<Constraint>,
}

impl MilpInstance {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_cons(&self) -> usize {
        self.constraints.len()
    }

    /// Number of nonzero coefficients in the constraint matrix.
    pub fn nnz(&self) -> usize {
        self.constraints.iter().map(|c| c.coeffs.len()).sum()
    }

    /// Check all structural invariants: array lengths, index ranges, no
    /// duplicate columns within a row, bound order, finite data.
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.n_vars();
        for (name, len) in [
            ("var_types", self.var_types.len()),
            ("var_lb", self.var_lb.len()),
            ("var_ub", self.var_ub.len()),
        ] {
            if len != n {
                return Err(MilpError::LengthMismatch {
                    path: name.to_string(),
                    actual: len,
                    expected: n,
                });
            }
        }
        for (j, w) in self.objective.iter().enumerate() {
            if !w.is_finite() {
                return Err(MilpError::NonFinite {
                    path: format!("objective[{j}]"),
                    value: *w,
                });
            }
        }
        for j in 0..n {
            if let Some(lb) = self.var_lb[j] {
                if !lb.is_finite() {
                    return Err(MilpError::NonFinite {
                        path: format!("var_lb[{j}]"),
                        value: lb,
                    });
                }
            }
            if let Some(ub) = self.var_ub[j] {
                if !ub.is_finite() {
                    return Err(MilpError::NonFinite {
                        path: format!("var_ub[{j}]"),
                        value: ub,
                    });
                }
            }
            if let (Some(lb), Some(ub)) = (self.var_lb[j], self.var_ub[j]) {
                if lb > ub {
                    return Err(MilpError::BoundOrder { index: j, lb, ub });
                }
            }
        }
        let mut seen = vec![usize::MAX; n];
        for (i, cons) in self.constraints.iter().enumerate() {
            if !cons.rhs.is_finite() {
                return Err(MilpError::NonFinite {
                    path: format!("constraints[{i}].rhs"),
                    value: cons.rhs,
                });
            }
            for (k, &(col, val)) in cons.coeffs.iter().enumerate() {
                let path = format!("constraints[{i}].coeffs[{k}]");
                if col >= n {
                    return Err(MilpError::IndexOutOfRange {
                        path,
                        index: col,
                        n_vars: n,
                    });
                }
                if !val.is_finite() {
                    return Err(MilpError::NonFinite { path, value: val });
                }
                if seen[col] == i {
                    return Err(MilpError::DuplicateColumn { path, index: col });
                }
                seen[col] = i;
            }
        }
        Ok(())
    }
}

/// Parse the canonical JSON instance format and validate all invariants.
pub fn parse_milp_json(bytes: &[u8]) -> Result<MilpInstance, MilpError> {
    let instance: MilpInstance =
        serde_json::from_slice(bytes).map_err(|e| MilpError::Malformed(e.to_string()))?;
    instance.validate()?;
    Ok(instance)
}

/// Serialize an instance to the canonical JSON format.
///
/// `parse_milp_json(emit_milp_json(x)) == x` for any valid instance; JSON
/// floats round-trip exactly.
pub fn emit_milp_json(instance: &MilpInstance) -> String {
    let mut out = serde_json::to_string_pretty(instance).expect("instance serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var_doc() -> &'static str {
        r#"{
            "id": "tiny",
            "sense": "maximize",
            "objective": [1.0, 1.0],
            "var_types": ["integer", "continuous"],
            "var_lb": [0.0, null],
            "var_ub": [null, 3.0],
            "constraints": [
                { "coeffs": [[0, 1.0], [1, 2.0]], "sense": "<=", "rhs": 4.0 }
            ]
        }"#
    }

    #[test]
    fn parses_two_var_one_cons() {
        let inst = parse_milp_json(two_var_doc().as_bytes()).unwrap();
        assert_eq!(inst.n_vars(), 2);
        assert_eq!(inst.n_cons(), 1);
        assert_eq!(inst.constraints[0].coeffs, vec![(0, 1.0), (1, 2.0)]);
        assert_eq!(inst.constraints[0].rhs, 4.0);
        assert_eq!(inst.constraints[0].sense, ConsSense::Le);
    }

    #[test]
    fn empty_constraints_is_valid() {
        let doc = r#"{
            "id": "nocons", "sense": "minimize",
            "objective": [2.0], "var_types": ["continuous"],
            "var_lb": [null], "var_ub": [null], "constraints": []
        }"#;
        let inst = parse_milp_json(doc.as_bytes()).unwrap();
        assert_eq!(inst.n_cons(), 0);
        assert_eq!(inst.nnz(), 0);
    }

    #[test]
    fn lb_above_ub_is_rejected() {
        let doc = r#"{
            "id": "bad", "sense": "maximize",
            "objective": [1.0], "var_types": ["continuous"],
            "var_lb": [1.0], "var_ub": [0.0], "constraints": []
        }"#;
        let err = parse_milp_json(doc.as_bytes()).unwrap_err();
        assert!(
            err.to_string().contains("lb > ub at variable 0"),
            "unexpected error: {err}"
        );
    }

    #[test]
    fn column_out_of_range_names_the_path() {
        let doc = r#"{
            "id": "bad", "sense": "maximize",
            "objective": [1.0, 1.0], "var_types": ["continuous", "continuous"],
            "var_lb": [null, null], "var_ub": [null, null],
            "constraints": [{ "coeffs": [[5, 1.0]], "sense": "<=", "rhs": 0.0 }]
        }"#;
        let err = parse_milp_json(doc.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("constraints[0].coeffs[0]"), "{msg}");
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn duplicate_column_in_row_is_rejected() {
        let doc = r#"{
            "id": "dup", "sense": "maximize",
            "objective": [1.0, 1.0], "var_types": ["continuous", "continuous"],
            "var_lb": [null, null], "var_ub": [null, null],
            "constraints": [{ "coeffs": [[0, 1.0], [0, 2.0]], "sense": "<=", "rhs": 1.0 }]
        }"#;
        let err = parse_milp_json(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate column"), "{err}");
    }

    #[test]
    fn malformed_document_reports_parse_error() {
        let err = parse_milp_json(b"{ not json").unwrap_err();
        assert!(matches!(err, MilpError::Malformed(_)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = parse_milp_json(two_var_doc().as_bytes()).unwrap();
        let again = parse_milp_json(emit_milp_json(&inst).as_bytes()).unwrap();
        assert_eq!(inst, again);
    }
}
