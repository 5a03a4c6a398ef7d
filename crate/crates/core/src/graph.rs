//! Bipartite graph representation of a MILP instance.
//!
//! Variables and constraints are the two node sides; every nonzero of the
//! constraint matrix becomes one edge. Feature layout (schema version 1):
//!
//! * variable node (6): objective coefficient / max |objective|, integrality
//!   flag, has-lower-bound, has-upper-bound, squashed lower bound, squashed
//!   upper bound;
//! * constraint node (4): rhs / row L2 norm, one-hot sense (<=, >=, =);
//! * edge (1): coefficient / row L2 norm.
//!
//! Minimization instances are canonicalized to maximization (objective
//! negated) before featurization so one convention reaches the model. Finite
//! bounds are squashed through `b / (1 + |b|)` into (-1, 1); absent bounds
//! contribute 0 with the flag at 0. A constraint row with no nonzeros has no
//! edges and a bias of `sign(rhs)`.

use serde::{Deserialize, Serialize};

use crate::milp::{ConsSense, MilpInstance, ObjSense};

/// Width of a variable node feature vector.
pub const VAR_FEATURES: usize = 6;
/// Width of a constraint node feature vector.
pub const CONS_FEATURES: usize = 4;

/// Current feature schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Per-instance normalization constants plus the schema version they belong
/// to. Build one with [`FeatureSchema::for_instance`] and hand it to
/// [`to_bipartite`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub version: u32,
    /// Max |objective coefficient| after canonicalization to maximize;
    /// zero when the objective is all zero (divisor unused in that case).
    pub obj_max_abs: f64,
    /// L2 norm of each constraint row; zero for rows without nonzeros
    /// (divisor unused, the row gets the sign(rhs) bias instead).
    pub row_norms: Vec<f64>,
}

impl FeatureSchema {
    /// Compute the normalization constants for one instance.
    pub fn for_instance(instance: &MilpInstance) -> Self {
        let obj_max_abs = instance
            .objective
            .iter()
            .fold(0.0f64, |acc, w| acc.max(w.abs()));
        let row_norms = instance
            .constraints
            .iter()
            .map(|c| c.coeffs.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt())
            .collect();
        Self {
            version: SCHEMA_VERSION,
            obj_max_abs,
            row_norms,
        }
    }
}

/// One nonzero of the constraint matrix as a graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub cons: usize,
    pub var: usize,
    /// Row-normalized coefficient.
    pub coeff: f64,
}

/// The model-facing graph: node feature matrices plus coefficient edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub instance_id: String,
    pub schema_version: u32,
    pub var_features: Vec<[f64; VAR_FEATURES]>,
    pub cons_features: Vec<[f64; CONS_FEATURES]>,
    pub edges: Vec<Edge>,
}

impl BipartiteGraph {
    pub fn n_vars(&self) -> usize {
        self.var_features.len()
    }

    pub fn n_cons(&self) -> usize {
        self.cons_features.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

fn squash(bound: f64) -> f64 {
    bound / (1.0 + bound.abs())
}

/// Extract the bipartite graph of `instance` under `schema`.
///
/// `schema` must come from [`FeatureSchema::for_instance`] on the same
/// instance; the constants are what make featurization deterministic and
/// cheap to audit.
pub fn to_bipartite(instance: &MilpInstance, schema: &FeatureSchema) -> BipartiteGraph {
    assert_eq!(
        schema.row_norms.len(),
        instance.n_cons(),
        "schema does not match instance"
    );
    let obj_sign = match instance.sense {
        ObjSense::Maximize => 1.0,
        ObjSense::Minimize => -1.0,
    };

    let var_features = (0..instance.n_vars())
        .map(|j| {
            let w = obj_sign * instance.objective[j];
            let obj_norm = if schema.obj_max_abs > 0.0 {
                w / schema.obj_max_abs
            } else {
                0.0
            };
            let lb = instance.var_lb[j];
            let ub = instance.var_ub[j];
            [
                obj_norm,
                if instance.var_types[j].is_integral() { 1.0 } else { 0.0 },
                if lb.is_some() { 1.0 } else { 0.0 },
                if ub.is_some() { 1.0 } else { 0.0 },
                lb.map_or(0.0, squash),
                ub.map_or(0.0, squash),
            ]
        })
        .collect();

    let mut edges = Vec::with_capacity(instance.nnz());
    let cons_features = instance
        .constraints
        .iter()
        .enumerate()
        .map(|(i, cons)| {
            let norm = schema.row_norms[i];
            let bias = if norm > 0.0 {
                for &(col, val) in &cons.coeffs {
                    edges.push(Edge {
                        cons: i,
                        var: col,
                        coeff: val / norm,
                    });
                }
                cons.rhs / norm
            } else {
                // Empty row: keep the node, no edges, bias is the rhs sign.
                if cons.rhs > 0.0 {
                    1.0
                } else if cons.rhs < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            };
            let (le, ge, eq) = match cons.sense {
                ConsSense::Le => (1.0, 0.0, 0.0),
                ConsSense::Ge => (0.0, 1.0, 0.0),
                ConsSense::Eq => (0.0, 0.0, 1.0),
            };
            [bias, le, ge, eq]
        })
        .collect();

    BipartiteGraph {
        instance_id: instance.id.clone(),
        schema_version: schema.version,
        var_features,
        cons_features,
        edges,
    }
}

/// Node and edge counts of a graph.
pub fn graph_stats(graph: &BipartiteGraph) -> (usize, usize, usize) {
    (graph.n_vars(), graph.n_cons(), graph.n_edges())
}
