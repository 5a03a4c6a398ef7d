//! Size-signature cluster predictor.
//!
//! For heterogeneous instance sets that are too small to train a graph
//! model, instances are grouped by their exact (n_vars, n_cons) signature.
//! Each large-enough group gets the config with the best average gamma over
//! its members; everything else falls into a residual pool with a config
//! chosen the same way.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::milp::MilpInstance;
use crate::perfdb::{best_config_of_row, PerfMatrix};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("instance '{0}' is not a row of the matrix")]
    InstanceNotInMatrix(String),
    #[error("duplicate instance id '{0}'")]
    DuplicateInstance(String),
    #[error("no instances to fit")]
    Empty,
    #[error("model line {line}: {msg}")]
    BadModelLine { line: usize, msg: String },
    #[error("model file has no residual line")]
    MissingResidual,
}

/// Fitted cluster model: signature -> config plus the residual fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterModel {
    pub clusters: BTreeMap<(usize, usize), usize>,
    pub residual: usize,
    pub min_cluster_size: usize,
}

/// Mean gamma per config over a set of matrix rows, then argmin with
/// smallest-id tie-breaking. Rows are visited in ascending index order so
/// the result is independent of caller ordering.
fn best_config_for_rows(matrix: &PerfMatrix, rows: &[usize]) -> usize {
    let width = matrix.n_configs();
    let mut sums = vec![0.0f64; width];
    let mut sorted_rows = rows.to_vec();
    sorted_rows.sort_unstable();
    for &row in &sorted_rows {
        for (col, value) in matrix.row(row).iter().enumerate() {
            sums[col] += value;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / rows.len() as f64).collect();
    best_config_of_row(&means, &matrix.config_ids)
}

/// Group instances by exact (n_vars, n_cons), assign each group of at least
/// `min_cluster_size` members its best-average config, and pool the rest
/// into the residual. An empty residual pool falls back to the global
/// best-average config.
pub fn fit_clusters(
    instances: &[MilpInstance],
    matrix: &PerfMatrix,
    min_cluster_size: usize,
) -> Result<ClusterModel, ClusterError> {
    if instances.is_empty() {
        return Err(ClusterError::Empty);
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for instance in instances {
        if !seen.insert(instance.id.as_str()) {
            return Err(ClusterError::DuplicateInstance(instance.id.clone()));
        }
        let row = matrix
            .instance_index(&instance.id)
            .ok_or_else(|| ClusterError::InstanceNotInMatrix(instance.id.clone()))?;
        groups
            .entry((instance.n_vars(), instance.n_cons()))
            .or_default()
            .push(row);
    }

    let mut clusters = BTreeMap::new();
    let mut residual_rows = Vec::new();
    for (signature, rows) in &groups {
        if rows.len() >= min_cluster_size {
            clusters.insert(*signature, best_config_for_rows(matrix, rows));
        } else {
            residual_rows.extend_from_slice(rows);
        }
    }
    let residual = if residual_rows.is_empty() {
        // Global fallback over every fitted instance.
        let all_rows: Vec<usize> = groups.values().flatten().copied().collect();
        best_config_for_rows(matrix, &all_rows)
    } else {
        best_config_for_rows(matrix, &residual_rows)
    };

    Ok(ClusterModel {
        clusters,
        residual,
        min_cluster_size,
    })
}

/// Exact signature lookup; unseen signatures get the residual config.
pub fn predict_cluster(model: &ClusterModel, instance: &MilpInstance) -> usize {
    model
        .clusters
        .get(&(instance.n_vars(), instance.n_cons()))
        .copied()
        .unwrap_or(model.residual)
}

impl ClusterModel {
    /// Text table export: one (n_vars, n_cons, config_id) line per cluster
    /// plus the residual line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# n_vars\tn_cons\tconfig_id\n");
        out.push_str(&format!("# min_cluster_size\t{}\n", self.min_cluster_size));
        for (&(n_vars, n_cons), &config) in &self.clusters {
            out.push_str(&format!("{n_vars}\t{n_cons}\t{config}\n"));
        }
        out.push_str(&format!("residual\t{}\n", self.residual));
        out
    }

    pub fn from_table(text: &str) -> Result<Self, ClusterError> {
        let mut clusters = BTreeMap::new();
        let mut residual = None;
        let mut min_cluster_size = 0;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| ClusterError::BadModelLine { line: line_no, msg };
            if let Some(rest) = line.strip_prefix("# min_cluster_size\t") {
                min_cluster_size = rest
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad min_cluster_size '{rest}'")))?;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "residual" {
                if fields.len() != 2 {
                    return Err(bad("residual line needs one config id".into()));
                }
                residual = Some(
                    fields[1]
                        .parse()
                        .map_err(|_| bad(format!("bad config id '{}'", fields[1])))?,
                );
                continue;
            }
            if fields.len() != 3 {
                return Err(bad("expected n_vars, n_cons, config_id".into()));
            }
            let n_vars = fields[0]
                .parse()
                .map_err(|_| bad(format!("bad n_vars '{}'", fields[0])))?;
            let n_cons = fields[1]
                .parse()
                .map_err(|_| bad(format!("bad n_cons '{}'", fields[1])))?;
            let config = fields[2]
                .parse()
                .map_err(|_| bad(format!("bad config id '{}'", fields[2])))?;
            clusters.insert((n_vars, n_cons), config);
        }
        Ok(Self {
            clusters,
            residual: residual.ok_or(ClusterError::MissingResidual)?,
            min_cluster_size,
        })
    }
}
