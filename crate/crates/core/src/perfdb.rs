//! Performance record store and the instance × configuration matrix.
//!
//! Raw runs are triplets (instance, config, seed) with a measured
//! primal-dual integral. The store is a line-delimited text file, one record
//! per line:
//!
//! ```text
//! instance_id <TAB> config_id <TAB> seed <TAB> gamma <TAB> status
//! ```
//!
//! Gammas are serialized with Rust's shortest round-trip float formatting,
//! so load(append(x)) is exact. Aggregation averages over seeds and fails
//! loudly on missing cells; no imputation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("record {index}: instance id contains a tab or line break")]
    BadInstanceId { index: usize },
    #[error("record {index}: gamma must be finite and >= 0 for ok records, got {gamma}")]
    BadGamma { index: usize, gamma: f64 },
    #[error("line {line}: expected 5 tab-separated fields")]
    BadLine { line: usize },
    #[error("line {line}: {field} does not parse: '{token}'")]
    BadField {
        line: usize,
        field: &'static str,
        token: String,
    },
    #[error("line {line}: gamma is not finite")]
    NonFiniteGamma { line: usize },
    #[error("duplicate record for ({instance}, {config}, seed {seed})")]
    DuplicateTriple {
        instance: String,
        config: usize,
        seed: u64,
    },
    #[error("no ok record for ({instance}, config {config})")]
    MissingCell { instance: String, config: usize },
    #[error("unknown instance '{0}'")]
    UnknownInstance(String),
    #[error("matrix has no configs")]
    NoConfigs,
    #[error("no records cover the expected configs")]
    NoInstances,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Outcome of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Error,
    Timeout,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Error => "error",
            RunStatus::Timeout => "timeout",
        })
    }
}

/// One measured run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfRecord {
    pub instance_id: String,
    pub config_id: usize,
    pub seed: u64,
    /// Primal-dual integral (bound-gap × seconds); meaningful when status is ok.
    pub gamma: f64,
    pub status: RunStatus,
}

impl PerfRecord {
    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\n",
            self.instance_id, self.config_id, self.seed, self.gamma, self.status
        )
    }
}

/// Append records to a store file; each record is written as one atomic line.
pub fn append_records(path: &Path, records: &[PerfRecord]) -> Result<(), PerfError> {
    let io_err = |source| PerfError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    for (index, record) in records.iter().enumerate() {
        if record.instance_id.contains('\t') || record.instance_id.contains('\n') {
            return Err(PerfError::BadInstanceId { index });
        }
        if record.status == RunStatus::Ok && !(record.gamma.is_finite() && record.gamma >= 0.0) {
            return Err(PerfError::BadGamma {
                index,
                gamma: record.gamma,
            });
        }
        file.write_all(record.to_line().as_bytes()).map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

/// Load all records from a store file, in file order. A missing file is an
/// empty store.
pub fn load_records(path: &Path) -> Result<Vec<PerfRecord>, PerfError> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(PerfError::Io {
                path: path.display().to_string(),
                source,
            });
        }
    };
    parse_records(&text)
}

/// Parse store text; line numbers are 1-based in errors.
pub fn parse_records(text: &str) -> Result<Vec<PerfRecord>, PerfError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(PerfError::BadLine { line: line_no });
        }
        let config_id = fields[1].parse().map_err(|_| PerfError::BadField {
            line: line_no,
            field: "config_id",
            token: fields[1].to_string(),
        })?;
        let seed = fields[2].parse().map_err(|_| PerfError::BadField {
            line: line_no,
            field: "seed",
            token: fields[2].to_string(),
        })?;
        let gamma: f64 = fields[3].parse().map_err(|_| PerfError::BadField {
            line: line_no,
            field: "gamma",
            token: fields[3].to_string(),
        })?;
        if !gamma.is_finite() {
            return Err(PerfError::NonFiniteGamma { line: line_no });
        }
        let status = match fields[4] {
            "ok" => RunStatus::Ok,
            "error" => RunStatus::Error,
            "timeout" => RunStatus::Timeout,
            other => {
                return Err(PerfError::BadField {
                    line: line_no,
                    field: "status",
                    token: other.to_string(),
                });
            }
        };
        records.push(PerfRecord {
            instance_id: fields[0].to_string(),
            config_id,
            seed,
            gamma,
            status,
        });
    }
    Ok(records)
}

/// Dense instance × configuration table of seed-averaged gammas.
///
/// Rows are sorted by instance id, columns follow the config order given to
/// [`aggregate`], so the matrix is independent of record order.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfMatrix {
    pub instance_ids: Vec<String>,
    pub config_ids: Vec<usize>,
    values: Vec<f64>,
    seed_counts: Vec<u32>,
}

impl PerfMatrix {
    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_configs(&self) -> usize {
        self.config_ids.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_configs() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.n_configs();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn seed_count(&self, row: usize, col: usize) -> u32 {
        self.seed_counts[row * self.n_configs() + col]
    }

    pub fn instance_index(&self, instance_id: &str) -> Option<usize> {
        self.instance_ids
            .binary_search_by(|id| id.as_str().cmp(instance_id))
            .ok()
    }

    pub fn config_index(&self, config_id: usize) -> Option<usize> {
        self.config_ids.iter().position(|&c| c == config_id)
    }

    /// Build a matrix directly from per-cell values; rows are sorted by
    /// instance id internally. Intended for tests and in-memory pipelines.
    pub fn from_rows(
        mut named_rows: Vec<(String, Vec<f64>)>,
        config_ids: Vec<usize>,
    ) -> Self {
        named_rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut values = Vec::with_capacity(named_rows.len() * config_ids.len());
        let mut instance_ids = Vec::with_capacity(named_rows.len());
        for (id, row) in named_rows {
            assert_eq!(row.len(), config_ids.len(), "row width mismatch");
            instance_ids.push(id);
            values.extend(row);
        }
        let seed_counts = vec![1; values.len()];
        Self {
            instance_ids,
            config_ids,
            values,
            seed_counts,
        }
    }
}

/// Aggregate raw records into a complete matrix over `expected_configs`.
///
/// Every (instance, config) cell must have at least one ok record; the cell
/// value is the arithmetic mean of its ok gammas over seeds. Records for
/// configs outside `expected_configs` are ignored. Duplicate (instance,
/// config, seed) ok-triples are rejected. Failed runs are excluded and
/// surface as missing cells if nothing ok remains.
pub fn aggregate(
    records: &[PerfRecord],
    expected_configs: &[usize],
) -> Result<PerfMatrix, PerfError> {
    if expected_configs.is_empty() {
        return Err(PerfError::NoConfigs);
    }
    let config_set: BTreeMap<usize, usize> = expected_configs
        .iter()
        .enumerate()
        .map(|(pos, &id)| (id, pos))
        .collect();

    // Instance set: anything mentioned for an expected config, any status.
    let mut instance_set: BTreeSet<&str> = BTreeSet::new();
    for record in records {
        if config_set.contains_key(&record.config_id) {
            instance_set.insert(&record.instance_id);
        }
    }
    if instance_set.is_empty() {
        return Err(PerfError::NoInstances);
    }
    let instance_ids: Vec<String> = instance_set.iter().map(|s| s.to_string()).collect();
    let row_of: BTreeMap<&str, usize> = instance_ids
        .iter()
        .enumerate()
        .map(|(row, id)| (id.as_str(), row))
        .collect();

    // Per-cell (seed -> gamma); BTreeMap gives a canonical summation order.
    let n_cells = instance_ids.len() * expected_configs.len();
    let mut cells: Vec<BTreeMap<u64, f64>> = vec![BTreeMap::new(); n_cells];
    for record in records {
        if record.status != RunStatus::Ok {
            continue;
        }
        let Some(&col) = config_set.get(&record.config_id) else {
            continue;
        };
        let row = row_of[record.instance_id.as_str()];
        let cell = &mut cells[row * expected_configs.len() + col];
        if cell.insert(record.seed, record.gamma).is_some() {
            return Err(PerfError::DuplicateTriple {
                instance: record.instance_id.clone(),
                config: record.config_id,
                seed: record.seed,
            });
        }
    }

    let mut values = Vec::with_capacity(n_cells);
    let mut seed_counts = Vec::with_capacity(n_cells);
    for (row, instance) in instance_ids.iter().enumerate() {
        for (col, &config) in expected_configs.iter().enumerate() {
            let cell = &cells[row * expected_configs.len() + col];
            if cell.is_empty() {
                return Err(PerfError::MissingCell {
                    instance: instance.clone(),
                    config,
                });
            }
            let sum: f64 = cell.values().sum();
            values.push(sum / cell.len() as f64);
            seed_counts.push(cell.len() as u32);
        }
    }

    Ok(PerfMatrix {
        instance_ids,
        config_ids: expected_configs.to_vec(),
        values,
        seed_counts,
    })
}

/// Instance-wise standardized training targets with the per-row statistics
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedTargets {
    pub instance_ids: Vec<String>,
    pub config_ids: Vec<usize>,
    values: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizedTargets {
    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.config_ids.len();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }
}

/// Rows that are constant up to floating-point rounding are treated as
/// zero-variance; standardizing them would only amplify summation noise.
const STD_FLOOR_REL: f64 = 1e-12;

/// Standardize each row to zero mean, unit population standard deviation.
/// Zero-variance rows map to all-zero targets and report `std = 0`.
pub fn standardize(matrix: &PerfMatrix) -> StandardizedTargets {
    let width = matrix.n_configs();
    let mut values = Vec::with_capacity(matrix.n_instances() * width);
    let mut means = Vec::with_capacity(matrix.n_instances());
    let mut stds = Vec::with_capacity(matrix.n_instances());
    for row in 0..matrix.n_instances() {
        let data = matrix.row(row);
        let mean = data.iter().sum::<f64>() / width as f64;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / width as f64;
        let std = var.sqrt();
        if std <= STD_FLOOR_REL * mean.abs().max(1.0) {
            values.extend(std::iter::repeat_n(0.0, width));
            means.push(mean);
            stds.push(0.0);
        } else {
            values.extend(data.iter().map(|x| (x - mean) / std));
            means.push(mean);
            stds.push(std);
        }
    }
    StandardizedTargets {
        instance_ids: matrix.instance_ids.clone(),
        config_ids: matrix.config_ids.clone(),
        values,
        mean: means,
        std: stds,
    }
}

/// The best (lowest mean gamma) config for an instance; ties go to the
/// smallest config id.
pub fn best_config(matrix: &PerfMatrix, instance_id: &str) -> Result<usize, PerfError> {
    let row = matrix
        .instance_index(instance_id)
        .ok_or_else(|| PerfError::UnknownInstance(instance_id.to_string()))?;
    Ok(best_config_of_row(matrix.row(row), &matrix.config_ids))
}

/// Argmin over a row with smallest-config-id tie-breaking.
pub fn best_config_of_row(row: &[f64], config_ids: &[usize]) -> usize {
    debug_assert_eq!(row.len(), config_ids.len());
    let mut best_value = f64::INFINITY;
    let mut best_id = usize::MAX;
    for (value, &id) in row.iter().zip(config_ids) {
        if *value < best_value || (*value == best_value && id < best_id) {
            best_value = *value;
            best_id = id;
        }
    }
    best_id
}
