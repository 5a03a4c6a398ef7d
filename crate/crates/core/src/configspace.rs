//! Emphasis-parameter configuration space: Cartesian enumeration, expansion
//! into low-level solver settings, duplicate removal and settings emission.
//!
//! Emphasis parameters set many low-level settings at once, so distinct
//! points of the Cartesian product can expand to the same solver
//! configuration. Deduplication compares the expanded, canonicalized setting
//! maps; the survivor of each duplicate class is the point with the smallest
//! enumeration id.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parameter definitions must not be empty")]
    EmptyDefs,
    #[error("parameter '{param}' has no levels")]
    NoLevels { param: String },
    #[error("parameter '{param}' has duplicate level '{level}'")]
    DuplicateLevel { param: String, level: String },
    #[error("config {config_id}: assignment length {actual}, expected {expected}")]
    AssignmentLength {
        config_id: usize,
        actual: usize,
        expected: usize,
    },
    #[error("config {config_id}: level index {index} out of range for parameter '{param}'")]
    LevelOutOfRange {
        config_id: usize,
        param: String,
        index: usize,
    },
    #[error("expansion table has no entry for ({param}, {level})")]
    MissingEntry { param: String, level: String },
    #[error("setting name '{0}' contains '=' or a line break")]
    BadSettingName(String),
    #[error("settings line {line}: missing '='")]
    SettingsSyntax { line: usize },
    #[error("malformed document: {0}")]
    Malformed(String),
}

/// One emphasis parameter and its ordered levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub levels: Vec<String>,
}

impl ParamDef {
    pub fn new(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// A point of the Cartesian product: one level index per parameter, plus its
/// position in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub id: usize,
    pub assignment: Vec<usize>,
}

/// Map from (parameter, level) to the low-level settings that level implies.
/// Settings are merged in parameter-definition order; later parameters win on
/// conflicting names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionTable {
    entries: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>>,
}

impl ExpansionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, param: &str, level: &str, settings: &[(&str, &str)]) {
        let map = settings
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        self.entries
            .entry(param.to_string())
            .or_default()
            .insert(level.to_string(), map);
    }

    pub fn get(&self, param: &str, level: &str) -> Option<&BTreeMap<String, String>> {
        self.entries.get(param)?.get(level)
    }

    /// The identity table: every (param, level) expands to the single
    /// setting `param = level`. Useful when no solver-derived table exists;
    /// it never collapses anything.
    pub fn identity(defs: &[ParamDef]) -> Self {
        let mut table = Self::new();
        for def in defs {
            for level in &def.levels {
                table.insert(&def.name, level, &[(def.name.as_str(), level.as_str())]);
            }
        }
        table
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        serde_json::from_slice(bytes).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

/// The enumerated space `C`, its deduplicated reduction `C'`, and the
/// duplicate classes that were collapsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub defs: Vec<ParamDef>,
    pub points: Vec<ConfigPoint>,
    /// Ids of surviving configs, in enumeration order.
    pub survivors: Vec<usize>,
    /// Survivor id -> ids of the points it absorbed.
    pub duplicates: BTreeMap<usize, BTreeSet<usize>>,
}

impl ConfigSpace {
    pub fn n_total(&self) -> usize {
        self.points.len()
    }

    pub fn n_reduced(&self) -> usize {
        self.survivors.len()
    }
}

fn validate_defs(defs: &[ParamDef]) -> Result<(), ConfigError> {
    if defs.is_empty() {
        return Err(ConfigError::EmptyDefs);
    }
    for def in defs {
        if def.levels.is_empty() {
            return Err(ConfigError::NoLevels {
                param: def.name.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for level in &def.levels {
            if !seen.insert(level) {
                return Err(ConfigError::DuplicateLevel {
                    param: def.name.clone(),
                    level: level.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Enumerate the full Cartesian product in lexicographic order, the last
/// parameter varying fastest. Ids are 0..N-1 in that order.
pub fn enumerate_cartesian(defs: &[ParamDef]) -> Result<Vec<ConfigPoint>, ConfigError> {
    validate_defs(defs)?;
    let total: usize = defs.iter().map(|d| d.levels.len()).product();
    let mut points = Vec::with_capacity(total);
    let mut assignment = vec![0usize; defs.len()];
    for id in 0..total {
        points.push(ConfigPoint {
            id,
            assignment: assignment.clone(),
        });
        // Odometer increment from the last position.
        for pos in (0..defs.len()).rev() {
            assignment[pos] += 1;
            if assignment[pos] < defs[pos].levels.len() {
                break;
            }
            assignment[pos] = 0;
        }
    }
    Ok(points)
}

/// Expand a config into its canonical setting map: per-parameter settings
/// merged in definition order (later parameters override earlier ones on
/// conflicting names), sorted by setting name.
pub fn expand(
    config: &ConfigPoint,
    defs: &[ParamDef],
    table: &ExpansionTable,
) -> Result<BTreeMap<String, String>, ConfigError> {
    if config.assignment.len() != defs.len() {
        return Err(ConfigError::AssignmentLength {
            config_id: config.id,
            actual: config.assignment.len(),
            expected: defs.len(),
        });
    }
    let mut merged = BTreeMap::new();
    for (def, &level_idx) in defs.iter().zip(&config.assignment) {
        let level = def
            .levels
            .get(level_idx)
            .ok_or_else(|| ConfigError::LevelOutOfRange {
                config_id: config.id,
                param: def.name.clone(),
                index: level_idx,
            })?;
        let settings = table
            .get(&def.name, level)
            .ok_or_else(|| ConfigError::MissingEntry {
                param: def.name.clone(),
                level: level.clone(),
            })?;
        for (k, v) in settings {
            merged.insert(k.clone(), v.clone());
        }
    }
    Ok(merged)
}

/// Collapse configs whose canonical setting maps are identical. The smallest
/// id of each class survives; survivors are listed in enumeration (id) order.
pub fn dedup(
    defs: &[ParamDef],
    configs: &[ConfigPoint],
    table: &ExpansionTable,
) -> Result<ConfigSpace, ConfigError> {
    validate_defs(defs)?;
    // Walk in ascending id order so the first of each class is its smallest
    // id regardless of caller ordering.
    let mut ordered: Vec<&ConfigPoint> = configs.iter().collect();
    ordered.sort_by_key(|c| c.id);
    let mut first_seen: HashMap<Vec<(String, String)>, usize> = HashMap::new();
    let mut survivors = Vec::new();
    let mut duplicates: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for config in ordered {
        let key: Vec<(String, String)> = expand(config, defs, table)?.into_iter().collect();
        match first_seen.get(&key) {
            Some(&survivor) => {
                duplicates.entry(survivor).or_default().insert(config.id);
            }
            None => {
                first_seen.insert(key, config.id);
                survivors.push(config.id);
            }
        }
    }
    Ok(ConfigSpace {
        defs: defs.to_vec(),
        points: configs.to_vec(),
        survivors,
        duplicates,
    })
}

/// Render a canonical setting map as solver settings text: one
/// `name = value` line per setting, sorted by name.
pub fn emit_settings(
    config: &ConfigPoint,
    defs: &[ParamDef],
    table: &ExpansionTable,
) -> Result<String, ConfigError> {
    let map = expand(config, defs, table)?;
    let mut out = String::new();
    for (name, value) in &map {
        if name.contains('=') || name.contains('\n') || value.contains('\n') {
            return Err(ConfigError::BadSettingName(name.clone()));
        }
        out.push_str(name);
        out.push_str(" = ");
        out.push_str(value);
        out.push('\n');
    }
    Ok(out)
}

/// Parse settings text back into a canonical map. Inverse of
/// [`emit_settings`] for any emittable map.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, value) = line
            .split_once('=')
            .ok_or(ConfigError::SettingsSyntax { line: idx + 1 })?;
        map.insert(name.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Read parameter definitions from JSON.
pub fn defs_from_json(bytes: &[u8]) -> Result<Vec<ParamDef>, ConfigError> {
    let defs: Vec<ParamDef> =
        serde_json::from_slice(bytes).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    validate_defs(&defs)?;
    Ok(defs)
}

/// The emphasis-parameter layout used for solver tuning: presolving,
/// heuristics and separation aggressiveness (4 levels each) plus the global
/// emphasis switch (11 levels), a 704-point product.
pub fn emphasis_defs() -> Vec<ParamDef> {
    let four = ["default", "aggressive", "fast", "off"];
    vec![
        ParamDef::new("presolving", &four),
        ParamDef::new("heuristics", &four),
        ParamDef::new("separating", &four),
        ParamDef::new(
            "emphasis",
            &[
                "default",
                "cpsolver",
                "easycip",
                "feasibility",
                "hardlp",
                "optimality",
                "counter",
                "phasefeas",
                "phaseimprove",
                "phaseproof",
                "numerics",
            ],
        ),
    ]
}
