//! Small file helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use confscout_core::graph::{to_bipartite, BipartiteGraph, FeatureSchema};
use confscout_core::harness::read_instance;
use confscout_core::milp::MilpInstance;

use crate::commands::CliError;

/// Log level from CONFSCOUT_LOG: 0 quiet, 1 info, 2 debug.
pub fn log_level() -> u8 {
    match std::env::var("CONFSCOUT_LOG").as_deref() {
        Ok("quiet") => 0,
        Ok("debug") => 2,
        _ => 1,
    }
}

macro_rules! info {
    ($($arg:tt)*) => {
        if crate::io_util::log_level() >= 1 {
            eprintln!($($arg)*);
        }
    };
}
pub(crate) use info;

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// All instance files (*.json, *.mps) under a directory, sorted by name.
pub fn instance_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.extension()
                .map(|ext| ext.eq_ignore_ascii_case("json") || ext.eq_ignore_ascii_case("mps"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no instance files (*.json, *.mps) in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Load instances from a directory, sorted by file name.
pub fn load_instances(dir: &Path) -> Result<Vec<MilpInstance>, CliError> {
    instance_files(dir)?
        .iter()
        .map(|path| read_instance(path).map_err(|e| CliError::Data(e.to_string())))
        .collect()
}

/// Featurize one instance.
pub fn graph_of(instance: &MilpInstance) -> BipartiteGraph {
    to_bipartite(instance, &FeatureSchema::for_instance(instance))
}
