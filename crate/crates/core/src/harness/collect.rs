//! Data collection over (instance × configuration × seed) through a
//! process-level solver adapter, with a resumable journal.
//!
//! Adapters are independent processes (or the in-process synthetic solver):
//! they receive an instance file, a settings file, a seed and a time limit,
//! and write a result document `{status, gamma, trace?}`. A nonzero exit or
//! malformed output becomes an error-status record; only a missing
//! executable aborts the run.
//!
//! The journal is the perf-db record store. Completed triples are skipped on
//! rerun, and new records are appended in canonical (instance, config, seed)
//! order no matter how workers finish, so record files are byte-identical
//! under any parallelism degree.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Mutex;

use serde::Deserialize;

use crate::eval::{BoundTrace, TraceEvent};
use crate::milp::MilpInstance;
use crate::perfdb::{append_records, load_records, PerfRecord, RunStatus};

use super::synthetic::synthetic_gamma_by_index;
use super::HarnessError;

/// What one adapter invocation receives.
#[derive(Debug)]
pub struct AdapterRequest<'a> {
    pub instance_path: &'a Path,
    pub instance_id: &'a str,
    pub config_id: usize,
    pub settings: &'a str,
    pub seed: u64,
    pub time_limit: f64,
}

/// What one adapter invocation produces.
#[derive(Debug, Clone)]
pub struct AdapterOutcome {
    pub status: RunStatus,
    pub gamma: f64,
    pub trace: Option<BoundTrace>,
}

/// A solver attached through the adapter protocol.
pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;

    /// Run one (instance, config, seed). Per-run failures are reported as
    /// error-status outcomes; `Err` aborts the whole collection.
    fn run(&self, request: &AdapterRequest<'_>) -> Result<AdapterOutcome, HarnessError>;
}

/// One configuration of a collection plan: its id and the settings text
/// handed to the adapter.
#[derive(Debug, Clone)]
pub struct PlanConfig {
    pub id: usize,
    pub settings: String,
}

/// The full collection request.
#[derive(Debug, Clone)]
pub struct CollectionPlan {
    pub instances: Vec<PathBuf>,
    pub configs: Vec<PlanConfig>,
    /// Seeds run for every (instance, config) pair.
    pub seeds: Vec<u64>,
    pub time_limit: f64,
    pub parallelism: usize,
}

impl CollectionPlan {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.instances.is_empty() || self.configs.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::PlanInvalid(
                "instances, configs and seeds must all be non-empty".into(),
            ));
        }
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return Err(HarnessError::PlanInvalid(format!(
                "time limit must be positive, got {}",
                self.time_limit
            )));
        }
        if self.parallelism == 0 {
            return Err(HarnessError::PlanInvalid("parallelism must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for config in &self.configs {
            if !seen.insert(config.id) {
                return Err(HarnessError::PlanInvalid(format!(
                    "duplicate config id {}",
                    config.id
                )));
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(HarnessError::PlanInvalid("duplicate seeds".into()));
        }
        Ok(())
    }
}

/// Read an instance file (canonical JSON or MPS by extension).
pub fn read_instance(path: &Path) -> Result<MilpInstance, HarnessError> {
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_mps = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("mps"))
        .unwrap_or(false);
    if is_mps {
        crate::mps::parse_mps(&bytes).map_err(|e| HarnessError::InstanceParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    } else {
        crate::milp::parse_milp_json(&bytes).map_err(|e| HarnessError::InstanceParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Run every missing (instance, config, seed) triple through the adapter.
///
/// Returns exactly the plan's (instance, config, seed) cross product in
/// canonical order, reusing journaled results where present. The journal at
/// `journal_path` is created if absent and extended in canonical order among
/// the new records; journal entries outside the plan are kept in the file
/// but not returned.
pub fn run_collection(
    plan: &CollectionPlan,
    adapter: &dyn SolverAdapter,
    journal_path: &Path,
) -> Result<Vec<PerfRecord>, HarnessError> {
    plan.validate()?;

    // Resolve instance ids up front; duplicate ids would corrupt the journal key.
    let mut instances: Vec<(String, &Path)> = Vec::with_capacity(plan.instances.len());
    let mut seen = std::collections::BTreeSet::new();
    for path in &plan.instances {
        let id = read_instance(path)?.id;
        if !seen.insert(id.clone()) {
            return Err(HarnessError::DuplicateInstanceId(id));
        }
        instances.push((id, path));
    }
    instances.sort_by(|a, b| a.0.cmp(&b.0));

    let existing = load_records(journal_path).map_err(HarnessError::Journal)?;
    let done: std::collections::BTreeSet<(String, usize, u64)> = existing
        .iter()
        .map(|r| (r.instance_id.clone(), r.config_id, r.seed))
        .collect();

    // Canonical task order: (instance_id, config_id, seed).
    let mut config_order: Vec<&PlanConfig> = plan.configs.iter().collect();
    config_order.sort_by_key(|c| c.id);
    let mut seed_order = plan.seeds.clone();
    seed_order.sort_unstable();
    struct Task<'a> {
        instance_id: &'a str,
        path: &'a Path,
        config: &'a PlanConfig,
        seed: u64,
    }
    let mut tasks = Vec::new();
    for (id, path) in &instances {
        for config in &config_order {
            for &seed in &seed_order {
                if !done.contains(&(id.clone(), config.id, seed)) {
                    tasks.push(Task {
                        instance_id: id,
                        path,
                        config,
                        seed,
                    });
                }
            }
        }
    }

    let n_tasks = tasks.len();
    let next_task = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);
    let (sender, receiver) = mpsc::channel::<(usize, PerfRecord)>();

    let mut new_records: Vec<Option<PerfRecord>> = vec![None; n_tasks];
    std::thread::scope(|scope| {
        let workers = plan.parallelism.min(n_tasks.max(1));
        for _ in 0..workers {
            let sender = sender.clone();
            let tasks = &tasks;
            let next_task = &next_task;
            let abort = &abort;
            let failure = &failure;
            scope.spawn(move || {
                loop {
                    if abort.load(Ordering::SeqCst) {
                        return;
                    }
                    let idx = next_task.fetch_add(1, Ordering::SeqCst);
                    if idx >= tasks.len() {
                        return;
                    }
                    let task = &tasks[idx];
                    let request = AdapterRequest {
                        instance_path: task.path,
                        instance_id: task.instance_id,
                        config_id: task.config.id,
                        settings: &task.config.settings,
                        seed: task.seed,
                        time_limit: plan.time_limit,
                    };
                    match adapter.run(&request) {
                        Ok(outcome) => {
                            let record = PerfRecord {
                                instance_id: task.instance_id.to_string(),
                                config_id: task.config.id,
                                seed: task.seed,
                                gamma: if outcome.status == RunStatus::Ok {
                                    outcome.gamma
                                } else {
                                    0.0
                                },
                                status: outcome.status,
                            };
                            if sender.send((idx, record)).is_err() {
                                return;
                            }
                        }
                        Err(error) => {
                            let mut slot = failure.lock().unwrap();
                            if slot.is_none() {
                                *slot = Some(error);
                            }
                            abort.store(true, Ordering::SeqCst);
                            return;
                        }
                    }
                }
            });
        }
        drop(sender);

        // Writer: flush results to the journal in canonical (task) order.
        let mut buffer: BTreeMap<usize, PerfRecord> = BTreeMap::new();
        let mut next_write = 0usize;
        for (idx, record) in receiver.iter() {
            buffer.insert(idx, record);
            while let Some(record) = buffer.remove(&next_write) {
                if append_records(journal_path, std::slice::from_ref(&record)).is_err() {
                    abort.store(true, Ordering::SeqCst);
                    let mut slot = failure.lock().unwrap();
                    if slot.is_none() {
                        *slot = Some(HarnessError::Io {
                            path: journal_path.display().to_string(),
                            source: std::io::Error::other("journal append failed"),
                        });
                    }
                    break;
                }
                new_records[next_write] = Some(record);
                next_write += 1;
            }
        }
    });

    if let Some(error) = failure.into_inner().unwrap() {
        return Err(error);
    }

    let mut planned: std::collections::BTreeSet<(&str, usize, u64)> =
        std::collections::BTreeSet::new();
    for (id, _) in &instances {
        for config in &config_order {
            for &seed in &seed_order {
                planned.insert((id.as_str(), config.id, seed));
            }
        }
    }
    let mut all: Vec<PerfRecord> = existing
        .into_iter()
        .filter(|r| planned.contains(&(r.instance_id.as_str(), r.config_id, r.seed)))
        .collect();
    all.extend(new_records.into_iter().map(|r| r.expect("all tasks completed")));
    all.sort_by(|a, b| {
        (&a.instance_id, a.config_id, a.seed).cmp(&(&b.instance_id, b.config_id, b.seed))
    });
    Ok(all)
}

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

/// In-process synthetic solver exposed through the adapter protocol. The
/// penalty column is the request's config id.
pub struct SyntheticAdapter {
    pub noise_amp: f64,
    invocations: AtomicUsize,
}

impl SyntheticAdapter {
    pub fn new(noise_amp: f64) -> Self {
        Self {
            noise_amp,
            invocations: AtomicUsize::new(0),
        }
    }

    /// Number of runs performed, for resume-behaviour assertions.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }
}

impl SolverAdapter for SyntheticAdapter {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn run(&self, request: &AdapterRequest<'_>) -> Result<AdapterOutcome, HarnessError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let instance = match read_instance(request.instance_path) {
            Ok(instance) => instance,
            Err(_) => {
                return Ok(AdapterOutcome {
                    status: RunStatus::Error,
                    gamma: 0.0,
                    trace: None,
                });
            }
        };
        match synthetic_gamma_by_index(&instance, request.config_id, request.seed, self.noise_amp)
        {
            Ok(gamma) => Ok(AdapterOutcome {
                status: RunStatus::Ok,
                gamma,
                trace: None,
            }),
            Err(HarnessError::PenaltyIndex { .. }) => Ok(AdapterOutcome {
                status: RunStatus::Error,
                gamma: 0.0,
                trace: None,
            }),
            Err(other) => Err(other),
        }
    }
}

#[derive(Debug, Deserialize)]
struct AdapterResultDoc {
    status: String,
    gamma: Option<f64>,
    #[serde(default)]
    trace: Option<Vec<(f64, Option<f64>, f64)>>,
}

/// An external solver launched as a process per run.
///
/// The argument template is expanded per run: `{instance}`, `{settings}`,
/// `{seed}`, `{time_limit}` and `{output}` are replaced with the run's
/// values. The process must write its result document to the `{output}`
/// path; settings are written to a fresh file per run.
pub struct ProcessAdapter {
    pub program: PathBuf,
    pub args_template: Vec<String>,
    pub work_dir: PathBuf,
}

impl ProcessAdapter {
    pub fn new(program: PathBuf, args_template: Vec<String>, work_dir: PathBuf) -> Self {
        Self {
            program,
            args_template,
            work_dir,
        }
    }

    fn error_outcome() -> AdapterOutcome {
        AdapterOutcome {
            status: RunStatus::Error,
            gamma: 0.0,
            trace: None,
        }
    }
}

impl SolverAdapter for ProcessAdapter {
    fn name(&self) -> &str {
        "process"
    }

    fn run(&self, request: &AdapterRequest<'_>) -> Result<AdapterOutcome, HarnessError> {
        let tag = format!(
            "{}-c{}-s{}",
            sanitize(request.instance_id),
            request.config_id,
            request.seed
        );
        let settings_path = self.work_dir.join(format!("{tag}.set"));
        let output_path = self.work_dir.join(format!("{tag}.result.json"));
        if std::fs::write(&settings_path, request.settings).is_err() {
            return Ok(Self::error_outcome());
        }
        let _ = std::fs::remove_file(&output_path);

        let args: Vec<String> = self
            .args_template
            .iter()
            .map(|arg| {
                arg.replace("{instance}", &request.instance_path.display().to_string())
                    .replace("{settings}", &settings_path.display().to_string())
                    .replace("{seed}", &request.seed.to_string())
                    .replace("{time_limit}", &request.time_limit.to_string())
                    .replace("{output}", &output_path.display().to_string())
            })
            .collect();

        let status = match std::process::Command::new(&self.program).args(&args).status() {
            Ok(status) => status,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(HarnessError::AdapterMissing {
                    program: self.program.display().to_string(),
                });
            }
            Err(_) => return Ok(Self::error_outcome()),
        };
        if !status.success() {
            return Ok(Self::error_outcome());
        }

        let Ok(bytes) = std::fs::read(&output_path) else {
            return Ok(Self::error_outcome());
        };
        let Ok(doc) = serde_json::from_slice::<AdapterResultDoc>(&bytes) else {
            return Ok(Self::error_outcome());
        };
        let status = match doc.status.as_str() {
            "ok" => RunStatus::Ok,
            "timeout" => RunStatus::Timeout,
            _ => RunStatus::Error,
        };
        let gamma = match (status, doc.gamma) {
            (RunStatus::Ok, Some(g)) if g.is_finite() && g >= 0.0 => g,
            (RunStatus::Ok, _) => return Ok(Self::error_outcome()),
            _ => 0.0,
        };
        let trace = match doc.trace {
            None => None,
            Some(events) => {
                let events: Vec<TraceEvent> = events
                    .into_iter()
                    .map(|(t, primal, dual)| TraceEvent { t, primal, dual })
                    .collect();
                match BoundTrace::new(events, request.time_limit) {
                    Ok(trace) => Some(trace),
                    Err(_) => return Ok(Self::error_outcome()),
                }
            }
        };
        Ok(AdapterOutcome {
            status,
            gamma,
            trace,
        })
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
