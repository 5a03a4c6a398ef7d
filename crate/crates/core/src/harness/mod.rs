//! Data collection orchestration: the solver adapter protocol, a worker
//! pool with a resumable journal, and the synthetic solver + instance
//! generator that make the whole pipeline testable at desk scale.

mod collect;
mod synthetic;

pub use collect::{
    read_instance, run_collection, AdapterOutcome, AdapterRequest, CollectionPlan, PlanConfig,
    ProcessAdapter, SolverAdapter, SyntheticAdapter,
};
pub use synthetic::{
    density_bucket, generate_synthetic_instances, noise_u, synthetic_gamma,
    synthetic_gamma_by_index, Family, DEFAULT_NOISE_AMP, PENALTY_TABLE, SYNTHETIC_CONFIGS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("adapter executable '{program}' not found")]
    AdapterMissing { program: String },
    #[error("journal unreadable: {0}")]
    Journal(#[source] crate::perfdb::PerfError),
    #[error("instance file {path}: {message}")]
    InstanceParse { path: String, message: String },
    #[error("duplicate instance id '{0}' in plan")]
    DuplicateInstanceId(String),
    #[error("config index {index} outside the penalty table (width {width})")]
    PenaltyIndex { index: usize, width: usize },
    #[error("config {config_id} has an empty assignment")]
    EmptyAssignment { config_id: usize },
    #[error("noise amplitude {0} outside [0, 0.5]")]
    BadNoiseAmp(f64),
    #[error("invalid plan: {0}")]
    PlanInvalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::emit_milp_json;
    use crate::perfdb::{aggregate, best_config, load_records, RunStatus};
    use std::path::PathBuf;

    fn tempdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "confscout-harness-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn write_instances(dir: &std::path::Path, family: Family, n: usize, seed: u64) -> Vec<PathBuf> {
        generate_synthetic_instances(family, n, seed)
            .iter()
            .map(|instance| {
                let path = dir.join(format!("{}.json", instance.id));
                std::fs::write(&path, emit_milp_json(instance)).unwrap();
                path
            })
            .collect()
    }

    fn plan(instances: Vec<PathBuf>, n_configs: usize, seeds: Vec<u64>, parallelism: usize) -> CollectionPlan {
        CollectionPlan {
            instances,
            configs: (0..n_configs)
                .map(|id| PlanConfig {
                    id,
                    settings: format!("# synthetic config {id}\n"),
                })
                .collect(),
            seeds,
            time_limit: 60.0,
            parallelism,
        }
    }

    #[test]
    fn collection_cardinality_and_order() {
        let dir = tempdir("cardinality");
        let instances = write_instances(&dir, Family::Sparse, 2, 5);
        let adapter = SyntheticAdapter::new(0.05);
        let records =
            run_collection(&plan(instances, 3, vec![0, 1], 2), &adapter, &dir.join("j.tsv"))
                .unwrap();
        assert_eq!(records.len(), 2 * 3 * 2);
        assert_eq!(adapter.invocations(), 12);
        // Canonical order: sorted by (instance, config, seed).
        let keys: Vec<(String, usize, u64)> = records
            .iter()
            .map(|r| (r.instance_id.clone(), r.config_id, r.seed))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(records.iter().all(|r| r.status == RunStatus::Ok));
    }

    #[test]
    fn resume_runs_only_missing_triples() {
        let dir = tempdir("resume");
        let instances = write_instances(&dir, Family::Medium, 2, 6);
        let journal = dir.join("j.tsv");
        let adapter = SyntheticAdapter::new(0.05);
        let first = run_collection(&plan(instances.clone(), 3, vec![0, 1], 1), &adapter, &journal)
            .unwrap();
        assert_eq!(adapter.invocations(), 12);

        // Drop one line from the journal, rerun: exactly one new invocation.
        let text = std::fs::read_to_string(&journal).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(7);
        std::fs::write(&journal, format!("{}\n", lines.join("\n"))).unwrap();

        let adapter2 = SyntheticAdapter::new(0.05);
        let second = run_collection(&plan(instances, 3, vec![0, 1], 4), &adapter2, &journal)
            .unwrap();
        assert_eq!(adapter2.invocations(), 1);
        assert_eq!(first, second, "resumed records must match the original run");
    }

    #[test]
    fn parallelism_does_not_change_the_journal() {
        let dir = tempdir("par");
        let instances = write_instances(&dir, Family::Dense, 3, 7);
        let j1 = dir.join("p1.tsv");
        let j8 = dir.join("p8.tsv");
        run_collection(
            &plan(instances.clone(), 4, vec![0, 1], 1),
            &SyntheticAdapter::new(0.05),
            &j1,
        )
        .unwrap();
        run_collection(
            &plan(instances, 4, vec![0, 1], 8),
            &SyntheticAdapter::new(0.05),
            &j8,
        )
        .unwrap();
        let a = std::fs::read(&j1).unwrap();
        let b = std::fs::read(&j8).unwrap();
        assert_eq!(a, b, "journals must be byte-identical across parallelism");
    }

    #[test]
    fn corrupted_journal_is_reported() {
        let dir = tempdir("corrupt");
        let instances = write_instances(&dir, Family::Sparse, 1, 8);
        let journal = dir.join("j.tsv");
        std::fs::write(&journal, "not a record\n").unwrap();
        let err = run_collection(
            &plan(instances, 2, vec![0], 1),
            &SyntheticAdapter::new(0.0),
            &journal,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Journal(_)));
    }

    #[test]
    fn missing_process_adapter_aborts() {
        let dir = tempdir("missing");
        let instances = write_instances(&dir, Family::Sparse, 1, 9);
        let adapter = ProcessAdapter::new(
            dir.join("no-such-solver"),
            vec!["{instance}".into(), "{output}".into()],
            dir.clone(),
        );
        let err = run_collection(&plan(instances, 1, vec![0], 1), &adapter, &dir.join("j.tsv"))
            .unwrap_err();
        assert!(matches!(err, HarnessError::AdapterMissing { .. }));
    }

    #[test]
    fn process_adapter_round_trip_via_shell() {
        // A 4-line shell shim is all a real solver needs; emulate one.
        let dir = tempdir("shell");
        let instances = write_instances(&dir, Family::Sparse, 1, 10);
        let script = dir.join("fake-solver.sh");
        std::fs::write(
            &script,
            "#!/bin/sh\n# args: instance settings seed time_limit output\necho '{\"status\": \"ok\", \"gamma\": 42.5, \"trace\": [[0.0, null, 1.0], [3.0, 4.0, 1.0]]}' > \"$5\"\n",
        )
        .unwrap();
        let adapter = ProcessAdapter::new(
            PathBuf::from("/bin/sh"),
            vec![
                script.display().to_string(),
                "{instance}".into(),
                "{settings}".into(),
                "{seed}".into(),
                "{time_limit}".into(),
                "{output}".into(),
            ],
            dir.clone(),
        );
        let records =
            run_collection(&plan(instances, 2, vec![0], 2), &adapter, &dir.join("j.tsv")).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r.status == RunStatus::Ok && r.gamma == 42.5));
    }

    #[test]
    fn failing_process_becomes_error_record() {
        let dir = tempdir("fail");
        let instances = write_instances(&dir, Family::Sparse, 1, 11);
        let script = dir.join("broken.sh");
        std::fs::write(&script, "#!/bin/sh\nexit 3\n").unwrap();
        let adapter = ProcessAdapter::new(
            PathBuf::from("/bin/sh"),
            vec![script.display().to_string(), "{output}".into()],
            dir.clone(),
        );
        let records =
            run_collection(&plan(instances, 1, vec![0], 1), &adapter, &dir.join("j.tsv")).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].status, RunStatus::Error);
    }

    #[test]
    fn zero_noise_best_config_matches_penalty_argmin() {
        let dir = tempdir("argmin");
        let mut paths = Vec::new();
        for (family, seed) in [(Family::Sparse, 1), (Family::Medium, 2), (Family::Dense, 3)] {
            paths.extend(write_instances(&dir, family, 2, seed));
        }
        let records = run_collection(
            &plan(paths.clone(), SYNTHETIC_CONFIGS, vec![0, 1], 4),
            &SyntheticAdapter::new(0.0),
            &dir.join("j.tsv"),
        )
        .unwrap();
        let matrix = aggregate(&records, &(0..SYNTHETIC_CONFIGS).collect::<Vec<_>>()).unwrap();
        for path in &paths {
            let instance = read_instance(path).unwrap();
            let bucket = density_bucket(&instance);
            let expected = PENALTY_TABLE[bucket]
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(best_config(&matrix, &instance.id).unwrap(), expected);
        }
    }

    #[test]
    fn stale_journal_entries_are_kept_but_not_returned() {
        let dir = tempdir("stale");
        let instances = write_instances(&dir, Family::Sparse, 1, 40);
        let journal = dir.join("j.tsv");
        // A leftover record from some other dataset shares the journal.
        crate::perfdb::append_records(
            &journal,
            &[crate::perfdb::PerfRecord {
                instance_id: "other-dataset-instance".into(),
                config_id: 0,
                seed: 0,
                gamma: 1.0,
                status: RunStatus::Ok,
            }],
        )
        .unwrap();
        let records = run_collection(
            &plan(instances, 2, vec![0], 1),
            &SyntheticAdapter::new(0.0),
            &journal,
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r.instance_id.starts_with("syn-sparse")));
        // The stale line stays in the file.
        assert!(std::fs::read_to_string(&journal)
            .unwrap()
            .contains("other-dataset-instance"));
    }

    #[test]
    fn journal_extension_preserves_load(){
        let dir = tempdir("extend");
        let instances = write_instances(&dir, Family::Sparse, 1, 12);
        let journal = dir.join("j.tsv");
        let adapter = SyntheticAdapter::new(0.05);
        run_collection(&plan(instances.clone(), 1, vec![0], 1), &adapter, &journal).unwrap();
        // Extend the plan with one more seed: only the new triple runs.
        let adapter2 = SyntheticAdapter::new(0.05);
        let records =
            run_collection(&plan(instances, 1, vec![0, 1], 1), &adapter2, &journal).unwrap();
        assert_eq!(adapter2.invocations(), 1);
        assert_eq!(records.len(), 2);
        assert_eq!(load_records(&journal).unwrap().len(), 2);
    }
}
