//! Subcommand definitions and implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use confscout_core::cluster::{fit_clusters, predict_cluster, ClusterModel};
use confscout_core::configspace::{
    defs_from_json, dedup, emit_settings, emphasis_defs, enumerate_cartesian, ExpansionTable,
};
use confscout_core::eval::{
    compare, load_run_results, HistogramSpec, RunResult,
};
use confscout_core::gnn::{
    format_log, load_ensemble, save_ensemble, train_ensemble, TrainConfig,
};
use confscout_core::harness::{
    generate_synthetic_instances, run_collection, CollectionPlan, Family, HarnessError,
    PlanConfig, ProcessAdapter, SyntheticAdapter, DEFAULT_NOISE_AMP,
};
use confscout_core::milp::emit_milp_json;
use confscout_core::perfdb::{aggregate, load_records, standardize, PerfMatrix};
use confscout_core::plot::histogram_svg;
use confscout_core::selector::{choose_size, greedy_chain};

use crate::io_util::{
    graph_of, info, instance_files, load_instances, read_bytes, read_to_string, write_file,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Adapter(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Adapter(msg) => {
                f.write_str(msg)
            }
        }
    }
}

fn data<E: std::fmt::Display>(error: E) -> CliError {
    CliError::Data(error.to_string())
}

fn harness_error(error: HarnessError) -> CliError {
    match error {
        HarnessError::AdapterMissing { .. } => CliError::Adapter(error.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "confscout",
    version,
    about = "Instance-wise MILP solver configuration: portfolio selection, graph-network prediction, primal-dual-integral evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the emphasis configuration space, deduplicate it against an
    /// expansion table, and emit settings files.
    Configs(ConfigsArgs),
    /// Generate synthetic MILP instances.
    Generate(GenerateArgs),
    /// Run the solver adapter over (instance x config x seed) into a journal.
    Collect(CollectArgs),
    /// Build the greedy portfolio from a journal.
    Select(SelectArgs),
    /// Train the prediction ensemble on a journal + instances.
    Train(TrainArgs),
    /// Predict the best portfolio config per instance with a trained ensemble.
    Predict(PredictArgs),
    /// Fit the size-signature cluster predictor.
    ClusterFit(ClusterFitArgs),
    /// Predict configs by cluster lookup.
    ClusterPredict(ClusterPredictArgs),
    /// Compare candidate vs baseline run results.
    Evaluate(EvaluateArgs),
    /// Evaluate and export the summary table plus the histogram SVG.
    Report(ReportArgs),
    /// Run the whole synthetic pipeline end to end.
    Pipeline(PipelineArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Configs(args) => cmd_configs(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Collect(args) => cmd_collect(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::ClusterFit(args) => cmd_cluster_fit(&args),
        Command::ClusterPredict(args) => cmd_cluster_predict(&args),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| ()),
        Command::Report(args) => cmd_report(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    }
}

// ---------------------------------------------------------------------------
// configs
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConfigsArgs {
    /// Parameter definitions (JSON list of {name, levels}); the built-in
    /// emphasis layout (4 x 4 x 4 x 11) when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Expansion table (JSON); identity expansion when omitted.
    #[arg(long)]
    expansion: Option<PathBuf>,
    /// Write the enumerated + deduplicated space as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one settings file per surviving config into this directory.
    #[arg(long)]
    settings_dir: Option<PathBuf>,
    /// Fail (exit 2) unless the reduced space has exactly this many configs.
    #[arg(long)]
    expect_size: Option<usize>,
}

fn cmd_configs(args: &ConfigsArgs) -> Result<(), CliError> {
    let defs = match &args.params {
        Some(path) => defs_from_json(&read_bytes(path)?).map_err(data)?,
        None => emphasis_defs(),
    };
    let table = match &args.expansion {
        Some(path) => ExpansionTable::from_json(&read_bytes(path)?).map_err(data)?,
        None => ExpansionTable::identity(&defs),
    };
    let points = enumerate_cartesian(&defs).map_err(data)?;
    let space = dedup(&defs, &points, &table).map_err(data)?;
    info!(
        "configs: |C| = {}, |C'| = {} ({} duplicates collapsed)",
        space.n_total(),
        space.n_reduced(),
        space.n_total() - space.n_reduced()
    );
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&space).map_err(data)?;
        write_file(path, json + "\n")?;
    }
    if let Some(dir) = &args.settings_dir {
        for &id in &space.survivors {
            let text = emit_settings(&space.points[id], &defs, &table).map_err(data)?;
            write_file(&dir.join(format!("config_{id}.set")), text)?;
        }
        info!("configs: wrote {} settings files to {}", space.n_reduced(), dir.display());
    }
    println!("{}\t{}", space.n_total(), space.n_reduced());
    if let Some(expected) = args.expect_size {
        if space.n_reduced() != expected {
            return Err(CliError::Data(format!(
                "reduced space has {} configs, expected {expected}",
                space.n_reduced()
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenerateArgs {
    /// sparse, medium, dense, or all (count per family).
    #[arg(long, default_value = "all")]
    family: String,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let families: Vec<Family> = if args.family == "all" {
        Family::ALL.to_vec()
    } else {
        vec![args.family.parse().map_err(CliError::Usage)?]
    };
    let mut written = 0;
    for family in families {
        for instance in generate_synthetic_instances(family, args.count, args.seed) {
            write_file(
                &args.out_dir.join(format!("{}.json", instance.id)),
                emit_milp_json(&instance),
            )?;
            written += 1;
        }
    }
    info!("generate: wrote {written} instances to {}", args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CollectArgs {
    /// Directory of instance files (*.json, *.mps).
    #[arg(long)]
    instances: PathBuf,
    /// Journal file (perf-db record store); created or resumed.
    #[arg(long)]
    journal: PathBuf,
    /// Synthetic portfolio width: config ids 0..N-1.
    #[arg(long, conflicts_with = "settings_dir")]
    n_configs: Option<usize>,
    /// Directory of `config_<id>.set` files from `configs --settings-dir`.
    #[arg(long)]
    settings_dir: Option<PathBuf>,
    /// Seeds per (instance, config) pair.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    /// Per-run time limit in seconds.
    #[arg(long, default_value_t = 900.0)]
    time_limit: f64,
    /// Synthetic solver noise amplitude.
    #[arg(long, default_value_t = DEFAULT_NOISE_AMP)]
    noise: f64,
    /// External adapter executable; synthetic solver when omitted.
    #[arg(long)]
    adapter_cmd: Option<PathBuf>,
    /// Argument template for the adapter ({instance} {settings} {seed}
    /// {time_limit} {output} are substituted per run).
    #[arg(long, num_args = 1.., requires = "adapter_cmd")]
    adapter_args: Vec<String>,
}

fn plan_configs(args: &CollectArgs) -> Result<Vec<PlanConfig>, CliError> {
    if let Some(dir) = &args.settings_dir {
        let mut configs = Vec::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(data)?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let Some(id_str) = name.strip_prefix("config_").and_then(|s| s.strip_suffix(".set"))
            else {
                continue;
            };
            let id = id_str
                .parse()
                .map_err(|_| CliError::Data(format!("bad settings file name {name}")))?;
            configs.push(PlanConfig {
                id,
                settings: read_to_string(&path)?,
            });
        }
        if configs.is_empty() {
            return Err(CliError::Data(format!(
                "no config_<id>.set files in {}",
                dir.display()
            )));
        }
        configs.sort_by_key(|c| c.id);
        Ok(configs)
    } else {
        let n = args.n_configs.ok_or_else(|| {
            CliError::Usage("either --n-configs or --settings-dir is required".into())
        })?;
        Ok((0..n)
            .map(|id| PlanConfig {
                id,
                settings: format!("# synthetic config {id}\n"),
            })
            .collect())
    }
}

fn cmd_collect(args: &CollectArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let plan = CollectionPlan {
        instances: instance_files(&args.instances)?,
        configs: plan_configs(args)?,
        seeds: (0..args.seeds as u64).map(|s| args.seed_base + s).collect(),
        time_limit: args.time_limit,
        parallelism: args.parallelism,
    };
    let records = if let Some(program) = &args.adapter_cmd {
        let work_dir = args
            .journal
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
            .join("adapter-work");
        std::fs::create_dir_all(&work_dir).map_err(data)?;
        let adapter = ProcessAdapter::new(program.clone(), args.adapter_args.clone(), work_dir);
        run_collection(&plan, &adapter, &args.journal).map_err(harness_error)?
    } else {
        let adapter = SyntheticAdapter::new(args.noise);
        run_collection(&plan, &adapter, &args.journal).map_err(harness_error)?
    };
    info!(
        "collect: {} records ({} instances x {} configs x {} seeds) in {}",
        records.len(),
        plan.instances.len(),
        plan.configs.len(),
        plan.seeds.len(),
        args.journal.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

/// The chosen portfolio, written by `select` and consumed by `train`,
/// `predict` and `cluster-fit`.
#[derive(Debug, Serialize, Deserialize)]
struct PortfolioFile {
    config_ids: Vec<usize>,
    k: usize,
    epsilon: f64,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    journal: PathBuf,
    /// Column set of the measured matrix: config ids 0..N-1 ...
    #[arg(long)]
    n_configs: Option<usize>,
    /// ... or an explicit comma-separated id list.
    #[arg(long, value_delimiter = ',', conflicts_with = "n_configs")]
    config_ids: Option<Vec<usize>>,
    /// Relative quality-gap threshold for the portfolio size.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Chain length cap (defaults to the full column count).
    #[arg(long)]
    k_max: Option<usize>,
    /// Chain table output (k, added_config_id, q_of_prefix, q_full).
    #[arg(long)]
    chain: PathBuf,
    /// Portfolio JSON output.
    #[arg(long)]
    portfolio: PathBuf,
}

fn config_id_set(
    n_configs: Option<usize>,
    config_ids: &Option<Vec<usize>>,
) -> Result<Vec<usize>, CliError> {
    match (n_configs, config_ids) {
        (Some(n), None) => Ok((0..n).collect()),
        (None, Some(ids)) if !ids.is_empty() => Ok(ids.clone()),
        _ => Err(CliError::Usage(
            "exactly one of --n-configs or --config-ids is required".into(),
        )),
    }
}

fn load_matrix(journal: &Path, config_ids: &[usize]) -> Result<PerfMatrix, CliError> {
    let records = load_records(journal).map_err(data)?;
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "journal {} is missing or empty",
            journal.display()
        )));
    }
    aggregate(&records, config_ids).map_err(data)
}

fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    if args.epsilon.is_nan() || args.epsilon < 0.0 {
        return Err(CliError::Usage(format!(
            "--epsilon must be >= 0, got {}",
            args.epsilon
        )));
    }
    let ids = config_id_set(args.n_configs, &args.config_ids)?;
    let matrix = load_matrix(&args.journal, &ids)?;
    let k_max = args.k_max.unwrap_or(matrix.n_configs());
    let chain = greedy_chain(&matrix, k_max).map_err(data)?;
    let k = choose_size(&chain, args.epsilon);
    write_file(&args.chain, chain.to_table())?;
    let portfolio = PortfolioFile {
        config_ids: chain.prefix(k).to_vec(),
        k,
        epsilon: args.epsilon,
    };
    write_file(
        &args.portfolio,
        serde_json::to_string_pretty(&portfolio).map_err(data)? + "\n",
    )?;
    info!(
        "select: chose k = {k} of {} configs (epsilon = {}), q(S_k) = {}, q(full) = {}",
        matrix.n_configs(),
        args.epsilon,
        chain.prefix_quality[k - 1],
        chain.full_quality
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train / predict
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    journal: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    portfolio: PathBuf,
    /// Ensemble output file.
    #[arg(long)]
    model: PathBuf,
    /// Training log output (one file, members concatenated).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    members: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.15)]
    val_fraction: f64,
}

fn read_portfolio(path: &Path) -> Result<PortfolioFile, CliError> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| CliError::Data(format!("bad portfolio file {}: {e}", path.display())))
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    if args.members == 0 {
        return Err(CliError::Usage("--members must be at least 1".into()));
    }
    let portfolio = read_portfolio(&args.portfolio)?;
    let matrix = load_matrix(&args.journal, &portfolio.config_ids)?;
    let targets = standardize(&matrix);
    let instances = load_instances(&args.instances)?;
    let mut dataset = Vec::new();
    for instance in &instances {
        let Some(row) = matrix.instance_index(&instance.id) else {
            return Err(CliError::Data(format!(
                "instance '{}' has no journal records",
                instance.id
            )));
        };
        dataset.push((graph_of(instance), targets.row(row).to_vec()));
    }

    let config = TrainConfig {
        hidden: args.hidden,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        val_fraction: args.val_fraction,
        ..TrainConfig::default()
    };
    // Shared seeded split, then per-member seeds inside train_ensemble.
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    confscout_core::rng::SplitMix64::new(args.seed ^ 0x51D5_51D5).shuffle(&mut order);
    let n_val = ((dataset.len() as f64) * args.val_fraction).floor() as usize;
    let n_train = dataset.len() - n_val;
    let train_set: Vec<_> = order[..n_train].iter().map(|&i| dataset[i].clone()).collect();
    let val_set: Vec<_> = order[n_train..].iter().map(|&i| dataset[i].clone()).collect();

    let (ensemble, outcomes) =
        train_ensemble(&train_set, &val_set, &config, args.members).map_err(data)?;
    write_file(&args.model, save_ensemble(&ensemble))?;
    if let Some(log_path) = &args.log {
        let mut text = String::new();
        for (member, outcome) in outcomes.iter().enumerate() {
            text.push_str(&format!("# member {member} (best epoch {})\n", outcome.best_epoch));
            text.push_str(&format_log(&outcome.log));
        }
        write_file(log_path, text)?;
    }
    for (member, outcome) in outcomes.iter().enumerate() {
        let last = outcome.log.last().expect("non-empty log");
        info!(
            "train: member {member} stopped at epoch {} (best {}), val MSE {:.6}",
            last.epoch, outcome.best_epoch, last.val_mse
        );
    }
    info!("train: wrote ensemble of {} to {}", args.members, args.model.display());
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    portfolio: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    /// Predictions TSV (instance_id, config_id).
    #[arg(long)]
    out: PathBuf,
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let ensemble = load_ensemble(&read_bytes(&args.model)?).map_err(data)?;
    let portfolio = read_portfolio(&args.portfolio)?;
    if portfolio.config_ids.len() != ensemble.n_outputs() {
        return Err(CliError::Data(format!(
            "portfolio width {} does not match model outputs {}",
            portfolio.config_ids.len(),
            ensemble.n_outputs()
        )));
    }
    let instances = load_instances(&args.instances)?;
    let mut out = String::from("# instance_id\tconfig_id\n");
    for instance in &instances {
        let index = ensemble.predict_config(&graph_of(instance)).map_err(data)?;
        out.push_str(&format!("{}\t{}\n", instance.id, portfolio.config_ids[index]));
    }
    write_file(&args.out, out)?;
    info!("predict: wrote {} predictions to {}", instances.len(), args.out.display());
    Ok(())
}

/// Parse a predictions TSV back into (instance_id -> config_id).
fn read_predictions(path: &Path) -> Result<BTreeMap<String, usize>, CliError> {
    let mut map = BTreeMap::new();
    for (idx, line) in read_to_string(path)?.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, config) = line.split_once('\t').ok_or_else(|| {
            CliError::Data(format!("{}:{}: expected two fields", path.display(), idx + 1))
        })?;
        let config = config.trim().parse().map_err(|_| {
            CliError::Data(format!("{}:{}: bad config id '{config}'", path.display(), idx + 1))
        })?;
        map.insert(id.to_string(), config);
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// cluster-fit / cluster-predict
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ClusterFitArgs {
    #[arg(long)]
    journal: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    n_configs: Option<usize>,
    #[arg(long, value_delimiter = ',', conflicts_with = "n_configs")]
    config_ids: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2)]
    min_cluster_size: usize,
    /// Cluster model output (text table).
    #[arg(long)]
    model: PathBuf,
}

fn cmd_cluster_fit(args: &ClusterFitArgs) -> Result<(), CliError> {
    let ids = config_id_set(args.n_configs, &args.config_ids)?;
    let matrix = load_matrix(&args.journal, &ids)?;
    let instances = load_instances(&args.instances)?;
    let model = fit_clusters(&instances, &matrix, args.min_cluster_size).map_err(data)?;
    info!(
        "cluster-fit: {} clusters + residual config {}",
        model.clusters.len(),
        model.residual
    );
    write_file(&args.model, model.to_table())
}

#[derive(Args)]
struct ClusterPredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_cluster_predict(args: &ClusterPredictArgs) -> Result<(), CliError> {
    let model = ClusterModel::from_table(&read_to_string(&args.model)?).map_err(data)?;
    let instances = load_instances(&args.instances)?;
    let mut out = String::from("# instance_id\tconfig_id\n");
    for instance in &instances {
        out.push_str(&format!("{}\t{}\n", instance.id, predict_cluster(&model, instance)));
    }
    write_file(&args.out, out)?;
    info!(
        "cluster-predict: wrote {} predictions to {}",
        instances.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate / report
// ---------------------------------------------------------------------------

#[derive(Args, Clone)]
struct EvaluateArgs {
    /// Candidate per-run results (instance_id, seed, config_id, gamma).
    #[arg(long)]
    candidate: PathBuf,
    /// Baseline per-run results, paired by (instance_id, seed).
    #[arg(long)]
    baseline: PathBuf,
    /// Report text output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = -1.0)]
    hist_min: f64,
    #[arg(long, default_value_t = 1.0)]
    hist_max: f64,
    #[arg(long, default_value_t = 20)]
    hist_bins: usize,
}

/// Pair two run files on (instance_id, seed); both must cover the same runs.
fn paired_gammas(
    candidate: &[RunResult],
    baseline: &[RunResult],
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let key = |r: &RunResult| (r.instance_id.clone(), r.seed);
    let mut candidate_map = BTreeMap::new();
    for r in candidate {
        if candidate_map.insert(key(r), r.gamma).is_some() {
            return Err(CliError::Data(format!(
                "duplicate candidate run ({}, seed {})",
                r.instance_id, r.seed
            )));
        }
    }
    let mut baseline_map = BTreeMap::new();
    for r in baseline {
        if baseline_map.insert(key(r), r.gamma).is_some() {
            return Err(CliError::Data(format!(
                "duplicate baseline run ({}, seed {})",
                r.instance_id, r.seed
            )));
        }
    }
    if candidate_map.len() != baseline_map.len()
        || !candidate_map.keys().eq(baseline_map.keys())
    {
        return Err(CliError::Data(
            "candidate and baseline files cover different (instance, seed) runs".into(),
        ));
    }
    Ok((
        candidate_map.values().copied().collect(),
        baseline_map.values().copied().collect(),
    ))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<confscout_core::eval::EvalReport, CliError> {
    let candidate = load_run_results(&args.candidate).map_err(data)?;
    let baseline = load_run_results(&args.baseline).map_err(data)?;
    let (c, b) = paired_gammas(&candidate, &baseline)?;
    let spec = HistogramSpec {
        min: args.hist_min,
        max: args.hist_max,
        n_bins: args.hist_bins,
    };
    let report = compare(&c, &b, &spec).map_err(data)?;
    let text = report.to_text();
    match &args.out {
        Some(path) => write_file(path, text)?,
        None => print!("{text}"),
    }
    info!(
        "evaluate: {} runs, totals {:.6e} vs {:.6e} ({:+.1}%), wins {}/{} ({} ties)",
        report.improvements.len(),
        report.total_candidate,
        report.total_baseline,
        100.0 * (report.total_candidate - report.total_baseline) / report.total_baseline,
        report.wins_candidate,
        report.wins_baseline,
        report.ties
    );
    Ok(report)
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    evaluate: EvaluateArgs,
    /// Histogram SVG output.
    #[arg(long)]
    svg: PathBuf,
    /// Title for the figure.
    #[arg(long, default_value = "per-run improvement over baseline")]
    title: String,
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let report = cmd_evaluate(&args.evaluate)?;
    write_file(&args.svg, histogram_svg(&report, &args.title))?;
    // Table-style summary on stdout (stdout of `evaluate` already carries the
    // full report when --out is unset, so only the figure path is added here).
    println!(
        "total_candidate\t{}\ntotal_baseline\t{}\nwins\t{}/{}\nmean_improvement\t{}\nmedian_improvement\t{}\nsvg\t{}",
        report.total_candidate,
        report.total_baseline,
        report.wins_candidate,
        report.wins_baseline,
        report.mean_improvement,
        report.median_improvement,
        args.svg.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PipelineArgs {
    /// Working directory for all stage artifacts.
    #[arg(long)]
    workdir: PathBuf,
    /// Training instances per density family.
    #[arg(long, default_value_t = 12)]
    train_per_family: usize,
    /// Test instances per density family.
    #[arg(long, default_value_t = 4)]
    test_per_family: usize,
    #[arg(long, default_value_t = 8)]
    n_configs: usize,
    #[arg(long, default_value_t = 2)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE_AMP)]
    noise: f64,
    #[arg(long, default_value_t = 3)]
    members: usize,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long, default_value_t = 900.0)]
    time_limit: f64,
    /// Baseline config id for the final comparison.
    #[arg(long, default_value_t = 0)]
    baseline_config: usize,
}

fn stage<T>(name: &str, result: Result<T, CliError>) -> Result<T, CliError> {
    result.map_err(|e| match e {
        CliError::Usage(msg) => CliError::Usage(format!("stage {name}: {msg}")),
        CliError::Data(msg) => CliError::Data(format!("stage {name}: {msg}")),
        CliError::Adapter(msg) => CliError::Adapter(format!("stage {name}: {msg}")),
    })
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let w = &args.workdir;

    // generate
    stage("generate", {
        let run = || -> Result<(), CliError> {
            for (tag, per_family, seed_offset) in [
                ("train", args.train_per_family, 0u64),
                ("test", args.test_per_family, 100),
            ] {
                for (f_idx, family) in Family::ALL.iter().enumerate() {
                    let instances = generate_synthetic_instances(
                        *family,
                        per_family,
                        args.seed + seed_offset + f_idx as u64,
                    );
                    for instance in instances {
                        write_file(
                            &w.join(format!("instances-{tag}/{}.json", instance.id)),
                            emit_milp_json(&instance),
                        )?;
                    }
                }
            }
            Ok(())
        };
        run()
    })?;
    info!("pipeline: generated instances under {}", w.display());

    // collect (train + test journals)
    for tag in ["train", "test"] {
        stage(
            "collect",
            cmd_collect(&CollectArgs {
                instances: w.join(format!("instances-{tag}")),
                journal: w.join(format!("journal-{tag}.tsv")),
                n_configs: Some(args.n_configs),
                settings_dir: None,
                seeds: args.seeds,
                seed_base: 0,
                parallelism: args.parallelism,
                time_limit: args.time_limit,
                noise: args.noise,
                adapter_cmd: None,
                adapter_args: vec![],
            }),
        )?;
    }

    // select
    stage(
        "select",
        cmd_select(&SelectArgs {
            journal: w.join("journal-train.tsv"),
            n_configs: Some(args.n_configs),
            config_ids: None,
            epsilon: args.epsilon,
            k_max: None,
            chain: w.join("chain.tsv"),
            portfolio: w.join("portfolio.json"),
        }),
    )?;

    // train
    stage(
        "train",
        cmd_train(&TrainArgs {
            journal: w.join("journal-train.tsv"),
            instances: w.join("instances-train"),
            portfolio: w.join("portfolio.json"),
            model: w.join("model.bin"),
            log: Some(w.join("train_log.tsv")),
            members: args.members,
            seed: args.seed,
            hidden: args.hidden,
            epochs: args.epochs,
            batch_size: 16,
            patience: args.epochs.max(4) / 2,
            lr: 1e-3,
            val_fraction: 0.2,
        }),
    )?;

    // predict on test instances
    stage(
        "predict",
        cmd_predict(&PredictArgs {
            model: w.join("model.bin"),
            portfolio: w.join("portfolio.json"),
            instances: w.join("instances-test"),
            out: w.join("predictions.tsv"),
        }),
    )?;

    // cluster-fit + cluster-predict (the anonymous-task path, for comparison)
    stage(
        "cluster-fit",
        cmd_cluster_fit(&ClusterFitArgs {
            journal: w.join("journal-train.tsv"),
            instances: w.join("instances-train"),
            n_configs: Some(args.n_configs),
            config_ids: None,
            min_cluster_size: 2,
            model: w.join("clusters.tsv"),
        }),
    )?;
    stage(
        "cluster-predict",
        cmd_cluster_predict(&ClusterPredictArgs {
            model: w.join("clusters.tsv"),
            instances: w.join("instances-test"),
            out: w.join("cluster_predictions.tsv"),
        }),
    )?;

    // Build per-run results for the model's picks and the baseline config
    // from the test journal, then evaluate + report.
    stage("evaluate", {
        let run = || -> Result<(), CliError> {
            let predictions = read_predictions(&w.join("predictions.tsv"))?;
            let records = load_records(&w.join("journal-test.tsv")).map_err(data)?;
            let mut candidate = Vec::new();
            let mut baseline = Vec::new();
            for record in &records {
                if record.status != confscout_core::perfdb::RunStatus::Ok {
                    continue;
                }
                let chosen = predictions.get(&record.instance_id).copied().ok_or_else(|| {
                    CliError::Data(format!("no prediction for '{}'", record.instance_id))
                })?;
                let result = RunResult {
                    instance_id: record.instance_id.clone(),
                    seed: record.seed,
                    config_id: record.config_id,
                    gamma: record.gamma,
                };
                if record.config_id == chosen {
                    candidate.push(result.clone());
                }
                if record.config_id == args.baseline_config {
                    baseline.push(result);
                }
            }
            write_file(
                &w.join("runs_candidate.tsv"),
                confscout_core::eval::emit_run_results(&candidate),
            )?;
            write_file(
                &w.join("runs_baseline.tsv"),
                confscout_core::eval::emit_run_results(&baseline),
            )?;
            Ok(())
        };
        run()
    })?;
    stage(
        "report",
        cmd_report(&ReportArgs {
            evaluate: EvaluateArgs {
                candidate: w.join("runs_candidate.tsv"),
                baseline: w.join("runs_baseline.tsv"),
                out: Some(w.join("report.txt")),
                hist_min: -1.0,
                hist_max: 1.0,
                hist_bins: 20,
            },
            svg: w.join("histogram.svg"),
            title: "model-chosen configs vs baseline".into(),
        }),
    )?;
    info!("pipeline: all artifacts under {}", w.display());
    Ok(())
}
