//! Browser demo bindings.
//!
//! Three interactive explorers, each a single function taking plain scalars
//! or JSON text and returning a JSON document `{svg, summary}` (or
//! `{error}`), so the page needs no framework and no typed bindings. The
//! heavy lifting (synthetic instances, the measured performance matrix,
//! greedy selection, integrals, comparison statistics) is the same code the
//! CLI runs.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use confscout_core::eval::{
    compare, primal_dual_integral, BoundTrace, HistogramSpec, TraceEvent,
};
use confscout_core::harness::{
    generate_synthetic_instances, synthetic_gamma_by_index, Family, SYNTHETIC_CONFIGS,
};
use confscout_core::perfdb::{aggregate, PerfRecord, RunStatus};
use confscout_core::plot::{gap_area_svg, histogram_svg, quality_curve_svg};
use confscout_core::rng::SplitMix64;
use confscout_core::selector::{choose_size, greedy_chain};

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"))
}

fn error_json(message: impl std::fmt::Display) -> String {
    #[derive(Serialize)]
    struct ErrorDoc {
        error: String,
    }
    to_json(&ErrorDoc {
        error: message.to_string(),
    })
}

#[derive(Serialize)]
struct PortfolioDoc {
    svg: String,
    chosen_k: usize,
    n_configs: usize,
    n_instances: usize,
    picks: Vec<usize>,
    prefix_quality: Vec<f64>,
    full_quality: f64,
}

/// Greedy portfolio explorer: measure a synthetic instance set over the
/// synthetic solver's 8 configurations, build the greedy chain and choose
/// the portfolio size at `epsilon`.
#[wasm_bindgen]
pub fn portfolio_explorer(n_per_family: u32, seed: u32, epsilon: f64, noise: f64) -> String {
    if !(0.0..=0.5).contains(&noise) {
        return error_json("noise must be in [0, 0.5]");
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return error_json("epsilon must be in [0, 1]");
    }
    let n_per_family = n_per_family.clamp(1, 60) as usize;

    // In-memory collection: one record per (instance, config, seed).
    let mut records = Vec::new();
    let mut n_instances = 0;
    for family in Family::ALL {
        for instance in generate_synthetic_instances(family, n_per_family, seed as u64) {
            n_instances += 1;
            for config in 0..SYNTHETIC_CONFIGS {
                for run_seed in 0..2u64 {
                    let gamma = match synthetic_gamma_by_index(&instance, config, run_seed, noise)
                    {
                        Ok(gamma) => gamma,
                        Err(e) => return error_json(e),
                    };
                    records.push(PerfRecord {
                        instance_id: instance.id.clone(),
                        config_id: config,
                        seed: run_seed,
                        gamma,
                        status: RunStatus::Ok,
                    });
                }
            }
        }
    }
    let configs: Vec<usize> = (0..SYNTHETIC_CONFIGS).collect();
    let matrix = match aggregate(&records, &configs) {
        Ok(matrix) => matrix,
        Err(e) => return error_json(e),
    };
    let chain = match greedy_chain(&matrix, matrix.n_configs()) {
        Ok(chain) => chain,
        Err(e) => return error_json(e),
    };
    let chosen_k = choose_size(&chain, epsilon);
    let svg = quality_curve_svg(
        &chain.prefix_quality,
        chain.full_quality,
        chosen_k,
        &format!("greedy portfolio quality over {n_instances} instances"),
    );
    to_json(&PortfolioDoc {
        svg,
        chosen_k,
        n_configs: matrix.n_configs(),
        n_instances,
        picks: chain.picks.clone(),
        prefix_quality: chain.prefix_quality.clone(),
        full_quality: chain.full_quality,
    })
}

#[derive(Serialize)]
struct IntegralDoc {
    svg: String,
    gamma: f64,
    n_events: usize,
}

/// Primal-dual integral explorer. `events_json` is `[[t, primal|null, dual],
/// ...]`; the integral runs to `horizon` with the gap capped at `gap_cap`.
#[wasm_bindgen]
pub fn integral_explorer(events_json: &str, gap_cap: f64, horizon: f64) -> String {
    let rows: Vec<(f64, Option<f64>, f64)> = match serde_json::from_str(events_json) {
        Ok(rows) => rows,
        Err(e) => return error_json(format!("events: {e}")),
    };
    let events: Vec<TraceEvent> = rows
        .into_iter()
        .map(|(t, primal, dual)| TraceEvent { t, primal, dual })
        .collect();
    let n_events = events.len();
    let trace = match BoundTrace::new(events, horizon) {
        Ok(trace) => trace,
        Err(e) => return error_json(e),
    };
    let gamma = match primal_dual_integral(&trace, gap_cap) {
        Ok(gamma) => gamma,
        Err(e) => return error_json(e),
    };
    // Rebuild the capped step segments for drawing.
    let mut segments = Vec::new();
    let events = trace.events();
    for (idx, event) in events.iter().enumerate() {
        if event.t >= horizon {
            break;
        }
        let end = events.get(idx + 1).map_or(horizon, |n| n.t.min(horizon));
        let gap = match event.primal {
            None => gap_cap,
            Some(p) => (p - event.dual).min(gap_cap),
        };
        segments.push((event.t, end, gap));
    }
    let svg = gap_area_svg(&segments, gap_cap, gamma, "primal-dual gap over time");
    to_json(&IntegralDoc {
        svg,
        gamma,
        n_events,
    })
}

#[derive(Serialize)]
struct ComparisonDoc {
    svg: String,
    wins_candidate: usize,
    wins_baseline: usize,
    ties: usize,
    total_candidate: f64,
    total_baseline: f64,
    total_improvement: f64,
    mean_improvement: f64,
    median_improvement: f64,
}

/// Comparison explorer: synthesize `n_runs` paired gammas where the
/// candidate beats the baseline by `advantage` on average with per-run
/// spread `spread`, then show the win counts and improvement histogram.
#[wasm_bindgen]
pub fn comparison_explorer(n_runs: u32, seed: u32, advantage: f64, spread: f64) -> String {
    if !(-0.9..=0.9).contains(&advantage) {
        return error_json("advantage must be in [-0.9, 0.9]");
    }
    if !(0.0..=2.0).contains(&spread) {
        return error_json("spread must be in [0, 2]");
    }
    let n_runs = n_runs.clamp(2, 2000) as usize;
    let mut rng = SplitMix64::new(seed as u64 ^ 0xDE_90_15);
    let mut candidate = Vec::with_capacity(n_runs);
    let mut baseline = Vec::with_capacity(n_runs);
    for _ in 0..n_runs {
        let base = rng.uniform(50.0, 1000.0);
        let factor = (1.0 - advantage + spread * rng.next_normal()).max(0.01);
        baseline.push(base);
        candidate.push(base * factor);
    }
    let report = match compare(&candidate, &baseline, &HistogramSpec::default()) {
        Ok(report) => report,
        Err(e) => return error_json(e),
    };
    let svg = histogram_svg(&report, &format!("improvement over {n_runs} paired runs"));
    to_json(&ComparisonDoc {
        svg,
        wins_candidate: report.wins_candidate,
        wins_baseline: report.wins_baseline,
        ties: report.ties,
        total_candidate: report.total_candidate,
        total_baseline: report.total_baseline,
        total_improvement: (report.total_candidate - report.total_baseline)
            / report.total_baseline,
        mean_improvement: report.mean_improvement,
        median_improvement: report.median_improvement,
    })
}
