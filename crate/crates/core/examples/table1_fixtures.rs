//! Regenerates the benchmark comparison fixtures under
//! `tests/fixtures/table1/`. Run from the crate directory:
//!
//! ```text
//! cargo run -p confscout-core --example table1_fixtures
//! ```
//!
//! Each benchmark is a 100-run paired candidate/baseline file pair with
//! pinned totals and win counts:
//!
//! * item-placement: totals 1.36e6 vs 1.54e6, wins 66/34, 100 instances × 1 seed
//! * load-balancing: totals 1.33e6 vs 2.08e6, wins 95/5, 100 instances × 1 seed
//! * anonymous: totals 2.73e10 vs 2.96e10, wins 38/62, 20 instances × 5 seeds
//!
//! Construction: winners carry a fixed share of the baseline mass and
//! improve by a uniform factor d; losers worsen by the same d. With winner
//! mass share s, the total ratio is 1 - d(2s - 1), so d is solved from the
//! pinned totals. Values inside each pool follow a deterministic ramp.

use confscout_core::eval::{emit_run_results, RunResult};
use confscout_core::rng::SplitMix64;
use std::path::Path;

struct Benchmark {
    name: &'static str,
    total_candidate: f64,
    total_baseline: f64,
    wins_candidate: usize,
    n_instances: usize,
    n_seeds: u64,
    winner_mass_share: f64,
    shuffle_seed: u64,
}

fn main() {
    let out_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/table1");
    std::fs::create_dir_all(&out_dir).expect("create fixture dir");

    let benchmarks = [
        Benchmark {
            name: "item_placement",
            total_candidate: 1.36e6,
            total_baseline: 1.54e6,
            wins_candidate: 66,
            n_instances: 100,
            n_seeds: 1,
            winner_mass_share: 0.80,
            shuffle_seed: 11,
        },
        Benchmark {
            name: "load_balancing",
            total_candidate: 1.33e6,
            total_baseline: 2.08e6,
            wins_candidate: 95,
            n_instances: 100,
            n_seeds: 1,
            winner_mass_share: 0.95,
            shuffle_seed: 22,
        },
        Benchmark {
            name: "anonymous",
            total_candidate: 2.73e10,
            total_baseline: 2.96e10,
            wins_candidate: 38,
            n_instances: 20,
            n_seeds: 5,
            winner_mass_share: 0.75,
            shuffle_seed: 33,
        },
    ];

    for b in &benchmarks {
        let n_runs = b.n_instances * b.n_seeds as usize;
        let ratio = b.total_candidate / b.total_baseline;
        let s = b.winner_mass_share;
        // 1 - ratio = d * (2s - 1)
        let d = (1.0 - ratio) / (2.0 * s - 1.0);
        assert!(d > 0.0 && d < 1.0, "{}: d = {d}", b.name);

        // Which runs win: a seeded permutation's first `wins` entries.
        let mut order: Vec<usize> = (0..n_runs).collect();
        SplitMix64::new(b.shuffle_seed).shuffle(&mut order);
        let mut is_winner = vec![false; n_runs];
        for &run in order.iter().take(b.wins_candidate) {
            is_winner[run] = true;
        }

        // Ramp weights inside each pool.
        let ramp = |k: usize| 1.0 + 0.37 * ((k * 7) % 11) as f64;
        let mut winner_weight_total = 0.0;
        let mut loser_weight_total = 0.0;
        for (run, &w) in is_winner.iter().enumerate() {
            if w {
                winner_weight_total += ramp(run);
            } else {
                loser_weight_total += ramp(run);
            }
        }
        let winner_mass = s * b.total_baseline;
        let loser_mass = (1.0 - s) * b.total_baseline;

        let mut candidate = Vec::with_capacity(n_runs);
        let mut baseline = Vec::with_capacity(n_runs);
        for (run, &winner) in is_winner.iter().enumerate() {
            let instance_id = format!("{}-{:04}", b.name.replace('_', "-"), run / b.n_seeds as usize);
            let seed = (run % b.n_seeds as usize) as u64;
            let base_gamma = if winner {
                winner_mass * ramp(run) / winner_weight_total
            } else {
                loser_mass * ramp(run) / loser_weight_total
            };
            let cand_gamma = if winner {
                base_gamma * (1.0 - d)
            } else {
                base_gamma * (1.0 + d)
            };
            baseline.push(RunResult {
                instance_id: instance_id.clone(),
                seed,
                config_id: 0,
                gamma: base_gamma,
            });
            candidate.push(RunResult {
                instance_id,
                seed,
                config_id: 1,
                gamma: cand_gamma,
            });
        }

        let check = |rs: &[RunResult]| rs.iter().map(|r| r.gamma).sum::<f64>();
        let total_c = check(&candidate);
        let total_b = check(&baseline);
        assert!((total_c / b.total_candidate - 1.0).abs() < 1e-9, "{}", b.name);
        assert!((total_b / b.total_baseline - 1.0).abs() < 1e-9, "{}", b.name);

        std::fs::write(
            out_dir.join(format!("{}_candidate.tsv", b.name)),
            emit_run_results(&candidate),
        )
        .unwrap();
        std::fs::write(
            out_dir.join(format!("{}_baseline.tsv", b.name)),
            emit_run_results(&baseline),
        )
        .unwrap();
        println!(
            "{}: {} runs, candidate total {total_c:.6e}, baseline total {total_b:.6e}, d = {d:.4}",
            b.name, n_runs
        );
    }
}
