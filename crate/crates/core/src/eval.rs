//! Primal-dual integrals from bound traces and candidate vs baseline
//! comparison statistics.
//!
//! The integral uses step (piecewise-constant, left-closed) interpolation of
//! the most recent bound event and caps the gap at `gap_cap`; periods without
//! an incumbent contribute the cap. Comparison reports carry totals, strict
//! win counts, per-run relative improvements, their mean/median and a
//! clamped-tail histogram.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trace must contain at least one event")]
    EmptyTrace,
    #[error("event {index}: time {t} decreases (previous {prev})")]
    TimeOrder { index: usize, t: f64, prev: f64 },
    #[error("first event must be at t = 0, got {0}")]
    FirstEventNotZero(f64),
    #[error("event {index}: non-finite bound")]
    NonFiniteBound { index: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("gap_cap must be positive, got {0}")]
    BadGapCap(f64),
    #[error("negative gap {gap} at t = {t}: trace is corrupted or mis-signed")]
    NegativeGap { t: f64, gap: f64 },
    #[error("baseline gamma must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("candidate and baseline lengths differ: {candidate} vs {baseline}")]
    LengthMismatch { candidate: usize, baseline: usize },
    #[error("histogram needs at least one bin and max > min")]
    BadHistogram,
    #[error("results line {line}: {msg}")]
    BadResultsLine { line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One bound event: at time `t` the incumbent (primal) is `primal`
/// (`None` = no incumbent yet) and the relaxation bound is `dual`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub primal: Option<f64>,
    pub dual: f64,
}

/// A time-ordered bound trace over a fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTrace {
    events: Vec<TraceEvent>,
    pub horizon: f64,
}

impl BoundTrace {
    pub fn new(events: Vec<TraceEvent>, horizon: f64) -> Result<Self, EvalError> {
        if events.is_empty() {
            return Err(EvalError::EmptyTrace);
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(EvalError::BadHorizon(horizon));
        }
        if events[0].t != 0.0 {
            return Err(EvalError::FirstEventNotZero(events[0].t));
        }
        let mut prev = 0.0;
        for (index, event) in events.iter().enumerate() {
            if !event.t.is_finite() || !event.dual.is_finite() {
                return Err(EvalError::NonFiniteBound { index });
            }
            if let Some(p) = event.primal {
                if !p.is_finite() {
                    return Err(EvalError::NonFiniteBound { index });
                }
            }
            if event.t < prev {
                return Err(EvalError::TimeOrder {
                    index,
                    t: event.t,
                    prev,
                });
            }
            prev = event.t;
        }
        Ok(Self { events, horizon })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

/// γ = ∫₀ᵀ min(gap(t), gap_cap) dt under step interpolation.
///
/// gap(t) is primal − dual of the most recent event; while no incumbent
/// exists the gap counts as `gap_cap`. A negative gap at a finite-incumbent
/// event is rejected.
pub fn primal_dual_integral(trace: &BoundTrace, gap_cap: f64) -> Result<f64, EvalError> {
    if !(gap_cap.is_finite() && gap_cap > 0.0) {
        return Err(EvalError::BadGapCap(gap_cap));
    }
    let mut total = 0.0;
    let events = trace.events();
    for (idx, event) in events.iter().enumerate() {
        let start = event.t;
        if start >= trace.horizon {
            break;
        }
        let end = events
            .get(idx + 1)
            .map_or(trace.horizon, |next| next.t.min(trace.horizon));
        let gap = match event.primal {
            None => gap_cap,
            Some(primal) => {
                let gap = primal - event.dual;
                if gap < 0.0 {
                    return Err(EvalError::NegativeGap { t: start, gap });
                }
                gap.min(gap_cap)
            }
        };
        total += gap * (end - start);
    }
    Ok(total)
}

/// Sum of per-instance integrals.
pub fn total_integral(gammas: &[f64]) -> f64 {
    gammas.iter().sum()
}

/// Relative improvement (γ_candidate − γ_baseline) / γ_baseline;
/// negative means the candidate is better.
pub fn improvement(gamma_candidate: f64, gamma_baseline: f64) -> Result<f64, EvalError> {
    if gamma_baseline.is_nan() || gamma_baseline <= 0.0 {
        return Err(EvalError::NonPositiveBaseline(gamma_baseline));
    }
    Ok((gamma_candidate - gamma_baseline) / gamma_baseline)
}

/// Histogram layout: `n_bins` equal bins over [min, max] with values outside
/// the range counted into the first/last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub min: f64,
    pub max: f64,
    pub n_bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            min: -1.0,
            max: 1.0,
            n_bins: 20,
        }
    }
}

impl HistogramSpec {
    pub fn bin_edges(&self) -> Vec<f64> {
        let width = (self.max - self.min) / self.n_bins as f64;
        (0..=self.n_bins).map(|i| self.min + i as f64 * width).collect()
    }

    fn bin_of(&self, value: f64) -> usize {
        if value <= self.min {
            return 0;
        }
        if value >= self.max {
            return self.n_bins - 1;
        }
        let width = (self.max - self.min) / self.n_bins as f64;
        (((value - self.min) / width) as usize).min(self.n_bins - 1)
    }
}

/// Full candidate vs baseline comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total_candidate: f64,
    pub total_baseline: f64,
    pub wins_candidate: usize,
    pub wins_baseline: usize,
    pub ties: usize,
    /// Per-run (γ_candidate − γ_baseline) / γ_baseline.
    pub improvements: Vec<f64>,
    pub mean_improvement: f64,
    pub median_improvement: f64,
    pub histogram_spec: HistogramSpec,
    pub histogram_counts: Vec<usize>,
}

/// Median with the even-length convention of averaging the two middle values.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Compare paired runs.
pub fn compare(
    candidate: &[f64],
    baseline: &[f64],
    histogram: &HistogramSpec,
) -> Result<EvalReport, EvalError> {
    if candidate.len() != baseline.len() {
        return Err(EvalError::LengthMismatch {
            candidate: candidate.len(),
            baseline: baseline.len(),
        });
    }
    let span = histogram.max - histogram.min;
    if histogram.n_bins == 0 || span.is_nan() || span <= 0.0 {
        return Err(EvalError::BadHistogram);
    }
    let mut wins_candidate = 0;
    let mut wins_baseline = 0;
    let mut ties = 0;
    let mut improvements = Vec::with_capacity(candidate.len());
    for (&c, &b) in candidate.iter().zip(baseline) {
        if c < b {
            wins_candidate += 1;
        } else if b < c {
            wins_baseline += 1;
        } else {
            ties += 1;
        }
        improvements.push(improvement(c, b)?);
    }
    let mean_improvement = improvements.iter().sum::<f64>() / improvements.len().max(1) as f64;
    let median_improvement = if improvements.is_empty() {
        0.0
    } else {
        median(&improvements)
    };
    let mut histogram_counts = vec![0usize; histogram.n_bins];
    for &imp in &improvements {
        histogram_counts[histogram.bin_of(imp)] += 1;
    }
    Ok(EvalReport {
        total_candidate: total_integral(candidate),
        total_baseline: total_integral(baseline),
        wins_candidate,
        wins_baseline,
        ties,
        improvements,
        mean_improvement,
        median_improvement,
        histogram_spec: histogram.clone(),
        histogram_counts,
    })
}

impl EvalReport {
    /// Text export: summary key/value lines plus histogram bin counts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# eval report\n");
        out.push_str(&format!("runs\t{}\n", self.improvements.len()));
        out.push_str(&format!("gamma_total_candidate\t{}\n", self.total_candidate));
        out.push_str(&format!("gamma_total_baseline\t{}\n", self.total_baseline));
        out.push_str(&format!("wins_candidate\t{}\n", self.wins_candidate));
        out.push_str(&format!("wins_baseline\t{}\n", self.wins_baseline));
        out.push_str(&format!("ties\t{}\n", self.ties));
        if self.total_baseline > 0.0 {
            out.push_str(&format!(
                "improvement_total\t{}\n",
                (self.total_candidate - self.total_baseline) / self.total_baseline
            ));
        }
        out.push_str(&format!("improvement_mean\t{}\n", self.mean_improvement));
        out.push_str(&format!("improvement_median\t{}\n", self.median_improvement));
        out.push_str("# histogram\tbin_lo\tbin_hi\tcount\n");
        let edges = self.histogram_spec.bin_edges();
        for (i, count) in self.histogram_counts.iter().enumerate() {
            out.push_str(&format!("bin\t{}\t{}\t{}\n", edges[i], edges[i + 1], count));
        }
        out
    }
}

/// One line of a per-run results file: (instance_id, seed, config_id, gamma).
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub instance_id: String,
    pub seed: u64,
    pub config_id: usize,
    pub gamma: f64,
}

/// Render per-run results as the line-delimited results format.
pub fn emit_run_results(results: &[RunResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.instance_id, r.seed, r.config_id, r.gamma
        ));
    }
    out
}

/// Parse a per-run results file.
pub fn parse_run_results(text: &str) -> Result<Vec<RunResult>, EvalError> {
    let mut results = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(EvalError::BadResultsLine {
                line: line_no,
                msg: "expected 4 tab-separated fields".into(),
            });
        }
        let bad = |msg: String| EvalError::BadResultsLine { line: line_no, msg };
        let seed = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad seed '{}'", fields[1])))?;
        let config_id = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad config id '{}'", fields[2])))?;
        let gamma: f64 = fields[3]
            .parse()
            .map_err(|_| bad(format!("bad gamma '{}'", fields[3])))?;
        if !gamma.is_finite() {
            return Err(bad("gamma is not finite".into()));
        }
        results.push(RunResult {
            instance_id: fields[0].to_string(),
            seed,
            config_id,
            gamma,
        });
    }
    Ok(results)
}

/// Load a results file from disk.
pub fn load_run_results(path: &Path) -> Result<Vec<RunResult>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_run_results(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn event(t: f64, primal: Option<f64>, dual: f64) -> TraceEvent {
        TraceEvent { t, primal, dual }
    }

    #[test]
    fn constant_gap_rectangle() {
        let trace = BoundTrace::new(vec![event(0.0, Some(3.0), 1.0)], 10.0).unwrap();
        assert_eq!(primal_dual_integral(&trace, 100.0).unwrap(), 20.0);
    }

    #[test]
    fn two_rectangles() {
        let trace = BoundTrace::new(
            vec![event(0.0, Some(5.0), 1.0), event(5.0, Some(2.0), 1.0)],
            10.0,
        )
        .unwrap();
        assert_eq!(primal_dual_integral(&trace, 100.0).unwrap(), 25.0);
    }

    #[test]
    fn no_incumbent_period_contributes_cap() {
        let trace = BoundTrace::new(
            vec![event(0.0, None, 0.0), event(3.0, Some(4.0), 4.0)],
            10.0,
        )
        .unwrap();
        assert_eq!(primal_dual_integral(&trace, 100.0).unwrap(), 300.0);
    }

    #[test]
    fn gap_above_cap_is_clamped() {
        let trace = BoundTrace::new(vec![event(0.0, Some(50.0), 0.0)], 2.0).unwrap();
        assert_eq!(primal_dual_integral(&trace, 10.0).unwrap(), 20.0);
    }

    #[test]
    fn negative_gap_is_rejected() {
        let trace = BoundTrace::new(vec![event(0.0, Some(1.0), 2.0)], 10.0).unwrap();
        assert!(matches!(
            primal_dual_integral(&trace, 100.0),
            Err(EvalError::NegativeGap { .. })
        ));
    }

    #[test]
    fn events_past_horizon_are_ignored() {
        let trace = BoundTrace::new(
            vec![event(0.0, Some(2.0), 0.0), event(50.0, Some(0.0), 0.0)],
            10.0,
        )
        .unwrap();
        assert_eq!(primal_dual_integral(&trace, 100.0).unwrap(), 20.0);
    }

    #[test]
    fn trace_validation_errors() {
        assert!(matches!(
            BoundTrace::new(vec![], 10.0),
            Err(EvalError::EmptyTrace)
        ));
        assert!(matches!(
            BoundTrace::new(vec![event(1.0, None, 0.0)], 10.0),
            Err(EvalError::FirstEventNotZero(_))
        ));
        assert!(matches!(
            BoundTrace::new(
                vec![event(0.0, None, 0.0), event(2.0, None, 0.0), event(1.0, None, 0.0)],
                10.0
            ),
            Err(EvalError::TimeOrder { index: 2, .. })
        ));
    }

    fn random_step_trace(rng: &mut SplitMix64, horizon: f64) -> BoundTrace {
        let n_events = 1 + rng.below(8);
        let mut times: Vec<f64> = vec![0.0];
        for _ in 1..n_events {
            times.push(rng.uniform(0.0, horizon * 1.1));
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let events = times
            .into_iter()
            .map(|t| {
                if rng.next_f64() < 0.2 {
                    event(t, None, rng.uniform(-5.0, 5.0))
                } else {
                    let dual = rng.uniform(-5.0, 5.0);
                    event(t, Some(dual + rng.uniform(0.0, 8.0)), dual)
                }
            })
            .collect();
        BoundTrace::new(events, horizon).unwrap()
    }

    /// Independent oracle: evaluate gap(t) by scanning the event list at the
    /// midpoint of every inter-breakpoint segment and sum midpoint rectangles.
    fn riemann_oracle(trace: &BoundTrace, gap_cap: f64) -> f64 {
        let mut breaks: Vec<f64> = trace
            .events()
            .iter()
            .map(|e| e.t)
            .filter(|&t| t < trace.horizon)
            .collect();
        breaks.push(trace.horizon);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let gap_at = |t: f64| -> f64 {
            let mut gap = gap_cap;
            for e in trace.events() {
                if e.t > t {
                    break;
                }
                gap = match e.primal {
                    None => gap_cap,
                    Some(p) => (p - e.dual).min(gap_cap),
                };
            }
            gap
        };
        breaks
            .windows(2)
            .map(|w| gap_at(0.5 * (w[0] + w[1])) * (w[1] - w[0]))
            .sum()
    }

    #[test]
    fn integral_matches_riemann_oracle() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..100 {
            let trace = random_step_trace(&mut rng, 10.0);
            let cap = rng.uniform(1.0, 20.0);
            let got = primal_dual_integral(&trace, cap).unwrap();
            let want = riemann_oracle(&trace, cap);
            assert!(
                (got - want).abs() < 1e-9,
                "integral {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn integral_additive_over_concatenation() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let trace = random_step_trace(&mut rng, 10.0);
            let cap = 10.0;
            let split = rng.uniform(0.5, 9.5);
            // Left piece: same events, horizon = split.
            let left = BoundTrace::new(trace.events().to_vec(), split).unwrap();
            // Right piece: state at the split becomes the t=0 event.
            let mut state = trace.events()[0];
            let mut right_events = vec![];
            for e in trace.events() {
                if e.t <= split {
                    state = *e;
                } else {
                    right_events.push(*e);
                }
            }
            state.t = split;
            right_events.insert(0, state);
            let shifted: Vec<TraceEvent> = right_events
                .iter()
                .map(|e| TraceEvent {
                    t: e.t - split,
                    ..*e
                })
                .collect();
            let right = BoundTrace::new(shifted, 10.0 - split).unwrap();
            let whole = primal_dual_integral(&trace, cap).unwrap();
            let parts = primal_dual_integral(&left, cap).unwrap()
                + primal_dual_integral(&right, cap).unwrap();
            assert!((whole - parts).abs() < 1e-9, "{whole} vs {parts}");
        }
    }

    #[test]
    fn integral_scales_linearly_below_cap() {
        let mut rng = SplitMix64::new(88);
        for _ in 0..50 {
            // Gaps kept below cap/lambda so scaling stays below the cap.
            let cap = 1000.0;
            let lambda = rng.uniform(0.1, 3.0);
            let events: Vec<TraceEvent> = {
                let mut times: Vec<f64> = vec![0.0, rng.uniform(1.0, 5.0), rng.uniform(5.0, 9.0)];
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                times
                    .into_iter()
                    .map(|t| event(t, Some(rng.uniform(0.0, 10.0)), 0.0))
                    .collect()
            };
            let base = BoundTrace::new(events.clone(), 10.0).unwrap();
            let scaled_events: Vec<TraceEvent> = events
                .iter()
                .map(|e| event(e.t, e.primal.map(|p| p * lambda), e.dual * lambda))
                .collect();
            let scaled = BoundTrace::new(scaled_events, 10.0).unwrap();
            let a = primal_dual_integral(&base, cap).unwrap();
            let b = primal_dual_integral(&scaled, cap).unwrap();
            assert!((b - lambda * a).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn total_integral_examples() {
        assert_eq!(total_integral(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(total_integral(&[]), 0.0);
        let mut rng = SplitMix64::new(3);
        let values: Vec<f64> = (0..100).map(|_| rng.uniform(0.0, 5.0)).collect();
        let mut manual = 0.0;
        for v in &values {
            manual += v;
        }
        assert_eq!(total_integral(&values), manual);
    }

    #[test]
    fn improvement_benchmark_scale_values() {
        let imp = improvement(1.36e6, 1.54e6).unwrap();
        assert!((imp - (-0.11688311688311688)).abs() < 1e-12);
        let imp = improvement(1.33e6, 2.08e6).unwrap();
        assert!((imp - (-0.3605769230769231)).abs() < 1e-12);
        let imp = improvement(2.73e10, 2.96e10).unwrap();
        assert!((imp - (-0.07770270270270271)).abs() < 1e-12);
        assert!(matches!(
            improvement(1.0, 0.0),
            Err(EvalError::NonPositiveBaseline(_))
        ));
    }

    #[test]
    fn compare_counts_wins_per_side() {
        let report = compare(&[1.0, 5.0], &[2.0, 4.0], &HistogramSpec::default()).unwrap();
        assert_eq!(report.wins_candidate, 1);
        assert_eq!(report.wins_baseline, 1);
        assert_eq!(report.ties, 0);
    }

    #[test]
    fn compare_mean_median_closed_form() {
        let candidate = [0.9, 0.8, 1.06];
        let baseline = [1.0, 1.0, 1.0];
        let report = compare(&candidate, &baseline, &HistogramSpec::default()).unwrap();
        assert!((report.mean_improvement - (-0.08)).abs() < 1e-12);
        assert!((report.median_improvement - (-0.10)).abs() < 1e-12);
    }

    #[test]
    fn wins_plus_ties_equals_runs() {
        let mut rng = SplitMix64::new(4);
        let candidate: Vec<f64> = (0..50).map(|_| rng.uniform(1.0, 10.0)).collect();
        let mut baseline: Vec<f64> = (0..50).map(|_| rng.uniform(1.0, 10.0)).collect();
        baseline[7] = candidate[7]; // force one tie
        let report = compare(&candidate, &baseline, &HistogramSpec::default()).unwrap();
        assert_eq!(
            report.wins_candidate + report.wins_baseline + report.ties,
            50
        );
        assert!(report.ties >= 1);
    }

    #[test]
    fn compare_swap_symmetry() {
        let mut rng = SplitMix64::new(6);
        let candidate: Vec<f64> = (0..30).map(|_| rng.uniform(1.0, 10.0)).collect();
        let baseline: Vec<f64> = (0..30).map(|_| rng.uniform(1.0, 10.0)).collect();
        let spec = HistogramSpec::default();
        let ab = compare(&candidate, &baseline, &spec).unwrap();
        let ba = compare(&baseline, &candidate, &spec).unwrap();
        assert_eq!(ab.wins_candidate, ba.wins_baseline);
        assert_eq!(ab.wins_baseline, ba.wins_candidate);
        // Improvement transform under swap: y = -x / (1 + x).
        for (x, y) in ab.improvements.iter().zip(&ba.improvements) {
            assert!((y - (-x / (1.0 + x))).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_clamps_tails() {
        let spec = HistogramSpec {
            min: -1.0,
            max: 1.0,
            n_bins: 4,
        };
        let candidate = [0.1, 30.0, 0.5];
        let baseline = [1.0, 1.0, 1.0];
        let report = compare(&candidate, &baseline, &spec).unwrap();
        // improvements: -0.9 (bin 0), +29 (clamped to bin 3), -0.5 (bin 0 edge: -0.5 -> bin 0/1 boundary)
        assert_eq!(report.histogram_counts.iter().sum::<usize>(), 3);
        assert_eq!(report.histogram_counts[3], 1);
        assert_eq!(report.histogram_counts[0] + report.histogram_counts[1], 2);
    }

    #[test]
    fn median_even_length_midpoint() {
        assert_eq!(median(&[1.0, 3.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn run_results_round_trip() {
        let results = vec![
            RunResult {
                instance_id: "a".into(),
                seed: 3,
                config_id: 7,
                gamma: 0.375,
            },
            RunResult {
                instance_id: "b".into(),
                seed: 0,
                config_id: 1,
                gamma: 12.5,
            },
        ];
        let text = emit_run_results(&results);
        assert_eq!(parse_run_results(&text).unwrap(), results);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            compare(&[1.0], &[1.0, 2.0], &HistogramSpec::default()),
            Err(EvalError::LengthMismatch { .. })
        ));
    }
}
