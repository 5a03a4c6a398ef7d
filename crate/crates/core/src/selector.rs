//! Greedy portfolio selection over a performance matrix.
//!
//! The quality of a configuration subset S is the negated mean, over
//! instances, of the best gamma available inside S:
//!
//! ```text
//! q(S) = -(1/|I|) * sum_i min_{c in S} gamma_ic
//! ```
//!
//! Growing S can only lower per-row minima, so q is monotone, and the
//! associated gain function is submodular; the greedy chain therefore carries
//! the usual (1 - 1/e) approximation guarantee, which the test suite checks
//! against a brute-force oracle.

use thiserror::Error;

use crate::perfdb::PerfMatrix;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("subset must not be empty")]
    EmptySubset,
    #[error("config {0} is not a column of the matrix")]
    UnknownConfig(usize),
    #[error("k_max {k_max} out of range 1..={n_configs}")]
    KMaxOutOfRange { k_max: usize, n_configs: usize },
    #[error("matrix has no instances")]
    EmptyMatrix,
    #[error("subset size {k} out of range 1..={n_configs}")]
    KOutOfRange { k: usize, n_configs: usize },
    #[error("C({n}, {k}) exceeds the brute-force guard of {guard} subsets")]
    GuardExceeded { n: usize, k: usize, guard: u64 },
    #[error("chain export line {line}: {msg}")]
    BadChainLine { line: usize, msg: String },
}

/// The nested greedy sequence S_1 ⊆ S_2 ⊆ …, the quality of each prefix and
/// the full-set reference quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetChain {
    /// Config ids in the order the greedy pass added them.
    pub picks: Vec<usize>,
    /// q(S_k) for each prefix, aligned with `picks`.
    pub prefix_quality: Vec<f64>,
    /// q over all matrix columns.
    pub full_quality: f64,
}

impl SubsetChain {
    /// The first k picks.
    pub fn prefix(&self, k: usize) -> &[usize] {
        &self.picks[..k]
    }

    /// Render the chain as a text table: (k, added_config_id, q_of_prefix,
    /// q_full) per line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# k\tadded_config_id\tq_of_prefix\tq_full\n");
        for (idx, (&pick, &q)) in self.picks.iter().zip(&self.prefix_quality).enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", idx + 1, pick, q, self.full_quality));
        }
        out
    }

    /// Parse a table produced by [`SubsetChain::to_table`].
    pub fn from_table(text: &str) -> Result<Self, SelectError> {
        let mut picks = Vec::new();
        let mut prefix_quality = Vec::new();
        let mut full_quality = f64::NAN;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(SelectError::BadChainLine {
                    line: line_no,
                    msg: "expected 4 tab-separated fields".into(),
                });
            }
            let parse = |token: &str| -> Result<f64, SelectError> {
                token.parse().map_err(|_| SelectError::BadChainLine {
                    line: line_no,
                    msg: format!("bad number '{token}'"),
                })
            };
            picks.push(fields[1].parse().map_err(|_| SelectError::BadChainLine {
                line: line_no,
                msg: format!("bad config id '{}'", fields[1]),
            })?);
            prefix_quality.push(parse(fields[2])?);
            full_quality = parse(fields[3])?;
        }
        if picks.is_empty() || !full_quality.is_finite() {
            return Err(SelectError::BadChainLine {
                line: 0,
                msg: "empty chain table".into(),
            });
        }
        Ok(Self {
            picks,
            prefix_quality,
            full_quality,
        })
    }
}

/// Evaluate q(S) for a subset of config ids.
pub fn quality(matrix: &PerfMatrix, subset: &[usize]) -> Result<f64, SelectError> {
    if subset.is_empty() {
        return Err(SelectError::EmptySubset);
    }
    if matrix.n_instances() == 0 {
        return Err(SelectError::EmptyMatrix);
    }
    let cols: Vec<usize> = subset
        .iter()
        .map(|&id| {
            matrix
                .config_index(id)
                .ok_or(SelectError::UnknownConfig(id))
        })
        .collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for row in 0..matrix.n_instances() {
        let data = matrix.row(row);
        let best = cols
            .iter()
            .map(|&c| data[c])
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    Ok(-total / matrix.n_instances() as f64)
}

/// Build the greedy chain up to `k_max` picks.
///
/// Each step adds the config maximizing the quality of the extended prefix;
/// ties go to the smallest config id. Prefix qualities and the full-set
/// quality are recorded along the way.
#[allow(clippy::needless_range_loop)]
pub fn greedy_chain(matrix: &PerfMatrix, k_max: usize) -> Result<SubsetChain, SelectError> {
    let n_configs = matrix.n_configs();
    if k_max == 0 || k_max > n_configs {
        return Err(SelectError::KMaxOutOfRange { k_max, n_configs });
    }
    if matrix.n_instances() == 0 {
        return Err(SelectError::EmptyMatrix);
    }
    let n_rows = matrix.n_instances();

    let mut current_min = vec![f64::INFINITY; n_rows];
    let mut picked = vec![false; n_configs];
    let mut picks = Vec::with_capacity(k_max);
    let mut prefix_quality = Vec::with_capacity(k_max);

    for _ in 0..k_max {
        let mut best_q = f64::NEG_INFINITY;
        let mut best_col = usize::MAX;
        let mut best_id = usize::MAX;
        for col in 0..n_configs {
            if picked[col] {
                continue;
            }
            let mut total = 0.0;
            for row in 0..n_rows {
                total += current_min[row].min(matrix.row(row)[col]);
            }
            let q = -total / n_rows as f64;
            let id = matrix.config_ids[col];
            if q > best_q || (q == best_q && id < best_id) {
                best_q = q;
                best_col = col;
                best_id = id;
            }
        }
        picked[best_col] = true;
        picks.push(best_id);
        prefix_quality.push(best_q);
        for row in 0..n_rows {
            current_min[row] = current_min[row].min(matrix.row(row)[best_col]);
        }
    }

    let full_quality = quality(matrix, &matrix.config_ids)?;
    Ok(SubsetChain {
        picks,
        prefix_quality,
        full_quality,
    })
}

/// Choose the portfolio size: the smallest k whose remaining quality gap to
/// the full set is at most `epsilon` of the k = 1 gap. Falls back to the
/// chain length when the threshold is never met.
pub fn choose_size(chain: &SubsetChain, epsilon: f64) -> usize {
    let reference_gap = chain.full_quality - chain.prefix_quality[0];
    for (idx, &q) in chain.prefix_quality.iter().enumerate() {
        if chain.full_quality - q <= epsilon * reference_gap {
            return idx + 1;
        }
    }
    chain.picks.len()
}

const BRUTE_FORCE_GUARD: u64 = 1_000_000;

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u64) / (i + 1) as u64;
    }
    result
}

/// Exhaustive maximum of q over all k-subsets. Guarded to C(n, k) <= 10^6;
/// ties resolved lexicographically on the sorted id vector.
pub fn brute_force_best_subset(
    matrix: &PerfMatrix,
    k: usize,
) -> Result<(Vec<usize>, f64), SelectError> {
    let n = matrix.n_configs();
    if k == 0 || k > n {
        return Err(SelectError::KOutOfRange { k, n_configs: n });
    }
    let count = binomial(n, k);
    if count > BRUTE_FORCE_GUARD {
        return Err(SelectError::GuardExceeded {
            n,
            k,
            guard: BRUTE_FORCE_GUARD,
        });
    }

    let mut best_ids: Option<Vec<usize>> = None;
    let mut best_q = f64::NEG_INFINITY;
    // Standard lexicographic combination enumeration over column indices.
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let ids: Vec<usize> = {
            let mut ids: Vec<usize> = combo.iter().map(|&c| matrix.config_ids[c]).collect();
            ids.sort_unstable();
            ids
        };
        let q = quality(matrix, &ids)?;
        let better = match &best_ids {
            None => true,
            Some(current) => q > best_q || (q == best_q && ids < *current),
        };
        if better {
            best_q = q;
            best_ids = Some(ids);
        }

        // Advance.
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok((best_ids.unwrap(), best_q));
            }
            pos -= 1;
            if combo[pos] != pos + n - k {
                break;
            }
        }
        combo[pos] += 1;
        for later in pos + 1..k {
            combo[later] = combo[later - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn matrix(rows: Vec<Vec<f64>>) -> PerfMatrix {
        let width = rows[0].len();
        PerfMatrix::from_rows(
            rows.into_iter()
                .enumerate()
                .map(|(i, row)| (format!("i{i:03}"), row))
                .collect(),
            (0..width).collect(),
        )
    }

    fn random_matrix(rng: &mut SplitMix64, n_rows: usize, n_cols: usize) -> PerfMatrix {
        matrix(
            (0..n_rows)
                .map(|_| (0..n_cols).map(|_| rng.uniform(0.0, 100.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn quality_hand_enumerated() {
        // Row minima over both configs: 2 and 6; q = -(2+6)/2 = -4.
        let m = matrix(vec![vec![4.0, 2.0], vec![6.0, 8.0]]);
        assert_eq!(quality(&m, &[0, 1]).unwrap(), -4.0);
    }

    #[test]
    fn quality_singleton_is_negated_column_mean() {
        let m = matrix(vec![vec![4.0, 2.0], vec![6.0, 8.0]]);
        assert_eq!(quality(&m, &[0]).unwrap(), -5.0);
        assert_eq!(quality(&m, &[1]).unwrap(), -5.0);
    }

    #[test]
    fn quality_rejects_empty_subset() {
        let m = matrix(vec![vec![1.0]]);
        assert!(matches!(quality(&m, &[]), Err(SelectError::EmptySubset)));
    }

    #[test]
    fn greedy_single_row_picks_minimum() {
        let m = matrix(vec![vec![5.0, 1.0, 3.0]]);
        let chain = greedy_chain(&m, 3).unwrap();
        assert_eq!(chain.picks[0], 1);
        assert_eq!(chain.prefix_quality[0], -1.0);
    }

    #[test]
    fn greedy_dominant_column_first_reaches_full_quality() {
        // Config 2 is row-wise minimal everywhere.
        let m = matrix(vec![
            vec![5.0, 4.0, 1.0],
            vec![9.0, 7.0, 2.0],
            vec![3.0, 8.0, 0.5],
        ]);
        let chain = greedy_chain(&m, 3).unwrap();
        assert_eq!(chain.picks[0], 2);
        assert_eq!(chain.prefix_quality[0], chain.full_quality);
    }

    #[test]
    fn greedy_matches_stepwise_recomputation() {
        // Oracle: recompute every candidate extension through quality() and
        // take the argmax independently at each step.
        let mut rng = SplitMix64::new(31);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 6, 5);
            let chain = greedy_chain(&m, 5).unwrap();
            let mut prefix: Vec<usize> = Vec::new();
            for step in 0..5 {
                let mut best: Option<(f64, usize)> = None;
                for &id in &m.config_ids {
                    if prefix.contains(&id) {
                        continue;
                    }
                    let mut candidate = prefix.clone();
                    candidate.push(id);
                    let q = quality(&m, &candidate).unwrap();
                    best = match best {
                        None => Some((q, id)),
                        Some((bq, bid)) if q > bq || (q == bq && id < bid) => Some((q, id)),
                        keep => keep,
                    };
                }
                let (expected_q, expected_id) = best.unwrap();
                assert_eq!(chain.picks[step], expected_id);
                assert_eq!(chain.prefix_quality[step], expected_q);
                prefix.push(expected_id);
            }
        }
    }

    #[test]
    fn chain_is_nested_and_monotone() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..30 {
            let m = random_matrix(&mut rng, 8, 6);
            let chain = greedy_chain(&m, 6).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for &pick in &chain.picks {
                assert!(seen.insert(pick), "picks must not repeat");
            }
            for pair in chain.prefix_quality.windows(2) {
                assert!(pair[1] >= pair[0], "quality must be non-decreasing");
            }
            assert!(chain.full_quality >= *chain.prefix_quality.last().unwrap() - 1e-12);
        }
    }

    #[test]
    fn quality_monotone_under_inclusion() {
        let mut rng = SplitMix64::new(13);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 5, 6);
            // Random nested pair S ⊆ T.
            let mut ids = m.config_ids.clone();
            rng.shuffle(&mut ids);
            let t_len = 1 + rng.below(ids.len());
            let s_len = 1 + rng.below(t_len);
            let t = &ids[..t_len];
            let s = &t[..s_len];
            assert!(quality(&m, s).unwrap() <= quality(&m, t).unwrap() + 1e-12);
        }
    }

    #[test]
    fn greedy_pick_sequence_invariant_under_affine_gamma() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..5).map(|_| rng.uniform(0.0, 10.0)).collect())
                .collect();
            let a = rng.uniform(0.5, 3.0);
            let b = rng.uniform(-5.0, 5.0);
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|x| a * x + b).collect())
                .collect();
            let c1 = greedy_chain(&matrix(rows), 5).unwrap();
            let c2 = greedy_chain(&matrix(scaled), 5).unwrap();
            assert_eq!(c1.picks, c2.picks);
        }
    }

    #[test]
    fn choose_size_exact_and_trivial_epsilon() {
        let chain = SubsetChain {
            picks: vec![4, 2, 0, 1],
            prefix_quality: vec![-10.0, -6.0, -5.0, -5.0],
            full_quality: -5.0,
        };
        // epsilon = 0: need q(S_k) == q(full); first k is 3.
        assert_eq!(choose_size(&chain, 0.0), 3);
        // epsilon = 1: bound equals the whole k=1 gap, so k = 1.
        assert_eq!(choose_size(&chain, 1.0), 1);
    }

    #[test]
    fn choose_size_boundary_is_tight() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..40 {
            let m = random_matrix(&mut rng, 7, 6);
            let chain = greedy_chain(&m, 6).unwrap();
            let epsilon = rng.uniform(0.0, 0.5);
            let k = choose_size(&chain, epsilon);
            let gap = |idx: usize| chain.full_quality - chain.prefix_quality[idx];
            let bound = epsilon * gap(0);
            if k < chain.picks.len() || gap(k - 1) <= bound {
                assert!(gap(k - 1) <= bound, "k must satisfy the bound");
            }
            if k > 1 {
                assert!(gap(k - 2) > bound, "k-1 must violate the bound");
            }
        }
    }

    #[test]
    fn brute_force_trivial_cases() {
        let m = matrix(vec![vec![4.0, 2.0, 3.0], vec![6.0, 8.0, 1.0]]);
        let (all, q_all) = brute_force_best_subset(&m, 3).unwrap();
        assert_eq!(all, vec![0, 1, 2]);
        assert_eq!(q_all, quality(&m, &[0, 1, 2]).unwrap());

        let (single, q_single) = brute_force_best_subset(&m, 1).unwrap();
        // Column means: 5, 5, 2 -> config 2 wins.
        assert_eq!(single, vec![2]);
        assert_eq!(q_single, -2.0);
    }

    #[test]
    fn brute_force_matches_second_enumerator() {
        // Independent oracle: enumerate k-subsets via bitmask popcount.
        let mut rng = SplitMix64::new(41);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 8, 6);
            let k = 3;
            let (ids, q) = brute_force_best_subset(&m, k).unwrap();
            let mut best: Option<(f64, Vec<usize>)> = None;
            for mask in 0u32..(1 << 6) {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let subset: Vec<usize> = (0..6)
                    .filter(|&c| mask & (1 << c) != 0)
                    .map(|c| m.config_ids[c])
                    .collect();
                let bq = quality(&m, &subset).unwrap();
                best = match best {
                    None => Some((bq, subset)),
                    Some((cq, cs)) if bq > cq || (bq == cq && subset < cs) => Some((bq, subset)),
                    keep => keep,
                };
            }
            let (oracle_q, oracle_ids) = best.unwrap();
            assert_eq!(q, oracle_q);
            assert_eq!(ids, oracle_ids);
        }
    }

    #[test]
    fn brute_force_guard_trips() {
        let m = random_matrix(&mut SplitMix64::new(1), 2, 50);
        assert!(matches!(
            brute_force_best_subset(&m, 25),
            Err(SelectError::GuardExceeded { .. })
        ));
    }

    #[test]
    fn chain_table_round_trips() {
        let m = matrix(vec![vec![5.0, 1.0, 3.0], vec![2.0, 2.0, 9.0]]);
        let chain = greedy_chain(&m, 3).unwrap();
        let parsed = SubsetChain::from_table(&chain.to_table()).unwrap();
        assert_eq!(parsed, chain);
    }
}
