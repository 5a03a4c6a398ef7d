//! Deterministic synthetic solver and instance generator.
//!
//! The synthetic solver stands in for a real MILP solver at desk scale. Its
//! closed form ties performance to graph structure so a structure-aware
//! predictor can legitimately learn it:
//!
//! ```text
//! gamma(i, c, seed) = base(i) * penalty[bucket(i)][c] * (1 + amp * u)
//! base(i)   = 100 * (1 + n_edges / (n_vars * max(n_cons, 1)))
//! bucket(i) = density bucket of nnz(A) / (n_vars * n_cons) at thresholds 1/3, 2/3
//! u         = hash-seeded uniform in [-1, 1] from (instance_id, c, seed)
//! ```
//!
//! The generator produces packing-style MILPs (nonnegative integer
//! variables, `<=` rows, positive objective) whose density lands inside the
//! requested family's bucket, with nonzeros spread evenly across rows so the
//! density signal survives row-normalized featurization.

use std::fmt;
use std::str::FromStr;

use crate::configspace::ConfigPoint;
use crate::milp::{ConsSense, Constraint, MilpInstance, ObjSense, VarType};
use crate::rng::{fnv1a, mix, SplitMix64};

use super::HarnessError;

/// Penalty multiplier per (density bucket, portfolio level). Published so
/// tests and external oracles can reproduce gammas exactly.
pub const PENALTY_TABLE: [[f64; 8]; 3] = [
    [0.70, 1.00, 1.15, 1.30, 1.10, 1.25, 1.40, 1.20],
    [1.25, 1.10, 0.65, 1.30, 1.45, 1.05, 1.20, 1.35],
    [1.40, 1.20, 1.30, 1.10, 1.05, 1.25, 0.60, 1.15],
];

/// Portfolio width of the synthetic solver.
pub const SYNTHETIC_CONFIGS: usize = 8;

/// Default multiplicative noise amplitude.
pub const DEFAULT_NOISE_AMP: f64 = 0.05;

/// Density bucket of an instance: 0 below 1/3, 1 below 2/3, else 2.
/// Instances without constraints count as density 0.
pub fn density_bucket(instance: &MilpInstance) -> usize {
    let cells = instance.n_vars() * instance.n_cons();
    if cells == 0 {
        return 0;
    }
    let density = instance.nnz() as f64 / cells as f64;
    if density < 1.0 / 3.0 {
        0
    } else if density < 2.0 / 3.0 {
        1
    } else {
        2
    }
}

/// The deterministic noise term: uniform in [-1, 1] from a stable hash of
/// (instance id, config index, seed).
pub fn noise_u(instance_id: &str, config_index: usize, seed: u64) -> f64 {
    let mut h = fnv1a(instance_id.as_bytes());
    h = mix(h ^ (config_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    h = mix(h ^ seed.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let unit = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}

/// Synthetic gamma for a penalty-table column.
pub fn synthetic_gamma_by_index(
    instance: &MilpInstance,
    config_index: usize,
    seed: u64,
    noise_amp: f64,
) -> Result<f64, HarnessError> {
    if config_index >= SYNTHETIC_CONFIGS {
        return Err(HarnessError::PenaltyIndex {
            index: config_index,
            width: SYNTHETIC_CONFIGS,
        });
    }
    if !(0.0..=0.5).contains(&noise_amp) {
        return Err(HarnessError::BadNoiseAmp(noise_amp));
    }
    let n_vars = instance.n_vars();
    let base = 100.0 * (1.0 + instance.nnz() as f64 / (n_vars * instance.n_cons().max(1)) as f64);
    let penalty = PENALTY_TABLE[density_bucket(instance)][config_index];
    let noise = noise_amp * noise_u(&instance.id, config_index, seed);
    Ok(base * penalty * (1.0 + noise))
}

/// Synthetic gamma for a config point: the first parameter's level index is
/// the penalty column.
pub fn synthetic_gamma(
    instance: &MilpInstance,
    config: &ConfigPoint,
    seed: u64,
    noise_amp: f64,
) -> Result<f64, HarnessError> {
    let level = *config
        .assignment
        .first()
        .ok_or(HarnessError::EmptyAssignment { config_id: config.id })?;
    synthetic_gamma_by_index(instance, level, seed, noise_amp)
}

/// Synthetic instance family, named by its density bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Sparse,
    Medium,
    Dense,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Sparse, Family::Medium, Family::Dense];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sparse => "sparse",
            Family::Medium => "medium",
            Family::Dense => "dense",
        }
    }

    /// Density band sampled by the generator. Bands sit strictly inside
    /// their bucket so rounding to whole nonzeros cannot cross a threshold.
    pub fn density_band(self) -> (f64, f64) {
        match self {
            Family::Sparse => (0.15, 0.28),
            Family::Medium => (0.40, 0.60),
            Family::Dense => (0.75, 0.92),
        }
    }

    pub fn bucket(self) -> usize {
        match self {
            Family::Sparse => 0,
            Family::Medium => 1,
            Family::Dense => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse" => Ok(Family::Sparse),
            "medium" => Ok(Family::Medium),
            "dense" => Ok(Family::Dense),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

/// Generate `n` packing-style instances of one density family,
/// deterministic per (family, seed).
pub fn generate_synthetic_instances(family: Family, n: usize, seed: u64) -> Vec<MilpInstance> {
    let mut rng = SplitMix64::new(mix(seed ^ fnv1a(family.name().as_bytes())));
    let (lo, hi) = family.density_band();
    (0..n)
        .map(|index| {
            let n_vars = 10 + rng.below(3);
            let n_cons = 6 + rng.below(4);
            let cells = n_vars * n_cons;
            let density = rng.uniform(lo, hi);
            let nnz = ((density * cells as f64).round() as usize).clamp(1, cells);

            // Spread nonzeros evenly so per-row degree tracks density.
            let base_per_row = nnz / n_cons;
            let extra = nnz % n_cons;
            let mut columns: Vec<usize> = (0..n_vars).collect();
            let constraints = (0..n_cons)
                .map(|row| {
                    let k = base_per_row + usize::from(row < extra);
                    rng.shuffle(&mut columns);
                    let mut coeffs: Vec<(usize, f64)> = columns[..k]
                        .iter()
                        .map(|&col| (col, (1 + rng.below(9)) as f64))
                        .collect();
                    coeffs.sort_unstable_by_key(|&(col, _)| col);
                    let coeff_sum: f64 = coeffs.iter().map(|&(_, v)| v).sum();
                    Constraint {
                        coeffs,
                        sense: ConsSense::Le,
                        rhs: (0.5 * coeff_sum).ceil().max(1.0),
                    }
                })
                .collect();

            let instance = MilpInstance {
                id: format!("syn-{}-s{seed}-{index:04}", family.name()),
                sense: ObjSense::Maximize,
                objective: (0..n_vars).map(|_| rng.uniform(1.0, 10.0)).collect(),
                var_types: vec![VarType::Integer; n_vars],
                var_lb: vec![Some(0.0); n_vars],
                var_ub: vec![None; n_vars],
                constraints,
            };
            debug_assert_eq!(density_bucket(&instance), family.bucket());
            instance
        })
        .collect()
}
