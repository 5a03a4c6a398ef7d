//! Bipartite graph neural network predicting per-configuration solver
//! performance, with training, ensembling and a versioned binary model
//! format.

mod io;
mod model;
mod tensor;
mod train;

pub use io::{load_ensemble, load_model, save_ensemble, save_model};
pub use model::{
    Attention, BatchNorm, ConvBlock, ForwardMode, GnnModel, Grads, HalfConv, LinearLayer,
    BN_EPS, BN_MOMENTUM, DEFAULT_HIDDEN, N_BLOCKS,
};
pub use tensor::Tensor;
pub use train::{
    eval_mse, format_log, train, train_ensemble, train_with_validation, EpochStats, TrainConfig,
    TrainOutcome,
};

use thiserror::Error;

use crate::graph::BipartiteGraph;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("graph schema version {graph} does not match the model's {model}")]
    SchemaMismatch { model: u32, graph: u32 },
    #[error("graph '{0}' has no variable nodes")]
    NoVariables(String),
    #[error("forward needs at least one graph")]
    EmptyBatch,
    #[error("prediction/target width mismatch: {expected} vs {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("dataset must not be empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    BadTrainConfig(String),
    #[error("model parameters are not finite (training diverged or payload corrupt)")]
    NonFiniteParameters,
    #[error("target rows have inconsistent widths: {first} vs {other}")]
    InconsistentWidths { first: usize, other: usize },
    #[error("ensemble members have different output widths")]
    EnsembleWidths,
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("model payload: bad magic header")]
    BadMagic,
    #[error("model payload: unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("model payload truncated ({0})")]
    Truncated(String),
    #[error("model payload malformed: {0}")]
    Format(String),
}

/// Run the network on one graph. Train mode normalizes with this graph's own
/// batch statistics; eval mode uses the frozen running statistics.
pub fn forward(
    model: &GnnModel,
    graph: &BipartiteGraph,
    mode: ForwardMode,
) -> Result<Vec<f64>, GnnError> {
    let cache = model.forward_batch(&[graph], mode)?;
    Ok(cache.out.row(0).to_vec())
}

/// Mean squared error over all configurations.
pub fn loss_mse(pred: &[f64], targets: &[f64]) -> Result<f64, GnnError> {
    if pred.len() != targets.len() {
        return Err(GnnError::WidthMismatch {
            expected: targets.len(),
            actual: pred.len(),
        });
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Exact gradients of `loss_mse(forward(model, graph, Train), targets)` with
/// respect to every trainable parameter.
pub fn backward(
    model: &GnnModel,
    graph: &BipartiteGraph,
    targets: &[f64],
) -> Result<Grads, GnnError> {
    if targets.len() != model.n_outputs {
        return Err(GnnError::WidthMismatch {
            expected: model.n_outputs,
            actual: targets.len(),
        });
    }
    let cache = model.forward_batch(&[graph], ForwardMode::Train)?;
    let mut g_out = Tensor::zeros(&[1, model.n_outputs]);
    let scale = 2.0 / model.n_outputs as f64;
    for (s, (p, t)) in cache.out.row(0).iter().zip(targets).enumerate() {
        *g_out.at_mut(0, s) = scale * (p - t);
    }
    Ok(model.backward_batch(&cache, &g_out))
}

/// Index of the minimum prediction; ties go to the smallest index.
pub fn argmin_prediction(pred: &[f64]) -> usize {
    let mut best = 0;
    for (idx, value) in pred.iter().enumerate().skip(1) {
        if *value < pred[best] {
            best = idx;
        }
    }
    best
}

/// Predict the best configuration index with a single model (eval mode).
pub fn predict_config(model: &GnnModel, graph: &BipartiteGraph) -> Result<usize, GnnError> {
    Ok(argmin_prediction(&forward(model, graph, ForwardMode::Eval)?))
}

/// A fixed set of models trained from distinct seeds whose eval-mode
/// predictions are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<GnnModel>,
}

impl Ensemble {
    pub fn new(members: Vec<GnnModel>) -> Result<Self, GnnError> {
        let first = members.first().ok_or(GnnError::EmptyEnsemble)?;
        if members.iter().any(|m| m.n_outputs != first.n_outputs) {
            return Err(GnnError::EnsembleWidths);
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GnnModel] {
        &self.members
    }

    pub fn n_outputs(&self) -> usize {
        self.members[0].n_outputs
    }

    /// Arithmetic mean of the members' eval-mode forward passes.
    pub fn predict(&self, graph: &BipartiteGraph) -> Result<Vec<f64>, GnnError> {
        let mut mean = vec![0.0; self.n_outputs()];
        for member in &self.members {
            let out = forward(member, graph, ForwardMode::Eval)?;
            for (m, o) in mean.iter_mut().zip(&out) {
                *m += o;
            }
        }
        for m in &mut mean {
            *m /= self.members.len() as f64;
        }
        Ok(mean)
    }

    /// Argmin of the averaged predictions.
    pub fn predict_config(&self, graph: &BipartiteGraph) -> Result<usize, GnnError> {
        Ok(argmin_prediction(&self.predict(graph)?))
    }
}

/// Convenience alias for ensemble averaging as a free function.
pub fn ensemble_predict(ensemble: &Ensemble, graph: &BipartiteGraph) -> Result<Vec<f64>, GnnError> {
    ensemble.predict(graph)
}

#[cfg(test)]
mod tests {
    use super::model::test_fixtures::tiny_graph;
    use super::*;

    #[test]
    fn loss_mse_examples() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(
            loss_mse(&[1.0], &[1.0, 2.0]),
            Err(GnnError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn loss_mse_matches_direct_recomputation() {
        let mut rng = crate::rng::SplitMix64::new(9);
        for _ in 0..50 {
            let n = 1 + rng.below(10);
            let pred: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let tgt: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let mut sum = 0.0;
            for i in 0..n {
                sum += (pred[i] - tgt[i]).powi(2);
            }
            assert!((loss_mse(&pred, &tgt).unwrap() - sum / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn argmin_breaks_ties_low() {
        assert_eq!(argmin_prediction(&[0.3, -1.2, 0.0]), 1);
        assert_eq!(argmin_prediction(&[1.0, 1.0, 2.0]), 0);
        assert_eq!(argmin_prediction(&[5.0]), 0);
    }

    #[test]
    fn identical_members_average_to_single_forward() {
        let model = GnnModel::new(8, 4, 1, 5);
        let graph = tiny_graph(3, 5, 4);
        let single = forward(&model, &graph, ForwardMode::Eval).unwrap();
        let ensemble = Ensemble::new(vec![model.clone(), model.clone(), model]).unwrap();
        let combined = ensemble.predict(&graph).unwrap();
        for (a, b) in single.iter().zip(&combined) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_average_matches_manual_mean() {
        let members: Vec<GnnModel> = (0..3).map(|s| GnnModel::new(8, 4, 1, s)).collect();
        let graph = tiny_graph(4, 6, 3);
        let manual: Vec<f64> = {
            let outs: Vec<Vec<f64>> = members
                .iter()
                .map(|m| forward(m, &graph, ForwardMode::Eval).unwrap())
                .collect();
            (0..4)
                .map(|i| outs.iter().map(|o| o[i]).sum::<f64>() / 3.0)
                .collect()
        };
        let ensemble = Ensemble::new(members).unwrap();
        let combined = ensemble.predict(&graph).unwrap();
        for (a, b) in manual.iter().zip(&combined) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_rejects_mixed_widths() {
        let a = GnnModel::new(8, 4, 1, 0);
        let b = GnnModel::new(8, 5, 1, 1);
        assert!(matches!(
            Ensemble::new(vec![a, b]),
            Err(GnnError::EnsembleWidths)
        ));
    }

    #[test]
    fn predict_config_scans_ensemble_output() {
        let members: Vec<GnnModel> = (0..3).map(|s| GnnModel::new(8, 6, 1, s + 40)).collect();
        let ensemble = Ensemble::new(members).unwrap();
        let graph = tiny_graph(8, 7, 5);
        let averaged = ensemble.predict(&graph).unwrap();
        let mut expected = 0;
        for (idx, v) in averaged.iter().enumerate() {
            if *v < averaged[expected] {
                expected = idx;
            }
        }
        assert_eq!(ensemble.predict_config(&graph).unwrap(), expected);
    }

    #[test]
    fn zero_loss_zeroes_head_bias_gradient() {
        // Construct pred == target by reading the forward output first.
        let model = GnnModel::new(6, 3, 1, 77);
        let graph = tiny_graph(6, 4, 3);
        let pred = forward(&model, &graph, ForwardMode::Train).unwrap();
        let grads = backward(&model, &graph, &pred).unwrap();
        let names = model.param_names();
        let bias_idx = names.iter().position(|n| n == "head_out.bias").unwrap();
        for g in grads.tensors[bias_idx].data() {
            assert_eq!(*g, 0.0, "stationary point of MSE in the output bias");
        }
        // In fact every gradient vanishes at zero loss.
        for t in &grads.tensors {
            for g in t.data() {
                assert_eq!(*g, 0.0);
            }
        }
    }
}
