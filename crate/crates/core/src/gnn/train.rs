//! Mini-batch Adam training with early stopping on validation MSE.
//!
//! Training is deterministic per seed: initialization, the train/validation
//! split and every epoch's shuffle come from one SplitMix64 stream, and all
//! arithmetic is sequential f64.

use crate::graph::BipartiteGraph;
use crate::rng::SplitMix64;

use super::model::{ForwardMode, GnnModel, DEFAULT_HIDDEN};
use super::tensor::Tensor;
use super::GnnError;

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Fraction of the dataset held out for validation by [`train`].
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            val_fraction: 0.15,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), GnnError> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(GnnError::BadTrainConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(GnnError::BadTrainConfig("batch size must be >= 1".into()));
        }
        if self.hidden == 0 || self.max_epochs == 0 {
            return Err(GnnError::BadTrainConfig(
                "hidden width and max epochs must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.val_fraction) {
            return Err(GnnError::BadTrainConfig(format!(
                "validation fraction must be in [0, 1], got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// A trained model, its log, and the epoch the returned parameters are from.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub log: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Render the log as line-delimited (epoch, train_mse, val_mse) text.
pub fn format_log(log: &[EpochStats]) -> String {
    let mut out = String::from("# epoch\ttrain_mse\tval_mse\n");
    for row in log {
        out.push_str(&format!("{}\t{}\t{}\n", row.epoch, row.train_mse, row.val_mse));
    }
    out
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    fn new(model: &GnnModel) -> Self {
        Self {
            m: model.params().iter().map(|p| p.zeros_like()).collect(),
            v: model.params().iter().map(|p| p.zeros_like()).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut GnnModel, grads: &super::Grads, config: &TrainConfig) {
        self.t += 1;
        let bias1 = 1.0 - config.beta1.powi(self.t as i32);
        let bias2 = 1.0 - config.beta2.powi(self.t as i32);
        for ((param, grad), (m, v)) in model
            .params_mut()
            .into_iter()
            .zip(&grads.tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = param.data_mut();
            for (i, &g) in grad.data().iter().enumerate() {
                md[i] = config.beta1 * md[i] + (1.0 - config.beta1) * g;
                vd[i] = config.beta2 * vd[i] + (1.0 - config.beta2) * g * g;
                let m_hat = md[i] / bias1;
                let v_hat = vd[i] / bias2;
                pd[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
            }
        }
    }
}

/// A training example: a featurized instance and its standardized target row.
pub type Example = (BipartiteGraph, Vec<f64>);

fn check_dataset(dataset: &[Example]) -> Result<usize, GnnError> {
    let first = dataset.first().ok_or(GnnError::EmptyDataset)?;
    let width = first.1.len();
    for (_, row) in dataset {
        if row.len() != width {
            return Err(GnnError::InconsistentWidths {
                first: width,
                other: row.len(),
            });
        }
    }
    Ok(width)
}

/// Split the dataset per `config.val_fraction` (seeded shuffle, validation
/// taken from the tail) and train. With a split too small to hold anything
/// out, validation falls back to the training set.
pub fn train(dataset: &[Example], config: &TrainConfig) -> Result<TrainOutcome, GnnError> {
    config.validate()?;
    check_dataset(dataset)?;
    let mut rng = SplitMix64::new(config.seed ^ 0x5EED_5EED_5EED_5EED);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    rng.shuffle(&mut indices);
    let n_val = ((dataset.len() as f64) * config.val_fraction).floor() as usize;
    let n_train = dataset.len() - n_val;
    let train_refs: Vec<&Example> = indices[..n_train].iter().map(|&i| &dataset[i]).collect();
    let val_refs: Vec<&Example> = indices[n_train..].iter().map(|&i| &dataset[i]).collect();
    train_refs_with_validation(&train_refs, &val_refs, config)
}

/// Train on an explicit train/validation split.
pub fn train_with_validation(
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome, GnnError> {
    let train_refs: Vec<&Example> = train_set.iter().collect();
    let val_refs: Vec<&Example> = val_set.iter().collect();
    train_refs_with_validation(&train_refs, &val_refs, config)
}

fn train_refs_with_validation(
    train_set: &[&Example],
    val_set: &[&Example],
    config: &TrainConfig,
) -> Result<TrainOutcome, GnnError> {
    config.validate()?;
    let train_owned: Vec<&Example> = train_set.to_vec();
    let width = {
        let first = train_owned.first().ok_or(GnnError::EmptyDataset)?;
        let width = first.1.len();
        for (_, row) in train_owned.iter().chain(val_set) {
            if row.len() != width {
                return Err(GnnError::InconsistentWidths {
                    first: width,
                    other: row.len(),
                });
            }
        }
        width
    };
    let schema_version = train_owned[0].0.schema_version;

    let mut model = GnnModel::new(config.hidden, width, schema_version, config.seed);
    let mut adam = Adam::new(&model);
    let mut rng = SplitMix64::new(config.seed ^ 0x0BAD_CAFE_1234_5678);

    let mut best: Option<(f64, GnnModel, usize)> = None;
    let mut log = Vec::new();
    let mut stale_epochs = 0;

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..train_owned.len()).collect();
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let graphs: Vec<&BipartiteGraph> = chunk.iter().map(|&i| &train_owned[i].0).collect();
            let cache = model.forward_batch(&graphs, ForwardMode::Train)?;

            // Batch loss = mean over graphs and configurations.
            let scale = 2.0 / (chunk.len() * width) as f64;
            let mut g_out = Tensor::zeros(&[chunk.len(), width]);
            let mut batch_loss = 0.0;
            for (b, &i) in chunk.iter().enumerate() {
                let targets = &train_owned[i].1;
                for (s, (&p, &t)) in cache.out.row(b).iter().zip(targets).enumerate() {
                    let diff = p - t;
                    batch_loss += diff * diff;
                    *g_out.at_mut(b, s) = scale * diff;
                }
            }
            batch_loss /= (chunk.len() * width) as f64;
            loss_sum += batch_loss * chunk.len() as f64;

            let grads = model.backward_batch(&cache, &g_out);
            model.update_running_stats(&cache);
            adam.step(&mut model, &grads, config);
        }
        let train_mse = loss_sum / train_owned.len() as f64;

        let val_mse = if val_set.is_empty() {
            train_mse
        } else {
            eval_mse(&model, val_set)?
        };
        log.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
        });

        let improved = best.as_ref().is_none_or(|(best_val, _, _)| val_mse < *best_val);
        if improved {
            best = Some((val_mse, model.clone(), epoch));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    let (_, best_model, best_epoch) = best.expect("at least one epoch ran");
    if !best_model.all_parameters_finite() {
        return Err(GnnError::NonFiniteParameters);
    }
    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch,
    })
}

/// Eval-mode MSE over a dataset (mean of per-graph MSE).
pub fn eval_mse(model: &GnnModel, dataset: &[&Example]) -> Result<f64, GnnError> {
    let mut total = 0.0;
    for (graph, targets) in dataset {
        let pred = super::forward(model, graph, ForwardMode::Eval)?;
        total += super::loss_mse(&pred, targets)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Train `n_members` models from consecutive seeds over the same data.
pub fn train_ensemble(
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
    n_members: usize,
) -> Result<(super::Ensemble, Vec<TrainOutcome>), GnnError> {
    let mut members = Vec::with_capacity(n_members);
    let mut outcomes = Vec::with_capacity(n_members);
    for k in 0..n_members {
        let member_config = TrainConfig {
            seed: config.seed.wrapping_add(k as u64),
            ..config.clone()
        };
        let outcome = train_with_validation(train_set, val_set, &member_config)?;
        members.push(outcome.model.clone());
        outcomes.push(outcome);
    }
    Ok((super::Ensemble::new(members)?, outcomes))
}
