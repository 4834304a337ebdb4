//! Mini-batch training with early stopping, and the fitted scorer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::bce_with_logit;
use super::model::{InputDims, Mode, ModelInput, NetConfig, OmniRank};
use crate::domain::{FeatureBundle, RiskScore};
use crate::error::{bail, Result};
use crate::features::FeatureScaler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; `None`
    /// trains for the full budget.
    pub patience: Option<usize>,
    pub validation_fraction: f64,
    /// Decoupled weight decay applied each step as `p -= lr * decay * p`.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::default(),
            epochs: 60,
            batch_size: 4,
            dropout: 0.3,
            seed: 42,
            patience: None,
            validation_fraction: 0.15,
            weight_decay: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            bail!(Config, "dropout {} outside [0, 1)", self.dropout);
        }
        if !(0.0..0.9).contains(&self.validation_fraction) {
            bail!(Config, "validation_fraction {} outside [0, 0.9)", self.validation_fraction);
        }
        let lr = match self.optimizer {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        };
        if !(self.weight_decay >= 0.0) {
            bail!(Config, "weight_decay must be non-negative");
        }
        if !(lr > 0.0) {
            bail!(Config, "learning rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct OptState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl OptState {
    fn new(n: usize) -> Self {
        OptState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn apply(&mut self, opt: Optimizer, decay: f64, params: &mut [f64], grad: &[f64]) {
        if decay > 0.0 {
            let lr = match opt {
                Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
            };
            params.iter_mut().for_each(|p| *p -= lr * decay * *p);
        }
        match opt {
            Optimizer::Sgd { lr } => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
            Optimizer::Adam { lr, beta1, beta2, epsilon } => {
                self.step += 1;
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

fn mean_loss(model: &OmniRank, params: &[f64], xs: &[&ModelInput], ys: &[f64]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| bce_with_logit(model.forward(params, x, Mode::Eval).logit, y).0)
        .sum();
    total / xs.len().max(1) as f64
}

/// Trains from `init`; with a validation split and patience, returns the
/// parameters of the best validation epoch.
pub fn train(model: &OmniRank, init: Vec<f64>, inputs: &[ModelInput], targets: &[f64], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if inputs.len() != targets.len() {
        bail!(Shape, "{} inputs but {} targets", inputs.len(), targets.len());
    }
    if inputs.is_empty() {
        bail!(Precondition, "no training examples");
    }
    if init.len() != model.n_params() {
        bail!(Shape, "expected {} parameters, got {}", model.n_params(), init.len());
    }
    for x in inputs {
        model.check_input(x)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if cfg.patience.is_some() {
        ((inputs.len() as f64) * cfg.validation_fraction).round() as usize
    } else {
        0
    };
    let n_val = if n_val >= inputs.len() { 0 } else { n_val };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x: Vec<&ModelInput> = val_idx.iter().map(|&i| &inputs[i]).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| targets[i]).collect();

    let mut params = init;
    let mut grad = vec![0.0; params.len()];
    let mut opt = OptState::new(params.len());
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let mode = Mode::Train { dropout: cfg.dropout, rng: &mut rng };
                total += model.loss_and_grad(&params, &inputs[i], targets[i], mode, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.apply(cfg.optimizer, cfg.weight_decay, &mut params, &grad);
        }
        let train_loss = total / train_idx.len() as f64;
        if !train_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            bail!(Numeric, "training diverged at epoch {} (loss {})", epoch, train_loss);
        }
        let validation_loss = (!val_x.is_empty()).then(|| mean_loss(model, &params, &val_x, &val_y));
        history.push(EpochStats { epoch, train_loss, validation_loss });
        log::debug!("epoch {epoch}: train {train_loss:.5} validation {validation_loss:?}");
        if let (Some(v), Some(patience)) = (validation_loss, cfg.patience) {
            if v < best.0 {
                best = (v, epoch, params.clone());
            } else if epoch - best.1 >= patience {
                stopped_early = true;
                break;
            }
        }
    }
    if val_x.is_empty() || history.is_empty() {
        let last = history.len().saturating_sub(1);
        return Ok(TrainOutcome { params, history, best_epoch: last, stopped_early });
    }
    Ok(TrainOutcome { params: best.2, history, best_epoch: best.1, stopped_early })
}

/// A trained network together with the feature scaling it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: OmniRank,
    pub params: Vec<f64>,
    pub scaler: FeatureScaler,
    pub train_config: TrainConfig,
    pub history: Vec<EpochStats>,
}

impl TrainedModel {
    /// Fits scaling and network weights on labelled bundles.
    pub fn fit(bundles: &[FeatureBundle], net: &NetConfig, cfg: &TrainConfig) -> Result<Self> {
        let first = match bundles.first() {
            Some(b) => b,
            None => bail!(Precondition, "no training bundles"),
        };
        let scaler = FeatureScaler::fit(bundles)?;
        let model = OmniRank::new(InputDims::of(first), net.clone())?;
        let inputs: Vec<ModelInput> = bundles.iter().map(|b| ModelInput::from_bundle(&scaler.apply(b))).collect();
        let targets: Vec<f64> = bundles.iter().map(|b| b.label_at_cutoff.target()).collect();
        let init = model.init_params(cfg.seed);
        let out = train(&model, init, &inputs, &targets, cfg)?;
        Ok(TrainedModel {
            model,
            params: out.params,
            scaler,
            train_config: cfg.clone(),
            history: out.history,
        })
    }

    pub fn score(&self, bundle: &FeatureBundle) -> Result<f64> {
        let x = ModelInput::from_bundle(&self.scaler.apply(bundle));
        self.model.check_input(&x)?;
        Ok(self.model.predict(&self.params, &x))
    }

    /// Probability of being normal for each bundle, in input order.
    pub fn predict_scores(&self, bundles: &[FeatureBundle]) -> Result<Vec<RiskScore>> {
        bundles
            .iter()
            .map(|b| {
                Ok(RiskScore {
                    platform_id: b.platform_id.clone(),
                    cutoff_month: b.cutoff_month,
                    score: self.score(b)?,
                })
            })
            .collect()
    }
}
