use serde::{Deserialize, Serialize};

use super::{Dataset, Mlp};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    /// Seed for mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 20_000,
            batch_size: None,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 2_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training settings {self:?}")))
        }
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
    debug_assert_eq!(params.len(), grad.len());
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_train_mse: f64,
    pub initial_val_mse: f64,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
    /// Fingerprint of the kept parameters.
    pub parameter_id: String,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }

    pub fn final_train_mse(&self) -> f64 {
        self.history
            .last()
            .map_or(self.initial_train_mse, |r| r.train_mse)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse\n");
        s.push_str(&format!(
            "0,{:e},{:e}\n",
            self.initial_train_mse, self.initial_val_mse
        ));
        for r in &self.history {
            s.push_str(&format!("{},{:e},{:e}\n", r.epoch, r.train_mse, r.val_mse));
        }
        s
    }
}

/// Trains `mlp` with Adam on `train_set`, early-stopping on `val_set`.
///
/// The training loss recorded for an epoch is the one evaluated before that
/// epoch's update (mean over mini-batches when batching). The returned network
/// carries the parameters with the lowest validation loss seen, including the
/// initial ones.
pub fn train(
    mlp: &Mlp,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut net = mlp.clone();
    let mut adam = AdamState::new(net.params().len());
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let initial_train_mse = net.mse(train_set)?;
    let initial_val_mse = net.mse(val_set)?;
    if !initial_train_mse.is_finite() || !initial_val_mse.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }
    let mut best = (0, initial_val_mse, net.params().to_vec());
    let mut history = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let train_mse = match cfg.batch_size {
            Some(b) if b < train_set.len() => {
                rng.shuffle(&mut order);
                let mut sum = 0.0;
                let mut batches = 0;
                for chunk in order.chunks(b) {
                    let (loss, grad) = net.loss_and_gradients_on(train_set, Some(chunk))?;
                    adam_step(&mut adam, net.params_mut(), &grad, cfg);
                    sum += loss;
                    batches += 1;
                }
                sum / batches as f64
            }
            _ => {
                let (loss, grad) = net.loss_and_gradients(train_set)?;
                adam_step(&mut adam, net.params_mut(), &grad, cfg);
                loss
            }
        };
        let val_mse = net.mse(val_set)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best.1 {
            best = (epoch, val_mse, net.params().to_vec());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_val_mse, params) = best;
    let kept = Mlp::from_params(net.layout(), params, mlp.seed)?;
    let report = TrainReport {
        initial_train_mse,
        initial_val_mse,
        history,
        best_epoch,
        best_val_mse,
        stopped_early,
        parameter_id: kept.fingerprint(),
    };
    Ok((kept, report))
}
