use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

use super::backward::batch_gradient_of;
use super::{mse_loss, turn_normalizer, TrainingConfig, TrainingSample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Scores a network on held-out data.
pub trait Validator {
    fn validate(&self, net: &Network) -> Result<Validation>;
}

impl<F> Validator for F
where
    F: Fn(&Network) -> Result<Validation>,
{
    fn validate(&self, net: &Network) -> Result<Validation> {
        self(net)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_accuracy: Option<f64>,
    pub halved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Network with the best validation weights.
    pub network: Network,
    pub best_epoch: usize,
    pub best: Validation,
    pub initial: Validation,
    pub log: Vec<EpochRecord>,
}

/// One pass over `samples` at learning rate `lr`.
///
/// The loss is normalised by the turn count `N = sum_d T(d)` of the whole
/// training set, so each mini-batch (or the whole set when `batch_size` is
/// `None`) steps along its own share of the gradient:
/// `w <- w - delta / N - lr * lambda * w`. Returns the loss over the epoch,
/// each batch measured before its own update.
pub fn train_epoch(
    net: &mut Network,
    samples: &[TrainingSample],
    lr: f64,
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut order: Vec<&TrainingSample> = samples.iter().collect();
    let batch = match config.batch_size {
        Some(b) => {
            order.shuffle(rng);
            b
        }
        None => order.len(),
    };
    let trainable: Vec<usize> = net.trainable_edges().collect();
    let total = turn_normalizer(samples) as f64;
    let mut squared_error = 0.0;
    for chunk in order.chunks(batch) {
        let grad = batch_gradient_of(net, chunk, lr)?;
        squared_error += grad.squared_error;
        let mut w = net.weights();
        for &e in &trainable {
            w[e] -= grad.edge_deltas[e] / total + lr * config.l2_lambda * w[e];
        }
        net.set_weights(&w);
    }
    Ok(squared_error / total)
}

/// Trains with validation every `validation_period` epochs, halving the
/// learning rate whenever validation accuracy fails to beat the best so far.
///
/// Stops after `max_epochs` or once the rate drops below `min_lr`, and returns
/// the weights with the best validation accuracy (ties go to lower loss).
/// The initial weights are validated too, so training never returns
/// something worse than what it started from.
pub fn train(
    initial: &Network,
    samples: &[TrainingSample],
    validator: &dyn Validator,
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.check()?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = initial.clone();
    let mut lr = config.learning_rate;

    let first = validator.validate(&net)?;
    let mut best = first;
    let mut best_net = net.clone();
    let mut best_epoch = 0;
    let mut log = vec![EpochRecord {
        epoch: 0,
        lr,
        train_loss: mse_loss(&net, samples)?,
        val_loss: Some(first.loss),
        val_accuracy: Some(first.accuracy),
        halved: false,
    }];

    for epoch in 1..=config.max_epochs {
        if lr < config.min_lr {
            break;
        }
        let train_loss = train_epoch(&mut net, samples, lr, config, &mut rng)?;
        let mut record = EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss: None,
            val_accuracy: None,
            halved: false,
        };
        if epoch % config.validation_period == 0 {
            let v = validator.validate(&net)?;
            record.val_loss = Some(v.loss);
            record.val_accuracy = Some(v.accuracy);
            let improved = v.accuracy > best.accuracy;
            if improved || (v.accuracy == best.accuracy && v.loss < best.loss) {
                best = v;
                best_net = net.clone();
                best_epoch = epoch;
            }
            if !improved {
                lr /= 2.0;
                record.halved = true;
            }
        }
        log::info!(
            "epoch {epoch}: lr {:.6} train loss {:.6}{}",
            record.lr,
            record.train_loss,
            match (record.val_accuracy, record.val_loss) {
                (Some(a), Some(l)) => format!(" val acc {a:.4} val loss {l:.6}"),
                _ => String::new(),
            }
        );
        log.push(record);
    }
    Ok(TrainOutcome {
        network: best_net,
        best_epoch,
        best,
        initial: first,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ActivationSpec, Edge, EdgeKind, NetworkTopology, Node, NodeKind};

    fn one_weight(w: f64) -> Network {
        Network::new(NetworkTopology {
            nodes: vec![
                Node {
                    id: 0,
                    kind: NodeKind::Input,
                    layer: None,
                },
                Node {
                    id: 1,
                    kind: NodeKind::Sum,
                    layer: None,
                },
            ],
            edges: vec![Edge::weighted(0, 1, EdgeKind::Instant, w)],
            outputs: vec![1],
            activation: ActivationSpec::None,
        })
        .unwrap()
    }

    fn samples() -> Vec<TrainingSample> {
        (0..4)
            .map(|i| {
                let x = 0.25 * (i + 1) as f64;
                TrainingSample {
                    dialogue_id: format!("d{i}"),
                    slot: "s".into(),
                    value: "v".into(),
                    inputs: vec![vec![x]],
                    labels: vec![0.5 * x],
                    mask: vec![true],
                }
            })
            .collect()
    }

    fn by_loss(data: Vec<TrainingSample>) -> impl Fn(&Network) -> Result<Validation> {
        move |net| {
            let loss = mse_loss(net, &data)?;
            Ok(Validation {
                accuracy: -loss,
                loss,
            })
        }
    }

    #[test]
    fn stationary_point_is_kept() {
        let mut net = one_weight(0.5);
        let cfg = TrainingConfig {
            l2_lambda: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let loss = train_epoch(&mut net, &samples(), 0.6, &cfg, &mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.weights(), vec![0.5]);
    }

    #[test]
    fn one_step_reduces_loss() {
        let mut net = one_weight(2.0);
        let data = samples();
        let before = mse_loss(&net, &data).unwrap();
        let cfg = TrainingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        train_epoch(&mut net, &data, 0.1, &cfg, &mut rng).unwrap();
        assert!(mse_loss(&net, &data).unwrap() < before);
    }

    #[test]
    fn minibatch_steps_use_training_set_turn_count() {
        // One sample per batch: each step is lr * 2 (w x - l) x / N with N = 4
        // turns in the whole set, applied sequentially in shuffled order.
        let data = samples();
        let cfg = TrainingConfig {
            batch_size: Some(1),
            l2_lambda: 0.0,
            ..Default::default()
        };
        let mut net = one_weight(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        train_epoch(&mut net, &data, 0.1, &cfg, &mut rng).unwrap();

        let mut order: Vec<&TrainingSample> = data.iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let mut w = 2.0;
        for s in order {
            let (x, l) = (s.inputs[0][0], s.labels[0]);
            w -= 0.1 * 2.0 * (w * x - l) * x / 4.0;
        }
        assert!((net.weights()[0] - w).abs() < 1e-15);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let net = one_weight(2.0);
        let cfg = TrainingConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let out = train(&net, &samples(), &by_loss(samples()), &cfg).unwrap();
        assert_eq!(out.network.weights(), net.weights());
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn training_converges_and_halves() {
        let net = one_weight(2.0);
        let cfg = TrainingConfig {
            batch_size: Some(2),
            l2_lambda: 0.0,
            learning_rate: 1.0,
            ..Default::default()
        };
        let out = train(&net, &samples(), &by_loss(samples()), &cfg).unwrap();
        assert!((out.network.weights()[0] - 0.5).abs() < 1e-3);
        assert!(out.best.loss < out.initial.loss);
        for rec in &out.log {
            assert_eq!(rec.val_loss.is_some(), rec.epoch % 5 == 0);
        }
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let net = one_weight(-1.0);
        let cfg = TrainingConfig {
            batch_size: Some(1),
            seed: 9,
            ..Default::default()
        };
        let a = train(&net, &samples(), &by_loss(samples()), &cfg).unwrap();
        let b = train(&net, &samples(), &by_loss(samples()), &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.network.weights(), b.network.weights());
    }

    #[test]
    fn best_checkpoint_never_worse_than_start() {
        // huge learning rate diverges; the initial weights must come back
        let net = one_weight(0.4);
        let cfg = TrainingConfig {
            learning_rate: 50.0,
            max_epochs: 10,
            ..Default::default()
        };
        let out = train(&net, &samples(), &by_loss(samples()), &cfg);
        if let Ok(out) = out {
            assert!(out.best.accuracy >= out.initial.accuracy);
        }
    }

    #[test]
    fn log_lines_serialize() {
        let rec = EpochRecord {
            epoch: 5,
            lr: 0.3,
            train_loss: 0.1,
            val_loss: None,
            val_accuracy: Some(0.5),
            halved: true,
        };
        let s = serde_json::to_string(&rec).unwrap();
        assert_eq!(s, r#"{"epoch":5,"lr":0.3,"train_loss":0.1,"val_accuracy":0.5,"halved":true}"#);
    }
}
