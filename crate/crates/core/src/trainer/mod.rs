//! Training by backpropagation through time.
//!
//! The loss is the masked squared error of the first output node, normalised
//! by the total number of turns of the distinct dialogues in the batch:
//!
//! ```text
//! L = 1 / sum_d T(d) * sum_{d,s,v,t masked in} (b - l)^2
//! ```

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{EdgeKind, Network, NetworkState};

mod backward;
mod gradcheck;
mod train;

pub use backward::{backward_pass, batch_gradient, sample_gradient, BatchGradient, GradientAccumulator};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use train::{train, train_epoch, EpochRecord, TrainOutcome, Validation, Validator};

/// One `(dialogue, slot, value)` sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub dialogue_id: String,
    pub slot: String,
    pub value: String,
    /// Network inputs for each turn, in input-node order.
    pub inputs: Vec<Vec<f64>>,
    /// Target belief for each turn (usually 0 or 1).
    pub labels: Vec<f64>,
    /// Whether each turn contributes to the loss.
    pub mask: Vec<bool>,
}

impl TrainingSample {
    pub fn turns(&self) -> usize {
        self.inputs.len()
    }

    fn check(&self) -> Result<()> {
        let t = self.inputs.len();
        if self.labels.len() != t || self.mask.len() != t {
            return Err(Error::LengthMismatch {
                expected: t,
                got: if self.labels.len() != t {
                    self.labels.len()
                } else {
                    self.mask.len()
                },
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub validation_period: usize,
    pub min_lr: f64,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.6,
            batch_size: None,
            max_epochs: 40,
            validation_period: 5,
            min_lr: 0.6 / 1024.0,
            l2_lambda: 1e-4,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.min_lr > 0.0) {
            return bad(format!("min_lr must be positive, got {}", self.min_lr));
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be at least 1".into());
        }
        if self.validation_period == 0 {
            return bad("validation period must be at least 1".into());
        }
        if !(self.l2_lambda >= 0.0) {
            return bad(format!("l2 lambda must be non-negative, got {}", self.l2_lambda));
        }
        Ok(())
    }
}

/// `sum_d T(d)` over the distinct dialogues among `samples`.
pub fn turn_normalizer<'a>(samples: impl IntoIterator<Item = &'a TrainingSample>) -> usize {
    let mut turns: BTreeMap<&str, usize> = BTreeMap::new();
    for s in samples {
        turns.entry(&s.dialogue_id).or_insert(s.turns());
    }
    turns.values().sum()
}

/// Unnormalised masked squared error of one sample given its per-turn
/// supervised outputs.
pub fn masked_squared_error(outputs: &[f64], sample: &TrainingSample) -> f64 {
    outputs
        .iter()
        .zip(&sample.labels)
        .zip(&sample.mask)
        .filter(|(_, &m)| m)
        .map(|((b, l), _)| (b - l) * (b - l))
        .sum()
}

/// Per-turn values of the supervised output (the first output node).
pub fn supervised_outputs(net: &Network, state: &NetworkState) -> Vec<f64> {
    let out = net.outputs()[0];
    (1..=state.turn()).map(|t| state.value(out, t)).collect()
}

pub fn mse_loss(net: &Network, samples: &[TrainingSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for s in samples {
        s.check()?;
        let state = net.run(&s.inputs)?;
        total += masked_squared_error(&supervised_outputs(net, &state), s);
    }
    Ok(total / turn_normalizer(samples) as f64)
}

/// Draws every sum-node weight from `N(0, sigma^2)`.
pub fn randomize_weights<R: Rng + ?Sized>(net: &mut Network, rng: &mut R, sigma: f64) {
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut w = net.weights();
    for e in net.trainable_edges().collect::<Vec<_>>() {
        w[e] = normal.sample(rng);
    }
    net.set_weights(&w);
}

/// Edges whose source value at `turn` comes from `turn - 1`.
fn source_turn(kind: EdgeKind, turn: usize) -> usize {
    match kind {
        EdgeKind::Recurrent => turn - 1,
        EdgeKind::Instant => turn,
    }
}
