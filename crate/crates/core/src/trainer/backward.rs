use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{Network, NetworkState, NodeKind};

use super::{masked_squared_error, source_turn, supervised_outputs, turn_normalizer, TrainingSample};

/// Error signals and weight increments of one backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientAccumulator {
    pub alpha: f64,
    /// `delta[t - 1][node]` for turns `1..=T`.
    pub node_errors: Vec<Vec<f64>>,
    /// `alpha * sum_t delta_x u_y` per edge; zero for edges without a weight.
    pub edge_deltas: Vec<f64>,
}

impl GradientAccumulator {
    pub fn error(&self, node: usize, turn: usize) -> f64 {
        self.node_errors[turn - 1][node]
    }
}

/// Propagates `2 (u - l)` from the supervised output on masked turns back
/// through every turn and node of a completed forward pass.
///
/// The signals use the unnormalised squared error; callers divide by the
/// turn count of whatever set the loss is defined over.
pub fn backward_pass(
    net: &Network,
    state: &NetworkState,
    sample: &TrainingSample,
    alpha: f64,
) -> Result<GradientAccumulator> {
    sample.check()?;
    let turns = state.turn();
    if turns != sample.turns() {
        return Err(Error::LengthMismatch {
            expected: sample.turns(),
            got: turns,
        });
    }
    let topo = net.topology();
    let n = net.node_count();
    let out = net.outputs()[0];
    let mut errors = vec![vec![0.0; n]; turns];
    for t in 1..=turns {
        if sample.mask[t - 1] {
            errors[t - 1][out] = 2.0 * (state.value(out, t) - sample.labels[t - 1]);
        }
    }
    let mut grad = vec![0.0; topo.edges.len()];
    let mut factors = Vec::new();

    for t in (1..=turns).rev() {
        for &x in net.order().iter().rev() {
            let d = errors[t - 1][x];
            if !d.is_finite() {
                return Err(Error::NonFiniteGradient { node: x, turn: t });
            }
            if d == 0.0 {
                continue;
            }
            match topo.nodes[x].kind {
                NodeKind::Input => {}
                NodeKind::Activation => {
                    let y = topo.edges[net.incoming(x)[0]].from;
                    errors[t - 1][y] += d * topo.activation.derivative(state.value(y, t));
                }
                NodeKind::Sum => {
                    for &e in net.incoming(x) {
                        let edge = &topo.edges[e];
                        let st = source_turn(edge.kind, t);
                        grad[e] += d * state.value(edge.from, st);
                        if st >= 1 {
                            errors[st - 1][edge.from] += d * edge.weight.unwrap_or(0.0);
                        }
                    }
                }
                NodeKind::Product => {
                    // u_x = prod_e s_e^m_e; the partial for factor e is
                    // m_e s_e^(m_e - 1) times the product of the other factors
                    factors.clear();
                    for &e in net.incoming(x) {
                        let edge = &topo.edges[e];
                        let s = state.value(edge.from, source_turn(edge.kind, t));
                        factors.push(s.powi(edge.multiplicity.unwrap_or(1) as i32));
                    }
                    let k = factors.len();
                    let mut suffix = vec![1.0; k + 1];
                    for i in (0..k).rev() {
                        suffix[i] = suffix[i + 1] * factors[i];
                    }
                    let mut prefix = 1.0;
                    for (i, &e) in net.incoming(x).iter().enumerate() {
                        let edge = &topo.edges[e];
                        let st = source_turn(edge.kind, t);
                        let m = edge.multiplicity.unwrap_or(1);
                        if st >= 1 {
                            let s = state.value(edge.from, st);
                            let local = f64::from(m) * s.powi(m as i32 - 1);
                            errors[st - 1][edge.from] += d * local * prefix * suffix[i + 1];
                        }
                        prefix *= factors[i];
                    }
                }
            }
        }
    }

    let edge_deltas: Vec<f64> = grad.iter().map(|g| alpha * g).collect();
    if let Some(e) = edge_deltas.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            node: topo.edges[e].to,
            turn: 0,
        });
    }
    Ok(GradientAccumulator {
        alpha,
        node_errors: errors,
        edge_deltas,
    })
}

/// Forward and backward pass of one sample; also returns its squared error.
pub fn sample_gradient(
    net: &Network,
    sample: &TrainingSample,
    alpha: f64,
) -> Result<(GradientAccumulator, f64)> {
    sample.check()?;
    let state = net.run(&sample.inputs)?;
    let se = masked_squared_error(&supervised_outputs(net, &state), sample);
    Ok((backward_pass(net, &state, sample, alpha)?, se))
}

/// Summed increments of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient {
    /// Element-wise sum of the per-sample `edge_deltas`, in sample order.
    pub edge_deltas: Vec<f64>,
    pub squared_error: f64,
    /// `sum_d T(d)` of the batch.
    pub normalizer: usize,
}

impl BatchGradient {
    /// `alpha * dL/dw` for the loss of this batch on its own.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.normalizer as f64;
        self.edge_deltas.iter().map(|d| d / n).collect()
    }

    pub fn loss(&self) -> f64 {
        self.squared_error / self.normalizer as f64
    }
}

/// Runs the samples in parallel and sums their increments in sample order,
/// so the result does not depend on thread scheduling.
pub fn batch_gradient(net: &Network, samples: &[TrainingSample], alpha: f64) -> Result<BatchGradient> {
    let refs: Vec<&TrainingSample> = samples.iter().collect();
    batch_gradient_of(net, &refs, alpha)
}

pub(super) fn batch_gradient_of(
    net: &Network,
    samples: &[&TrainingSample],
    alpha: f64,
) -> Result<BatchGradient> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let parts: Vec<Result<(GradientAccumulator, f64)>> = samples
        .par_iter()
        .map(|s| sample_gradient(net, s, alpha))
        .collect();
    let mut edge_deltas = vec![0.0; net.topology().edges.len()];
    let mut squared_error = 0.0;
    for part in parts {
        let (acc, se) = part?;
        for (sum, d) in edge_deltas.iter_mut().zip(&acc.edge_deltas) {
            *sum += d;
        }
        squared_error += se;
    }
    Ok(BatchGradient {
        edge_deltas,
        squared_error,
        normalizer: turn_normalizer(samples.iter().copied()),
    })
}
