use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Branch, Network, NodeKind};

use super::{batch_gradient, masked_squared_error, supervised_outputs, turn_normalizer, TrainingSample};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Gradients smaller than this are compared absolutely rather than
    /// relatively.
    pub floor: f64,
    /// Skip weights whose `±h` perturbation moves some activation input onto
    /// another branch, where the finite difference straddles a kink.
    pub skip_branch_crossings: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            floor: 1e-6,
            skip_branch_crossings: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Edge with the largest discrepancy.
    pub worst_edge: Option<usize>,
    pub checked: usize,
    pub skipped: usize,
}

fn loss_and_branches(net: &Network, samples: &[TrainingSample]) -> Result<(f64, Vec<Branch>)> {
    let topo = net.topology();
    let activations: Vec<(usize, usize)> = topo
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Activation)
        .map(|n| (n.id, topo.edges[net.incoming(n.id)[0]].from))
        .collect();
    let mut se = 0.0;
    let mut branches = Vec::new();
    for s in samples {
        let state = net.run(&s.inputs)?;
        se += masked_squared_error(&supervised_outputs(net, &state), s);
        for t in 1..=state.turn() {
            for &(_, y) in &activations {
                branches.push(topo.activation.branch(state.value(y, t)));
            }
        }
    }
    Ok((se / turn_normalizer(samples) as f64, branches))
}

/// Compares the backpropagated gradient of the normalised loss (without the
/// L2 term) against central finite differences, weight by weight.
pub fn gradient_check(
    net: &Network,
    samples: &[TrainingSample],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if !(config.h > 0.0) {
        return Err(Error::InvalidConfig(format!("h must be positive, got {}", config.h)));
    }
    let analytic = batch_gradient(net, samples, 1.0)?.normalized();
    let (_, base) = loss_and_branches(net, samples)?;
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_edge: None,
        checked: 0,
        skipped: 0,
    };
    for e in net.trainable_edges() {
        let w = net.topology().edges[e].weight.expect("trainable");
        probe.set_weight(e, w + config.h);
        let (up, up_branches) = loss_and_branches(&probe, samples)?;
        probe.set_weight(e, w - config.h);
        let (down, down_branches) = loss_and_branches(&probe, samples)?;
        probe.set_weight(e, w);
        if config.skip_branch_crossings && (up_branches != base || down_branches != base) {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * config.h);
        let a = analytic[e];
        let scale = a.abs().max(numeric.abs()).max(config.floor);
        let rel = (a - numeric).abs() / scale;
        report.checked += 1;
        if rel > report.max_relative_error || report.worst_edge.is_none() {
            report.max_relative_error = rel.max(report.max_relative_error);
            report.worst_edge = Some(e);
        }
    }
    Ok(report)
}
