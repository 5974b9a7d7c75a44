//! Layered network shape that mirrors a polynomial rule, and the coefficient
//! transfer from a rule into that network.
//!
//! Layer 1 holds one node per feature. The previous belief (feature 0) and,
//! optionally, an extra recurrent signal are product nodes with a single
//! recurrent edge from the activated layer-3 sums, so gradients flow through
//! them across turns. Layer 2 has one product node per monomial, layer 3 the
//! weighted sums and layer 4 the activation nodes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{
    ActivationSpec, Edge, EdgeKind, NetworkTopology, Node, NodeId, NodeKind,
};

use super::{enumerate_monomials, Monomial, PolynomialModel};

/// Where each part of a layered topology lives.
#[derive(Clone, Debug, PartialEq)]
pub struct DstLayout {
    /// Number of observed features (6 or 10 for DST), not counting the extra
    /// recurrent signal.
    pub feature_count: usize,
    pub extra_recurrent: bool,
    /// Layer-1 node for each basis index; the extra signal, when present, is
    /// basis index `feature_count`.
    pub feature_nodes: Vec<NodeId>,
    /// Layer-2 product nodes with their monomials, in enumeration order.
    pub monomial_nodes: Vec<(NodeId, Monomial)>,
    /// Sum node (3,0): the belief before activation.
    pub belief_sum: NodeId,
    /// Sum node (3,1), if present.
    pub extra_sum: Option<NodeId>,
    /// The supervised output: activated (3,0), or (3,0) itself without activation.
    pub output: NodeId,
}

impl DstLayout {
    pub fn basis_size(&self) -> usize {
        self.feature_count + usize::from(self.extra_recurrent)
    }

    pub fn monomial_of(&self, node: NodeId) -> Option<&Monomial> {
        self.monomial_nodes
            .iter()
            .find(|(id, _)| *id == node)
            .map(|(_, m)| m)
    }

    pub fn node_of(&self, monomial: &Monomial) -> Option<NodeId> {
        self.monomial_nodes
            .iter()
            .find(|(_, m)| m == monomial)
            .map(|(id, _)| *id)
    }

    /// Network inputs for one turn: features 1.. (feature 0 is fed back
    /// inside the network).
    pub fn network_inputs(&self, features: &[f64]) -> Vec<f64> {
        features[1..self.feature_count].to_vec()
    }

    /// Recovers the layout of a topology produced by [`build_layered_topology`].
    pub fn infer(topology: &NetworkTopology) -> Result<Self> {
        let mismatch = |msg: &str| Error::ModelMismatch(format!("not a layered DST topology: {msg}"));
        let in_layer = |layer: u32| -> Vec<&Node> {
            topology
                .nodes
                .iter()
                .filter(|n| n.layer == Some(layer))
                .collect()
        };
        let layer1 = in_layer(1);
        let layer2 = in_layer(2);
        let layer3 = in_layer(3);
        if layer1.is_empty() || layer2.is_empty() || layer3.is_empty() || layer3.len() > 2 {
            return Err(mismatch("expected populated layers 1-3 and at most two sums"));
        }
        if layer3.iter().any(|n| n.kind != NodeKind::Sum) {
            return Err(mismatch("layer 3 must hold sum nodes"));
        }
        let extra_recurrent = layer3.len() == 2;
        let basis = layer1.len();
        let feature_count = basis - usize::from(extra_recurrent);
        let feature_nodes: Vec<NodeId> = layer1.iter().map(|n| n.id).collect();
        let is_fed_back = |id: NodeId| {
            topology.nodes[id].kind == NodeKind::Product
                && topology.recurrent_inputs(id).count() == 1
        };
        if !is_fed_back(feature_nodes[0])
            || (extra_recurrent && !is_fed_back(feature_nodes[basis - 1]))
        {
            return Err(mismatch("recurrent features must be fed back by product nodes"));
        }
        let basis_index: BTreeMap<NodeId, usize> = feature_nodes
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut monomial_nodes = Vec::with_capacity(layer2.len());
        for node in &layer2 {
            if node.kind != NodeKind::Product {
                return Err(mismatch("layer 2 must hold product nodes"));
            }
            let mut idx = Vec::new();
            for e in topology.instant_inputs(node.id) {
                let k = basis_index
                    .get(&e.from)
                    .ok_or_else(|| mismatch("layer-2 node reads from outside layer 1"))?;
                for _ in 0..e.multiplicity.unwrap_or(1) {
                    idx.push(*k);
                }
            }
            monomial_nodes.push((node.id, Monomial::new(idx)));
        }
        let output = *topology
            .outputs
            .first()
            .ok_or_else(|| mismatch("no output node"))?;
        Ok(DstLayout {
            feature_count,
            extra_recurrent,
            feature_nodes,
            monomial_nodes,
            belief_sum: layer3[0].id,
            extra_sum: layer3.get(1).map(|n| n.id),
            output,
        })
    }
}

/// Layered network over `feature_count` features (plus an optional extra
/// recurrent signal) at polynomial `order`. All sum weights start at zero.
pub fn build_layered_topology(
    feature_count: usize,
    order: usize,
    extra_recurrent: bool,
    activation: ActivationSpec,
) -> NetworkTopology {
    let basis = feature_count + usize::from(extra_recurrent);
    let monomials = enumerate_monomials(basis, order);
    let first_monomial = basis;
    let belief_sum = first_monomial + monomials.len();
    let extra_sum = belief_sum + 1;
    let sums = 1 + usize::from(extra_recurrent);
    let activated = !activation.is_none();
    let first_activation = belief_sum + sums;
    // what each recurrent feature reads at t-1
    let belief_source = if activated { first_activation } else { belief_sum };
    let extra_source = if activated {
        first_activation + 1
    } else {
        extra_sum
    };

    let node = |id, kind, layer| Node {
        id,
        kind,
        layer: Some(layer),
    };
    let mut nodes = Vec::new();
    let mut edges = Vec::new();

    nodes.push(node(0, NodeKind::Product, 1));
    edges.push(Edge::factor(belief_source, 0, EdgeKind::Recurrent, 1));
    for id in 1..feature_count {
        nodes.push(node(id, NodeKind::Input, 1));
    }
    if extra_recurrent {
        nodes.push(node(feature_count, NodeKind::Product, 1));
        edges.push(Edge::factor(extra_source, feature_count, EdgeKind::Recurrent, 1));
    }

    for (i, m) in monomials.iter().enumerate() {
        let id = first_monomial + i;
        nodes.push(node(id, NodeKind::Product, 2));
        let mut k = 0;
        let idx = m.indices();
        while k < idx.len() {
            let run = idx[k..].iter().take_while(|&&j| j == idx[k]).count();
            edges.push(Edge::factor(idx[k], id, EdgeKind::Instant, run as u32));
            k += run;
        }
    }

    for s in 0..sums {
        let id = belief_sum + s;
        nodes.push(node(id, NodeKind::Sum, 3));
        for i in 0..monomials.len() {
            edges.push(Edge::weighted(first_monomial + i, id, EdgeKind::Instant, 0.0));
        }
    }
    if activated {
        for s in 0..sums {
            let id = first_activation + s;
            nodes.push(node(id, NodeKind::Activation, 4));
            edges.push(Edge::activation(belief_sum + s, id));
        }
    }

    NetworkTopology {
        nodes,
        edges,
        outputs: vec![belief_source],
        activation,
    }
}

/// The order-3 tracking network over 6 or 10 features.
pub fn build_dst_topology(
    feature_count: usize,
    extra_recurrent: bool,
    activation: ActivationSpec,
) -> Result<NetworkTopology> {
    if feature_count != 6 && feature_count != 10 {
        return Err(Error::UnsupportedFeatureCount(feature_count));
    }
    Ok(build_layered_topology(
        feature_count,
        3,
        extra_recurrent,
        activation,
    ))
}

/// Sets the network's weights so that its (pre-activation) belief equals the
/// rule's value.
///
/// The weight from each monomial node into (3,0) becomes the rule's
/// coefficient for that monomial. Monomials touching features the rule does
/// not know about (act flags, the extra signal) get weight 0, and so does
/// every weight into (3,1).
pub fn init_rpn_from_cmbp(
    topology: &NetworkTopology,
    model: &PolynomialModel,
) -> Result<NetworkTopology> {
    let layout = DstLayout::infer(topology)?;
    let topo_order = layout.monomial_nodes[0].1.order();
    if model.order() != topo_order {
        return Err(Error::ModelMismatch(format!(
            "rule has order {}, network has order {topo_order}",
            model.order()
        )));
    }
    if model.feature_count() > layout.feature_count {
        return Err(Error::ModelMismatch(format!(
            "rule uses {} features, network has {}",
            model.feature_count(),
            layout.feature_count
        )));
    }
    let coefficient: BTreeMap<NodeId, f64> = layout
        .monomial_nodes
        .iter()
        .map(|(id, m)| {
            let known = m.indices().iter().all(|&k| k < model.feature_count());
            (*id, if known { model.get(m) } else { 0.0 })
        })
        .collect();
    let mut out = topology.clone();
    for e in out.edges.iter_mut() {
        if e.to == layout.belief_sum {
            e.weight = Some(coefficient.get(&e.from).copied().unwrap_or(0.0));
        } else if Some(e.to) == layout.extra_sum {
            e.weight = Some(0.0);
        }
    }
    Ok(out)
}
