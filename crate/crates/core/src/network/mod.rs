//! Recurrent polynomial networks.
//!
//! A network is a graph of input, sum, product and activation nodes. Edges are
//! either recurrent (type-1, reading the source at turn `t - 1`) or
//! instantaneous (type-2, reading the source at turn `t`). Only loops made of
//! recurrent edges are allowed, so every turn can be evaluated in a fixed
//! topological order over the instantaneous edges.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod activation;
mod eval;
pub mod expand;
pub mod io;
pub mod random;

pub use activation::{ActivationSpec, Branch, Softclip};
pub use eval::{Network, NetworkState};
pub use expand::{expand_to_polynomial, Polynomial, Symbol, DEFAULT_MAX_TERMS};
pub use io::{from_json_str, read_topology, to_json_string, write_topology};
pub use random::{random_topology, RandomTopologyConfig};

/// Dense node index; node `i` sits at position `i` of [`NetworkTopology::nodes`].
pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Sum,
    Product,
    Activation,
}

impl NodeKind {
    pub fn is_computation(self) -> bool {
        self != NodeKind::Input
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    /// Type-1: the target reads the source's value from the previous turn.
    #[serde(rename = "t1")]
    Recurrent,
    /// Type-2: the target reads the source's value from the current turn.
    #[serde(rename = "t2")]
    Instant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub layer: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
    /// Present iff the target is a sum node.
    pub weight: Option<f64>,
    /// Present iff the target is a product node.
    pub multiplicity: Option<u32>,
}

impl Edge {
    pub fn weighted(from: NodeId, to: NodeId, kind: EdgeKind, weight: f64) -> Self {
        Edge {
            from,
            to,
            kind,
            weight: Some(weight),
            multiplicity: None,
        }
    }

    pub fn factor(from: NodeId, to: NodeId, kind: EdgeKind, multiplicity: u32) -> Self {
        Edge {
            from,
            to,
            kind,
            weight: None,
            multiplicity: Some(multiplicity),
        }
    }

    /// The single instantaneous edge feeding an activation node.
    pub fn activation(from: NodeId, to: NodeId) -> Self {
        Edge {
            from,
            to,
            kind: EdgeKind::Instant,
            weight: None,
            multiplicity: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NetworkTopology {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub outputs: Vec<NodeId>,
    pub activation: ActivationSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NodeIdMismatch { position: usize, id: NodeId },
    UnknownEdgeEndpoint { edge: usize, node: NodeId },
    InputHasIncoming { node: NodeId, edge: usize },
    ActivationFanIn { node: NodeId, instant: usize, recurrent: usize },
    MissingWeight { edge: usize },
    UnexpectedWeight { edge: usize },
    NonFiniteWeight { edge: usize },
    MissingMultiplicity { edge: usize },
    UnexpectedMultiplicity { edge: usize },
    ZeroMultiplicity { edge: usize },
    Type2Cycle { nodes: Vec<NodeId> },
    UnknownOutput { node: NodeId },
    OutputNotComputation { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeIdMismatch { position, id } => {
                write!(f, "node at position {position} has id {id}")
            }
            Violation::UnknownEdgeEndpoint { edge, node } => {
                write!(f, "edge {edge} references unknown node {node}")
            }
            Violation::InputHasIncoming { node, edge } => {
                write!(f, "input node {node} has incoming edge {edge}")
            }
            Violation::ActivationFanIn {
                node,
                instant,
                recurrent,
            } => write!(
                f,
                "activation node {node} needs exactly one type-2 input (has {instant} type-2, {recurrent} type-1)"
            ),
            Violation::MissingWeight { edge } => write!(f, "edge {edge} into a sum node has no weight"),
            Violation::UnexpectedWeight { edge } => {
                write!(f, "edge {edge} carries a weight but its target is not a sum node")
            }
            Violation::NonFiniteWeight { edge } => write!(f, "edge {edge} has a non-finite weight"),
            Violation::MissingMultiplicity { edge } => {
                write!(f, "edge {edge} into a product node has no multiplicity")
            }
            Violation::UnexpectedMultiplicity { edge } => write!(
                f,
                "edge {edge} carries a multiplicity but its target is not a product node"
            ),
            Violation::ZeroMultiplicity { edge } => write!(f, "edge {edge} has multiplicity 0"),
            Violation::Type2Cycle { nodes } => {
                let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
                write!(f, "type-2 cycle {{{}}}", ids.join(","))
            }
            Violation::UnknownOutput { node } => write!(f, "output {node} is not a node"),
            Violation::OutputNotComputation { node } => {
                write!(f, "output {node} is an input node")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "OK");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl NetworkTopology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.nodes[node].kind
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.nodes.len();
        for (position, node) in self.nodes.iter().enumerate() {
            if node.id != position {
                violations.push(Violation::NodeIdMismatch {
                    position,
                    id: node.id,
                });
            }
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }

        let mut instant_in = vec![0usize; n];
        let mut recurrent_in = vec![0usize; n];
        let mut endpoints_ok = true;
        for (i, e) in self.edges.iter().enumerate() {
            let mut ok = true;
            for node in [e.from, e.to] {
                if node >= n {
                    violations.push(Violation::UnknownEdgeEndpoint { edge: i, node });
                    ok = false;
                }
            }
            if !ok {
                endpoints_ok = false;
                continue;
            }
            match e.kind {
                EdgeKind::Instant => instant_in[e.to] += 1,
                EdgeKind::Recurrent => recurrent_in[e.to] += 1,
            }
            match self.nodes[e.to].kind {
                NodeKind::Input => violations.push(Violation::InputHasIncoming {
                    node: e.to,
                    edge: i,
                }),
                NodeKind::Sum => {
                    match e.weight {
                        None => violations.push(Violation::MissingWeight { edge: i }),
                        Some(w) if !w.is_finite() => {
                            violations.push(Violation::NonFiniteWeight { edge: i })
                        }
                        _ => {}
                    }
                    if e.multiplicity.is_some() {
                        violations.push(Violation::UnexpectedMultiplicity { edge: i });
                    }
                }
                NodeKind::Product => {
                    match e.multiplicity {
                        None => violations.push(Violation::MissingMultiplicity { edge: i }),
                        Some(0) => violations.push(Violation::ZeroMultiplicity { edge: i }),
                        _ => {}
                    }
                    if e.weight.is_some() {
                        violations.push(Violation::UnexpectedWeight { edge: i });
                    }
                }
                NodeKind::Activation => {
                    if e.weight.is_some() {
                        violations.push(Violation::UnexpectedWeight { edge: i });
                    }
                    if e.multiplicity.is_some() {
                        violations.push(Violation::UnexpectedMultiplicity { edge: i });
                    }
                }
            }
        }
        for node in &self.nodes {
            if node.kind == NodeKind::Activation
                && (instant_in[node.id] != 1 || recurrent_in[node.id] != 0)
            {
                violations.push(Violation::ActivationFanIn {
                    node: node.id,
                    instant: instant_in[node.id],
                    recurrent: recurrent_in[node.id],
                });
            }
        }
        if endpoints_ok {
            if let Err(cycle) = self.kahn_order() {
                violations.push(Violation::Type2Cycle { nodes: cycle });
            }
        }
        for &out in &self.outputs {
            if out >= n {
                violations.push(Violation::UnknownOutput { node: out });
            } else if !self.nodes[out].kind.is_computation() {
                violations.push(Violation::OutputNotComputation { node: out });
            }
        }
        ValidationReport { violations }
    }

    /// Evaluation order: every node after its type-2 predecessors, ties broken
    /// by ascending layer tag and then id.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        if let Some((i, e)) = self
            .edges
            .iter()
            .enumerate()
            .find(|(_, e)| e.from >= n || e.to >= n)
        {
            return Err(Error::InvalidTopology(
                Violation::UnknownEdgeEndpoint {
                    edge: i,
                    node: e.from.max(e.to),
                }
                .to_string(),
            ));
        }
        self.kahn_order().map_err(Error::Type2Cycle)
    }

    /// On failure returns the nodes that sit on (or between) type-2 cycles.
    fn kahn_order(&self) -> std::result::Result<Vec<NodeId>, Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut succ: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Instant) {
            indegree[e.to] += 1;
            succ[e.from].push(e.to);
        }
        let key = |id: NodeId| Reverse((self.nodes[id].layer.unwrap_or(0), id));
        let mut ready: BinaryHeap<_> = (0..n).filter(|&i| indegree[i] == 0).map(key).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, id))) = ready.pop() {
            order.push(id);
            for &s in &succ[id] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(key(s));
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }

        // Peel off nodes that are merely downstream of a cycle.
        let mut remaining: BTreeSet<NodeId> = (0..n).filter(|&i| indegree[i] > 0).collect();
        loop {
            let sinks: Vec<NodeId> = remaining
                .iter()
                .copied()
                .filter(|&x| !succ[x].iter().any(|s| remaining.contains(s)))
                .collect();
            if sinks.is_empty() {
                break;
            }
            for s in sinks {
                remaining.remove(&s);
            }
        }
        Err(remaining.into_iter().collect())
    }

    /// Instantaneous predecessors (I-hat) of `node`.
    pub fn instant_inputs(&self, node: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.to == node && e.kind == EdgeKind::Instant)
    }

    /// Recurrent predecessors (I) of `node`.
    pub fn recurrent_inputs(&self, node: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.to == node && e.kind == EdgeKind::Recurrent)
    }
}
