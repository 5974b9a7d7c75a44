use crate::error::{Error, Result};

use super::{EdgeKind, NetworkTopology, NodeId, NodeKind};

/// A validated topology with its evaluation order and adjacency precomputed.
///
/// The structure is immutable once built; only sum-node weights can be
/// replaced (see [`Network::set_weights`]), which is what training does
/// between mini-batches.
#[derive(Clone, Debug)]
pub struct Network {
    topology: NetworkTopology,
    order: Vec<NodeId>,
    incoming: Vec<Vec<usize>>,
    inputs: Vec<NodeId>,
    input_slot: Vec<Option<usize>>,
}

/// Node values for turns `0..=turn()`; turn 0 holds the initial values.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    initial: Vec<f64>,
    turns: Vec<Vec<f64>>,
}

impl NetworkState {
    pub fn new(initial: Vec<f64>) -> Self {
        NetworkState {
            initial,
            turns: Vec::new(),
        }
    }

    /// Number of evaluated turns.
    pub fn turn(&self) -> usize {
        self.turns.len()
    }

    pub fn values(&self, turn: usize) -> &[f64] {
        if turn == 0 {
            &self.initial
        } else {
            &self.turns[turn - 1]
        }
    }

    pub fn current(&self) -> &[f64] {
        self.values(self.turn())
    }

    pub fn value(&self, node: NodeId, turn: usize) -> f64 {
        self.values(turn)[node]
    }

    /// Overrides `u^(0)` for one node. Only meaningful before the first step.
    pub fn set_initial(&mut self, node: NodeId, value: f64) {
        assert!(self.turns.is_empty(), "initial values are fixed after turn 0");
        self.initial[node] = value;
    }
}

impl Network {
    pub fn new(topology: NetworkTopology) -> Result<Self> {
        let report = topology.validate();
        if !report.is_ok() {
            return Err(Error::InvalidTopology(report.to_string()));
        }
        let order = topology.topological_order()?;
        let n = topology.node_count();
        let mut incoming = vec![Vec::new(); n];
        for (i, e) in topology.edges.iter().enumerate() {
            incoming[e.to].push(i);
        }
        let inputs: Vec<NodeId> = topology
            .nodes
            .iter()
            .filter(|node| node.kind == NodeKind::Input)
            .map(|node| node.id)
            .collect();
        let mut input_slot = vec![None; n];
        for (slot, &id) in inputs.iter().enumerate() {
            input_slot[id] = Some(slot);
        }
        Ok(Network {
            topology,
            order,
            incoming,
            inputs,
            input_slot,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn into_topology(self) -> NetworkTopology {
        self.topology
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    /// Edge indices into `node`.
    pub fn incoming(&self, node: NodeId) -> &[usize] {
        &self.incoming[node]
    }

    /// Input nodes in id order; this is the layout expected for turn inputs.
    pub fn input_nodes(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.topology.outputs
    }

    /// Edges whose weight is a trainable parameter (those into sum nodes).
    pub fn trainable_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.topology
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight.is_some())
            .map(|(i, _)| i)
    }

    /// One entry per edge; edges without a weight report 0.
    pub fn weights(&self) -> Vec<f64> {
        self.topology
            .edges
            .iter()
            .map(|e| e.weight.unwrap_or(0.0))
            .collect()
    }

    /// Replaces every sum-node weight. Entries for unweighted edges are ignored.
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.topology.edges.len());
        for (e, &w) in self.topology.edges.iter_mut().zip(weights) {
            if let Some(slot) = e.weight.as_mut() {
                *slot = w;
            }
        }
    }

    pub fn set_weight(&mut self, edge: usize, weight: f64) {
        if let Some(slot) = self.topology.edges[edge].weight.as_mut() {
            *slot = weight;
        }
    }

    /// State at turn 0 with every `u^(0)` set to zero.
    pub fn initial_state(&self) -> NetworkState {
        NetworkState::new(vec![0.0; self.node_count()])
    }

    /// Evaluates turn `state.turn() + 1` and appends it to `state`.
    pub fn forward_step<'s>(
        &self,
        state: &'s mut NetworkState,
        inputs: &[f64],
    ) -> Result<&'s [f64]> {
        let turn = state.turn() + 1;
        let values = self.evaluate_turn(state.current(), inputs, turn)?;
        state.turns.push(values);
        Ok(state.current())
    }

    /// Steps through `inputs` and returns the output-node values of every turn.
    pub fn forward_sequence(
        &self,
        state: &mut NetworkState,
        inputs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("empty input sequence".into()));
        }
        let mut outputs = Vec::with_capacity(inputs.len());
        for turn_inputs in inputs {
            let values = self.forward_step(state, turn_inputs)?;
            outputs.push(self.topology.outputs.iter().map(|&o| values[o]).collect());
        }
        Ok(outputs)
    }

    /// Full trace from the zero initial state.
    pub fn run(&self, inputs: &[Vec<f64>]) -> Result<NetworkState> {
        let mut state = self.initial_state();
        for turn_inputs in inputs {
            self.forward_step(&mut state, turn_inputs)?;
        }
        Ok(state)
    }

    pub(crate) fn evaluate_turn(
        &self,
        prev: &[f64],
        inputs: &[f64],
        turn: usize,
    ) -> Result<Vec<f64>> {
        if inputs.len() < self.inputs.len() {
            return Err(Error::MissingInput {
                node: self.inputs[inputs.len()],
            });
        }
        if inputs.len() > self.inputs.len() {
            return Err(Error::InputCount {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let edges = &self.topology.edges;
        let mut values = vec![0.0; self.node_count()];
        for &x in &self.order {
            let source = |e: usize, values: &[f64]| {
                let edge = &edges[e];
                match edge.kind {
                    EdgeKind::Recurrent => prev[edge.from],
                    EdgeKind::Instant => values[edge.from],
                }
            };
            let v = match self.topology.nodes[x].kind {
                NodeKind::Input => inputs[self.input_slot[x].expect("input slot")],
                NodeKind::Sum => self.incoming[x]
                    .iter()
                    .map(|&e| edges[e].weight.unwrap_or(0.0) * source(e, &values))
                    .sum(),
                NodeKind::Product => self.incoming[x]
                    .iter()
                    .map(|&e| source(e, &values).powi(edges[e].multiplicity.unwrap_or(1) as i32))
                    .product(),
                NodeKind::Activation => {
                    let e = self.incoming[x][0];
                    self.topology.activation.apply(values[edges[e].from])
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFinite { node: x, turn });
            }
            values[x] = v;
        }
        Ok(values)
    }
}
