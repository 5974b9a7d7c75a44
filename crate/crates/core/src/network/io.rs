//! JSON topology files.
//!
//! Weights are written with 17 significant digits so that a file read back
//! reproduces every `f64` bit for bit. The writer lays out one node or edge
//! per line, which keeps checkpoints diffable.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::activation::ActivationRecord;
use super::{ActivationSpec, Edge, EdgeKind, Node, NetworkTopology, NodeKind};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    kind: NodeKind,
    #[serde(default)]
    layer: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: usize,
    to: usize,
    kind: EdgeKind,
    #[serde(default)]
    weight: Option<f64>,
    #[serde(default)]
    multiplicity: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRecord {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    outputs: Vec<usize>,
    activation: ActivationRecord,
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Input => "input",
        NodeKind::Sum => "sum",
        NodeKind::Product => "product",
        NodeKind::Activation => "activation",
    }
}

/// Parses a topology. Structural validity is not checked here; use
/// [`NetworkTopology::validate`].
pub fn from_json_str(text: &str) -> Result<NetworkTopology> {
    let rec: TopologyRecord = serde_json::from_str(text)?;
    Ok(NetworkTopology {
        nodes: rec
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                kind: n.kind,
                layer: n.layer,
            })
            .collect(),
        edges: rec
            .edges
            .into_iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                kind: e.kind,
                weight: e.weight,
                multiplicity: e.multiplicity,
            })
            .collect(),
        outputs: rec.outputs,
        activation: ActivationSpec::try_from(rec.activation)?,
    })
}

pub fn to_json_string(topology: &NetworkTopology) -> Result<String> {
    let mut out = String::from("{\n  \"nodes\": [\n");
    for (i, n) in topology.nodes.iter().enumerate() {
        let sep = if i + 1 < topology.nodes.len() { "," } else { "" };
        let _ = write!(out, "    {{\"id\": {}, \"kind\": \"{}\"", n.id, kind_name(n.kind));
        if let Some(layer) = n.layer {
            let _ = write!(out, ", \"layer\": {layer}");
        }
        let _ = writeln!(out, "}}{sep}");
    }
    out.push_str("  ],\n  \"edges\": [\n");
    for (i, e) in topology.edges.iter().enumerate() {
        let sep = if i + 1 < topology.edges.len() { "," } else { "" };
        let kind = match e.kind {
            EdgeKind::Recurrent => "t1",
            EdgeKind::Instant => "t2",
        };
        let _ = write!(
            out,
            "    {{\"from\": {}, \"to\": {}, \"kind\": \"{kind}\"",
            e.from, e.to
        );
        if let Some(w) = e.weight {
            if !w.is_finite() {
                return Err(Error::InvalidTopology(format!(
                    "edge {i} has non-finite weight {w}"
                )));
            }
            let _ = write!(out, ", \"weight\": {w:.16e}");
        }
        if let Some(m) = e.multiplicity {
            let _ = write!(out, ", \"multiplicity\": {m}");
        }
        let _ = writeln!(out, "}}{sep}");
    }
    let outputs: Vec<String> = topology.outputs.iter().map(|o| o.to_string()).collect();
    let _ = writeln!(out, "  ],\n  \"outputs\": [{}],", outputs.join(", "));
    let activation = serde_json::to_string(&ActivationRecord::from(&topology.activation))?;
    let _ = writeln!(out, "  \"activation\": {activation}\n}}");
    Ok(out)
}

pub fn read_topology(path: impl AsRef<Path>) -> Result<NetworkTopology> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn write_topology(path: impl AsRef<Path>, topology: &NetworkTopology) -> Result<()> {
    std::fs::write(path, to_json_string(topology)?)?;
    Ok(())
}
