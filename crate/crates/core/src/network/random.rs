//! Random well-formed topologies for property tests and gradient checks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ActivationSpec, Edge, EdgeKind, NetworkTopology, Node, NodeKind};

#[derive(Clone, Debug)]
pub struct RandomTopologyConfig {
    pub inputs: usize,
    pub computation_nodes: usize,
    pub max_fan_in: usize,
    pub recurrent_probability: f64,
    /// Standard deviation of sum-node weights.
    pub weight_scale: f64,
    /// Cap on the total instantaneous degree of product nodes, which keeps
    /// symbolic expansion tractable.
    pub max_degree: u32,
    /// When not `None`, some computation nodes become activation nodes.
    pub activation: ActivationSpec,
}

impl Default for RandomTopologyConfig {
    fn default() -> Self {
        RandomTopologyConfig {
            inputs: 3,
            computation_nodes: 12,
            max_fan_in: 4,
            recurrent_probability: 0.3,
            weight_scale: 0.5,
            max_degree: 3,
            activation: ActivationSpec::None,
        }
    }
}

/// Builds a random topology that always passes validation.
///
/// Instantaneous edges only point from lower to higher ids, so the type-2
/// subgraph is acyclic by construction; recurrent edges may point anywhere.
pub fn random_topology<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomTopologyConfig) -> NetworkTopology {
    let inputs = cfg.inputs.max(1);
    let total = inputs + cfg.computation_nodes.max(1);
    let normal = Normal::new(0.0, cfg.weight_scale).expect("finite weight scale");
    let mut nodes = Vec::with_capacity(total);
    let mut edges = Vec::new();
    // instantaneous polynomial degree of each node, in current-turn inputs
    let mut degree = vec![0u32; total];

    for id in 0..inputs {
        nodes.push(Node {
            id,
            kind: NodeKind::Input,
            layer: None,
        });
        degree[id] = 1;
    }
    for id in inputs..total {
        let roll: f64 = rng.random();
        let kind = if !cfg.activation.is_none() && id > inputs && roll < 0.15 {
            NodeKind::Activation
        } else if roll < 0.55 {
            NodeKind::Sum
        } else {
            NodeKind::Product
        };
        nodes.push(Node {
            id,
            kind,
            layer: None,
        });
        match kind {
            NodeKind::Activation => {
                let from = rng.random_range(inputs..id);
                edges.push(Edge::activation(from, id));
                degree[id] = degree[from];
            }
            NodeKind::Sum => {
                let fan_in = rng.random_range(1..=cfg.max_fan_in.max(1));
                for _ in 0..fan_in {
                    let w = normal.sample(rng);
                    if rng.random_bool(cfg.recurrent_probability) {
                        let from = rng.random_range(0..total);
                        edges.push(Edge::weighted(from, id, EdgeKind::Recurrent, w));
                    } else {
                        let from = rng.random_range(0..id);
                        edges.push(Edge::weighted(from, id, EdgeKind::Instant, w));
                        degree[id] = degree[id].max(degree[from]);
                    }
                }
            }
            NodeKind::Product => {
                let fan_in = rng.random_range(1..=cfg.max_fan_in.clamp(1, 3));
                for _ in 0..fan_in {
                    let m = rng.random_range(1..=2u32);
                    let from = rng.random_range(0..id);
                    let grown = degree[id] + m * degree[from];
                    if !rng.random_bool(cfg.recurrent_probability) && grown <= cfg.max_degree {
                        edges.push(Edge::factor(from, id, EdgeKind::Instant, m));
                        degree[id] = grown;
                    } else {
                        let from = rng.random_range(0..total);
                        edges.push(Edge::factor(from, id, EdgeKind::Recurrent, m));
                    }
                }
            }
            NodeKind::Input => unreachable!(),
        }
    }
    NetworkTopology {
        nodes,
        edges,
        outputs: vec![total - 1],
        activation: cfg.activation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_topologies_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..200 {
            let cfg = RandomTopologyConfig {
                computation_nodes: 1 + i % 40,
                activation: if i % 2 == 0 {
                    ActivationSpec::None
                } else {
                    ActivationSpec::softclip(0.01).unwrap()
                },
                ..Default::default()
            };
            let topo = random_topology(&mut rng, &cfg);
            let report = topo.validate();
            assert!(report.is_ok(), "{report}");
        }
    }
}
