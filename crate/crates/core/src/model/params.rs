use std::collections::BTreeMap;

use rand::Rng;

use super::config::{ModelConfig, ModelError};
use super::tape::Tensor;
use crate::crystal::{GraphConfig, ATOM_FEATURE_DIM};
use crate::rng::{name_tag, stream};

/// Named parameter tensors. Names are stable; they key the optimizer state
/// and the checkpoint format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    pub tensors: BTreeMap<String, Tensor>,
}

impl Parameters {
    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {name:?}"))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn coordinate_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }
}

enum Init {
    /// Uniform over +-1/sqrt(fan_in), the fan-in being the tensor's rows.
    FanIn,
    Zeros,
    Ones,
}

/// Every tensor the model owns, with its shape and initialization. The node
/// lift widens in ablation mode because element embeddings ride along as
/// extra node-feature columns.
fn shape_table(cfg: &ModelConfig, graph: &GraphConfig) -> Vec<(String, usize, usize, Init)> {
    let d2 = cfg.hidden_dim;
    let node_in = if cfg.ablation() {
        ATOM_FEATURE_DIM + cfg.kg_embed_dim
    } else {
        ATOM_FEATURE_DIM
    };
    let mut t: Vec<(String, usize, usize, Init)> = Vec::new();
    let linear = |name: String, rows: usize, cols: usize, t: &mut Vec<_>| {
        t.push((format!("{name}.w"), rows, cols, Init::FanIn));
        t.push((format!("{name}.b"), 1, cols, Init::Zeros));
    };

    linear("lift.node".into(), node_in, d2, &mut t);
    linear("lift.edge".into(), graph.edge_centers, d2, &mut t);
    for k in 0..3 {
        linear(format!("lift.angle{k}"), graph.angle_centers, d2, &mut t);
    }
    if !cfg.ablation() {
        linear("he.proj".into(), cfg.kg_embed_dim, d2, &mut t);
    }

    for i in 0..cfg.num_node_layers {
        let p = format!("node{i}");
        t.push((format!("{p}.ln.g"), 1, d2, Init::Ones));
        t.push((format!("{p}.ln.b"), 1, d2, Init::Zeros));
        linear(format!("{p}.q"), d2, d2, &mut t);
        linear(format!("{p}.k"), d2, d2, &mut t);
        linear(format!("{p}.v"), d2, d2, &mut t);
        t.push((format!("{p}.ek.w"), d2, d2, Init::FanIn));
        t.push((format!("{p}.ev.w"), d2, d2, Init::FanIn));
        // No bias after message aggregation: a gate of zero must leave the
        // node states exactly unchanged.
        t.push((format!("{p}.out.w"), d2, d2, Init::FanIn));
    }

    for i in 0..cfg.num_edge_layers {
        let p = format!("edge{i}");
        t.push((format!("{p}.ln.g"), 1, d2, Init::Ones));
        t.push((format!("{p}.ln.b"), 1, d2, Init::Zeros));
        linear(format!("{p}.q"), d2, d2, &mut t);
        for k in 0..3 {
            t.push((format!("{p}.k{k}.w"), d2, d2, Init::FanIn));
            t.push((format!("{p}.v{k}.w"), d2, d2, Init::FanIn));
        }
        t.push((format!("{p}.out.w"), d2, d2, Init::FanIn));
    }

    for i in 0..cfg.num_fusion_layers {
        let p = format!("fusion{i}");
        t.push((format!("{p}.ln1.g"), 1, d2, Init::Ones));
        t.push((format!("{p}.ln1.b"), 1, d2, Init::Zeros));
        linear(format!("{p}.v"), d2, d2, &mut t);
        linear(format!("{p}.out"), d2, d2, &mut t);
        t.push((format!("{p}.ln2.g"), 1, d2, Init::Ones));
        t.push((format!("{p}.ln2.b"), 1, d2, Init::Zeros));
        linear(format!("{p}.ffn1"), d2, 4 * d2, &mut t);
        linear(format!("{p}.ffn2"), 4 * d2, d2, &mut t);
    }

    linear("head".into(), d2, 1, &mut t);
    t
}

/// Seeded, per-tensor-stream initialization: each tensor draws from its own
/// stream keyed by (seed, tensor name), so adding or removing layers does
/// not shift the values of unrelated tensors.
pub fn init_params(cfg: &ModelConfig, graph: &GraphConfig) -> Result<Parameters, ModelError> {
    cfg.validate()?;
    let mut tensors = BTreeMap::new();
    for (name, rows, cols, init) in shape_table(cfg, graph) {
        let mut tensor = Tensor::zeros(rows, cols);
        match init {
            Init::Zeros => {}
            Init::Ones => tensor.data.fill(1.0),
            Init::FanIn => {
                let bound = 1.0 / (rows as f64).sqrt();
                let mut rng = stream(cfg.seed, &[name_tag(&name)]);
                for x in &mut tensor.data {
                    *x = rng.gen_range(-bound..bound);
                }
            }
        }
        tensors.insert(name, tensor);
    }
    Ok(Parameters { tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_reproduces_parameters() {
        let cfg = ModelConfig::default();
        let graph = GraphConfig::default();
        let a = init_params(&cfg, &graph).unwrap();
        let b = init_params(&cfg, &graph).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let graph = GraphConfig::default();
        let a = init_params(&ModelConfig::default(), &graph).unwrap();
        let b = init_params(
            &ModelConfig {
                seed: 7,
                ..ModelConfig::default()
            },
            &graph,
        )
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig {
            hidden_dim: 16,
            kg_embed_dim: 8,
            num_node_layers: 2,
            num_edge_layers: 1,
            num_fusion_layers: 2,
            num_heads: 2,
            ..ModelConfig::default()
        };
        let graph = GraphConfig::default();
        let p = init_params(&cfg, &graph).unwrap();
        let lift = p.get("lift.node.w");
        assert_eq!((lift.rows, lift.cols), (ATOM_FEATURE_DIM, 16));
        let he = p.get("he.proj.w");
        assert_eq!((he.rows, he.cols), (8, 16));
        let ffn = p.get("fusion1.ffn1.w");
        assert_eq!((ffn.rows, ffn.cols), (16, 64));
        let head = p.get("head.w");
        assert_eq!((head.rows, head.cols), (16, 1));
        assert!(p.tensors.contains_key("node1.ek.w"));
        assert!(p.tensors.contains_key("edge0.k2.w"));
        assert!(p.all_finite());
    }

    #[test]
    fn ablation_widens_the_node_lift_and_drops_the_projection() {
        let cfg = ModelConfig {
            ablation_mode: super::super::config::AblationMode::AttrsAsNodeFeatures,
            ..ModelConfig::default()
        };
        let p = init_params(&cfg, &GraphConfig::default()).unwrap();
        let lift = p.get("lift.node.w");
        assert_eq!(lift.rows, ATOM_FEATURE_DIM + cfg.kg_embed_dim);
        assert!(!p.tensors.contains_key("he.proj.w"));
    }

    #[test]
    fn layer_norm_gains_start_at_one() {
        let p = init_params(&ModelConfig::default(), &GraphConfig::default()).unwrap();
        assert!(p.get("node0.ln.g").data.iter().all(|&x| x == 1.0));
        assert!(p.get("node0.ln.b").data.iter().all(|&x| x == 0.0));
        assert!(p.get("head.b").data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ModelConfig {
            num_heads: 5,
            ..ModelConfig::default()
        };
        assert!(init_params(&cfg, &GraphConfig::default()).is_err());
    }
}
