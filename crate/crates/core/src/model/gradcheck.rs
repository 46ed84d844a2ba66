use super::config::{LossKind, ModelConfig, ModelError};
use super::network::{batch_loss_grads, batch_mean_loss, PreparedSample};
use super::params::Parameters;

/// How many coordinates the check probes at minimum, spread over every
/// parameter tensor.
const MIN_PROBES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative disagreement between analytic and central-difference
    /// gradients over all probed coordinates.
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares backpropagated gradients of the mean batch loss against central
/// differences at the given parameter point. Probes are spread evenly
/// through every tensor so no layer escapes coverage.
pub fn grad_check(
    cfg: &ModelConfig,
    params: &Parameters,
    samples: &[&PreparedSample],
    kind: LossKind,
    epsilon: f64,
) -> Result<GradCheckReport, ModelError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let analytic = batch_loss_grads(cfg, params, samples, kind)?.grads;

    let names: Vec<String> = params.tensors.keys().cloned().collect();
    let per_tensor = MIN_PROBES.div_ceil(names.len());
    let mut work = params.clone();
    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    for name in &names {
        let len = params.tensors[name].data.len();
        let probes = per_tensor.min(len);
        for j in 0..probes {
            let idx = j * len / probes;
            let original = params.tensors[name].data[idx];
            let mut eval = |x: f64| -> Result<f64, ModelError> {
                work.tensors.get_mut(name).unwrap().data[idx] = x;
                batch_mean_loss(cfg, &work, samples, kind)
            };
            let plus = eval(original + epsilon)?;
            let minus = eval(original - epsilon)?;
            work.tensors.get_mut(name).unwrap().data[idx] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic[name].data[idx];
            let denom = exact.abs().max(numeric.abs()).max(1e-6);
            max_rel_err = max_rel_err.max((exact - numeric).abs() / denom);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::network::prepare_sample;
    use super::super::params::init_params;
    use crate::crystal::{build_graph, CrystalStructure, GraphConfig};
    use crate::elementkg::bundled_table;
    use crate::kgembed::EmbeddingTable;
    use crate::rng::stream;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn toy_model() -> ModelConfig {
        ModelConfig {
            hidden_dim: 16,
            kg_embed_dim: 8,
            num_node_layers: 2,
            num_edge_layers: 1,
            num_fusion_layers: 2,
            num_heads: 2,
            ..ModelConfig::default()
        }
    }

    fn toy_samples(cfg: &ModelConfig) -> Vec<PreparedSample> {
        let graph_cfg = GraphConfig {
            cutoff: 3.2,
            min_neighbors: 0,
            ..GraphConfig::default()
        };
        let mut emb = EmbeddingTable::new(cfg.kg_embed_dim);
        let mut rng = stream(17, &[3]);
        for s in ["Na", "Cl", "Cs"] {
            let v: Vec<f64> = (0..cfg.kg_embed_dim)
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            emb.insert(s, v).unwrap();
        }
        [("Na", 2.8, 0.3), ("Cs", 3.1, -0.6)]
            .iter()
            .enumerate()
            .map(|(i, (cation, a, target))| {
                let s = CrystalStructure {
                    id: format!("g{i}"),
                    lattice: [[*a, 0.0, 0.0], [0.0, *a, 0.0], [0.0, 0.0, *a]],
                    frac_coords: vec![[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]],
                    species: vec![cation.to_string(), "Cl".to_string()],
                    targets: BTreeMap::new(),
                };
                let g = build_graph(&s, bundled_table(), &graph_cfg).unwrap();
                prepare_sample(&g, Some(&emb), cfg, Some(*target)).unwrap()
            })
            .collect()
    }

    #[test]
    fn full_model_gradients_match_central_differences() {
        let cfg = toy_model();
        let params = init_params(&cfg, &GraphConfig::default()).unwrap();
        let samples = toy_samples(&cfg);
        let refs: Vec<&PreparedSample> = samples.iter().collect();
        let report = grad_check(&cfg, &params, &refs, LossKind::Mse, 1e-5).unwrap();
        assert!(report.checked >= MIN_PROBES, "only {} probes", report.checked);
        assert!(
            report.max_rel_err < 1e-4,
            "max rel err {}",
            report.max_rel_err
        );
    }

    #[test]
    fn l1_gradients_match_away_from_ties() {
        let cfg = toy_model();
        let params = init_params(&cfg, &GraphConfig::default()).unwrap();
        let samples = toy_samples(&cfg);
        let refs: Vec<&PreparedSample> = samples.iter().collect();
        let report = grad_check(&cfg, &params, &refs, LossKind::L1, 1e-5).unwrap();
        assert!(
            report.max_rel_err < 1e-4,
            "max rel err {}",
            report.max_rel_err
        );
    }

    #[test]
    fn linear_hooks_make_central_differences_exact() {
        // Zero gates turn the message-passing layers into identities and
        // bypassing the nonlinearities leaves a loss quadratic in every
        // individual coordinate, so the two-point formula has no
        // truncation error even at a wide step.
        let mut cfg = toy_model();
        cfg.hooks.gate_override = Some(0.0);
        cfg.hooks.linear_paths = true;
        let params = init_params(&cfg, &GraphConfig::default()).unwrap();
        let samples = toy_samples(&cfg);
        let refs: Vec<&PreparedSample> = samples.iter().collect();
        let report = grad_check(&cfg, &params, &refs, LossKind::Mse, 1e-2).unwrap();
        assert!(
            report.max_rel_err < 1e-8,
            "max rel err {}",
            report.max_rel_err
        );
    }
}
