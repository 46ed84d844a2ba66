use std::collections::BTreeMap;

use super::config::{LossKind, ModelConfig, ModelError};
use super::params::Parameters;
use super::tape::{Tape, Tensor, Var};
use crate::crystal::CrystalGraph;
use crate::kgembed::{composition_embedding, EmbeddingTable};

const LN_EPS: f64 = 1e-5;

/// A crystal graph flattened into the tensors the model consumes, plus the
/// regression target when known.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub id: String,
    /// n x 70, or n x (70 + d1) in ablation mode.
    pub node_features: Tensor,
    /// m x edge_centers.
    pub edge_features: Tensor,
    /// Three m x angle_centers expansions.
    pub angle_features: [Tensor; 3],
    /// Three 1 x edge_centers lattice self-edge expansions.
    pub lattice_features: [Tensor; 3],
    /// Receiving node per edge.
    pub centers: Vec<usize>,
    /// Neighboring node per edge.
    pub neighbors: Vec<usize>,
    /// 1 x d1 composition embedding; absent in ablation mode.
    pub composition_embedding: Option<Tensor>,
    pub target: Option<f64>,
}

impl PreparedSample {
    pub fn num_nodes(&self) -> usize {
        self.node_features.rows
    }

    pub fn num_edges(&self) -> usize {
        self.centers.len()
    }
}

/// Node features for ablation mode: each 70-dim vector with the element's
/// knowledge-graph embedding appended.
pub fn ablation_node_features(
    graph: &CrystalGraph,
    embeddings: &EmbeddingTable,
) -> Result<Tensor, ModelError> {
    let dim = embeddings.dim();
    let base = graph.node_features.first().map_or(0, |v| v.len());
    let mut out = Tensor::zeros(graph.num_nodes(), base + dim);
    for (i, (feat, symbol)) in graph.node_features.iter().zip(&graph.species).enumerate() {
        let e = embeddings
            .get(symbol)
            .ok_or_else(|| crate::kgembed::EmbedError::UnknownElement(symbol.clone()))?;
        let row = &mut out.data[i * (base + dim)..(i + 1) * (base + dim)];
        row[..base].copy_from_slice(&feat.values);
        row[base..].copy_from_slice(e);
    }
    Ok(out)
}

/// Flattens a crystal graph into model inputs. Full mode computes the
/// composition embedding; ablation mode widens the node features instead.
/// Both need the embedding table.
pub fn prepare_sample(
    graph: &CrystalGraph,
    embeddings: Option<&EmbeddingTable>,
    cfg: &ModelConfig,
    target: Option<f64>,
) -> Result<PreparedSample, ModelError> {
    let embeddings = embeddings.ok_or(ModelError::MissingEmbeddings)?;
    if embeddings.dim() != cfg.kg_embed_dim {
        return Err(ModelError::DimensionMismatch {
            what: "element embedding".into(),
            expected: cfg.kg_embed_dim,
            found: embeddings.dim(),
        });
    }

    let (node_features, composition) = if cfg.ablation() {
        (ablation_node_features(graph, embeddings)?, None)
    } else {
        let nodes = Tensor::from_rows(
            graph
                .node_features
                .iter()
                .map(|v| v.values.clone())
                .collect(),
        );
        let he = composition_embedding(&graph.species, embeddings)?;
        (nodes, Some(Tensor::row_vector(he.vector)))
    };

    let m = graph.num_edges();
    let edge_dim = graph.lattice_feats[0].len();
    let mut edge_features = Tensor::zeros(m, edge_dim);
    let angle_dim = graph.angle_centers;
    let mut angle_features = [
        Tensor::zeros(m, angle_dim),
        Tensor::zeros(m, angle_dim),
        Tensor::zeros(m, angle_dim),
    ];
    let mut centers = Vec::with_capacity(m);
    let mut neighbors = Vec::with_capacity(m);
    for (r, e) in graph.edges.iter().enumerate() {
        edge_features.data[r * edge_dim..(r + 1) * edge_dim].copy_from_slice(&e.edge_feat);
        for k in 0..3 {
            angle_features[k].data[r * angle_dim..(r + 1) * angle_dim]
                .copy_from_slice(&e.angle_feats[k]);
        }
        centers.push(e.src);
        neighbors.push(e.dst);
    }
    let lattice_features = [
        Tensor::row_vector(graph.lattice_feats[0].clone()),
        Tensor::row_vector(graph.lattice_feats[1].clone()),
        Tensor::row_vector(graph.lattice_feats[2].clone()),
    ];

    Ok(PreparedSample {
        id: graph.id.clone(),
        node_features,
        edge_features,
        angle_features,
        lattice_features,
        centers,
        neighbors,
        composition_embedding: composition,
        target,
    })
}

fn var(vars: &BTreeMap<String, Var>, name: &str) -> Var {
    *vars
        .get(name)
        .unwrap_or_else(|| panic!("parameter {name:?} not bound"))
}

/// Loads every parameter tensor onto the tape once; the returned map lets a
/// whole batch share the same leaves so gradients accumulate across samples.
pub fn bind_params(tape: &mut Tape, params: &Parameters) -> BTreeMap<String, Var> {
    params
        .tensors
        .iter()
        .map(|(name, tensor)| (name.clone(), tape.leaf(tensor.clone())))
        .collect()
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Var {
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

fn layer_norm(tape: &mut Tape, x: Var, g: Var, b: Var, cfg: &ModelConfig) -> Var {
    if cfg.hooks.linear_paths {
        return x;
    }
    let mean = tape.row_mean(x);
    let centered = tape.sub_col(x, mean);
    let sq = tape.mul(centered, centered);
    let variance = tape.row_mean(sq);
    let rstd = tape.rsqrt_eps(variance, LN_EPS);
    let normed = tape.mul_col(centered, rstd);
    let scaled = tape.mul_row(normed, g);
    tape.add_row(scaled, b)
}

/// Sigmoid attention gate over per-head scores, or the hook constant.
fn gate(tape: &mut Tape, cfg: &ModelConfig, rows: usize, scores: Option<Var>) -> Var {
    match cfg.hooks.gate_override {
        Some(c) => {
            let mut t = Tensor::zeros(rows, cfg.num_heads);
            t.data.fill(c);
            tape.leaf(t)
        }
        None => {
            let s = scores.expect("scores required without gate override");
            let scaled = tape.scale(s, 1.0 / (cfg.head_dim() as f64).sqrt());
            tape.sigmoid(scaled)
        }
    }
}

/// Message passing into nodes: each edge gates a value built from the
/// neighbor state and the edge state, messages sum at the receiving node,
/// and a bias-free projection forms the residual update. Nodes with no
/// edges pass through unchanged.
fn node_wise_layer(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &ModelConfig,
    x: Var,
    e: Var,
    centers: &[usize],
    neighbors: &[usize],
) -> Var {
    let n = tape.value(x).rows;
    let ln = layer_norm(
        tape,
        x,
        var(vars, &format!("{prefix}.ln.g")),
        var(vars, &format!("{prefix}.ln.b")),
        cfg,
    );
    let values = linear(
        tape,
        ln,
        var(vars, &format!("{prefix}.v.w")),
        var(vars, &format!("{prefix}.v.b")),
    );
    let value_j = tape.gather(values, neighbors);
    let edge_v = tape.matmul(e, var(vars, &format!("{prefix}.ev.w")));
    let value = tape.add(value_j, edge_v);

    let scores = if cfg.hooks.gate_override.is_some() {
        None
    } else {
        let q = linear(
            tape,
            ln,
            var(vars, &format!("{prefix}.q.w")),
            var(vars, &format!("{prefix}.q.b")),
        );
        let k = linear(
            tape,
            ln,
            var(vars, &format!("{prefix}.k.w")),
            var(vars, &format!("{prefix}.k.b")),
        );
        let q_i = tape.gather(q, centers);
        let k_j = tape.gather(k, neighbors);
        let edge_k = tape.matmul(e, var(vars, &format!("{prefix}.ek.w")));
        let key = tape.add(k_j, edge_k);
        Some(tape.head_dot(q_i, key, cfg.num_heads))
    };
    let g = gate(tape, cfg, centers.len(), scores);
    let messages = tape.mul_head(g, value, cfg.num_heads);
    let pooled = tape.scatter_add(messages, centers, n);
    let update = tape.matmul(pooled, var(vars, &format!("{prefix}.out.w")));
    tape.add(x, update)
}

/// Edge refinement: three channels, one per lattice direction, each mixing
/// that direction's angle expansion with the lattice self-edge state.
fn edge_wise_layer(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &ModelConfig,
    e: Var,
    angles: &[Var; 3],
    lattice: &[Var; 3],
) -> Var {
    let m = tape.value(e).rows;
    let ln = layer_norm(
        tape,
        e,
        var(vars, &format!("{prefix}.ln.g")),
        var(vars, &format!("{prefix}.ln.b")),
        cfg,
    );
    let q = if cfg.hooks.gate_override.is_some() {
        None
    } else {
        Some(linear(
            tape,
            ln,
            var(vars, &format!("{prefix}.q.w")),
            var(vars, &format!("{prefix}.q.b")),
        ))
    };

    let mut total: Option<Var> = None;
    for k in 0..3 {
        let channel = tape.add_row(angles[k], lattice[k]);
        let value = tape.matmul(channel, var(vars, &format!("{prefix}.v{k}.w")));
        let scores = q.map(|qv| {
            let key = tape.matmul(channel, var(vars, &format!("{prefix}.k{k}.w")));
            tape.head_dot(qv, key, cfg.num_heads)
        });
        let g = gate(tape, cfg, m, scores);
        let msg = tape.mul_head(g, value, cfg.num_heads);
        total = Some(match total {
            Some(t) => tape.add(t, msg),
            None => msg,
        });
    }
    let update = tape.matmul(total.expect("three channels"), var(vars, &format!("{prefix}.out.w")));
    tape.add(e, update)
}

/// One fused-state transformer layer. The state is a single token, so
/// attention collapses to its value path; the feed-forward half is a
/// standard pre-norm SiLU block.
fn fusion_layer(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &ModelConfig,
    h: Var,
) -> Var {
    let ln1 = layer_norm(
        tape,
        h,
        var(vars, &format!("{prefix}.ln1.g")),
        var(vars, &format!("{prefix}.ln1.b")),
        cfg,
    );
    let value = linear(
        tape,
        ln1,
        var(vars, &format!("{prefix}.v.w")),
        var(vars, &format!("{prefix}.v.b")),
    );
    let attn = linear(
        tape,
        value,
        var(vars, &format!("{prefix}.out.w")),
        var(vars, &format!("{prefix}.out.b")),
    );
    let h = tape.add(h, attn);

    let ln2 = layer_norm(
        tape,
        h,
        var(vars, &format!("{prefix}.ln2.g")),
        var(vars, &format!("{prefix}.ln2.b")),
        cfg,
    );
    let hidden = linear(
        tape,
        ln2,
        var(vars, &format!("{prefix}.ffn1.w")),
        var(vars, &format!("{prefix}.ffn1.b")),
    );
    let act = if cfg.hooks.linear_paths {
        hidden
    } else {
        tape.silu(hidden)
    };
    let out = linear(
        tape,
        act,
        var(vars, &format!("{prefix}.ffn2.w")),
        var(vars, &format!("{prefix}.ffn2.b")),
    );
    tape.add(h, out)
}

/// Builds the whole forward graph for one sample and returns the scalar
/// prediction variable.
pub fn forward(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    cfg: &ModelConfig,
    sample: &PreparedSample,
) -> Result<Var, ModelError> {
    let lift_rows = tape.value(var(vars, "lift.node.w")).rows;
    if sample.node_features.cols != lift_rows {
        return Err(ModelError::DimensionMismatch {
            what: format!("node features of {}", sample.id),
            expected: lift_rows,
            found: sample.node_features.cols,
        });
    }

    let nodes_in = tape.leaf(sample.node_features.clone());
    let mut x = linear(tape, nodes_in, var(vars, "lift.node.w"), var(vars, "lift.node.b"));

    let edges_in = tape.leaf(sample.edge_features.clone());
    let mut e = linear(tape, edges_in, var(vars, "lift.edge.w"), var(vars, "lift.edge.b"));

    let mut angles: [Var; 3] = [x; 3];
    let mut lattice: [Var; 3] = [x; 3];
    for k in 0..3 {
        let a_in = tape.leaf(sample.angle_features[k].clone());
        angles[k] = linear(
            tape,
            a_in,
            var(vars, &format!("lift.angle{k}.w")),
            var(vars, &format!("lift.angle{k}.b")),
        );
        let l_in = tape.leaf(sample.lattice_features[k].clone());
        lattice[k] = linear(tape, l_in, var(vars, "lift.edge.w"), var(vars, "lift.edge.b"));
    }

    // First node pass on lifted inputs, then edge refinement, then the
    // remaining node passes consume the refined edge states.
    x = node_wise_layer(tape, vars, "node0", cfg, x, e, &sample.centers, &sample.neighbors);
    for i in 0..cfg.num_edge_layers {
        e = edge_wise_layer(tape, vars, &format!("edge{i}"), cfg, e, &angles, &lattice);
    }
    for i in 1..cfg.num_node_layers {
        x = node_wise_layer(
            tape,
            vars,
            &format!("node{i}"),
            cfg,
            x,
            e,
            &sample.centers,
            &sample.neighbors,
        );
    }

    let h_g = tape.col_mean(x);
    let mut h = if cfg.ablation() {
        tape.scale(h_g, cfg.beta)
    } else {
        let he = sample
            .composition_embedding
            .as_ref()
            .ok_or(ModelError::MissingEmbeddings)?;
        let he_in = tape.leaf(he.clone());
        let projected = linear(tape, he_in, var(vars, "he.proj.w"), var(vars, "he.proj.b"));
        let a = tape.scale(projected, cfg.alpha);
        let b = tape.scale(h_g, cfg.beta);
        tape.add(a, b)
    };

    for i in 0..cfg.num_fusion_layers {
        h = fusion_layer(tape, vars, &format!("fusion{i}"), cfg, h);
    }
    Ok(linear(tape, h, var(vars, "head.w"), var(vars, "head.b")))
}

/// Runs the forward pass alone and returns the scalar prediction.
pub fn predict_value(
    cfg: &ModelConfig,
    params: &Parameters,
    sample: &PreparedSample,
) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params);
    let pred = forward(&mut tape, &vars, cfg, sample)?;
    let y = tape.value(pred).scalar();
    if !y.is_finite() {
        return Err(ModelError::NonFinite {
            context: format!("prediction for {}", sample.id),
        });
    }
    Ok(y)
}

/// Forward-only mean loss over a batch; the finite-difference gradient
/// check calls this many times with perturbed parameters.
pub fn batch_mean_loss(
    cfg: &ModelConfig,
    params: &Parameters,
    samples: &[&PreparedSample],
    kind: LossKind,
) -> Result<f64, ModelError> {
    assert!(!samples.is_empty(), "empty batch");
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params);
    let mut total = 0.0;
    for sample in samples {
        let target = sample.target.ok_or_else(|| ModelError::MissingTarget {
            id: sample.id.clone(),
            target: "regression target".into(),
        })?;
        let pred = forward(&mut tape, &vars, cfg, sample)?;
        let (l, _) = super::loss_and_grad(tape.value(pred).scalar(), target, kind);
        total += l;
    }
    Ok(total / samples.len() as f64)
}

pub struct BatchGrads {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Per-sample predictions in input order.
    pub predictions: Vec<f64>,
    /// Gradient of the mean loss for every parameter tensor.
    pub grads: BTreeMap<String, Tensor>,
}

/// Forward + backward over a batch that shares one set of parameter leaves.
/// The loss is the mean of per-sample losses, so gradients are averaged.
pub fn batch_loss_grads(
    cfg: &ModelConfig,
    params: &Parameters,
    samples: &[&PreparedSample],
    kind: LossKind,
) -> Result<BatchGrads, ModelError> {
    assert!(!samples.is_empty(), "empty batch");
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params);
    let inv = 1.0 / samples.len() as f64;
    let mut predictions = Vec::with_capacity(samples.len());
    let mut total: Option<Var> = None;
    for sample in samples {
        let target = sample.target.ok_or_else(|| ModelError::MissingTarget {
            id: sample.id.clone(),
            target: "regression target".into(),
        })?;
        let pred = forward(&mut tape, &vars, cfg, sample)?;
        predictions.push(tape.value(pred).scalar());
        let loss = tape.loss(pred, target, kind);
        let scaled = tape.scale(loss, inv);
        total = Some(match total {
            Some(t) => tape.add(t, scaled),
            None => scaled,
        });
    }
    let total = total.expect("non-empty batch");
    let loss = tape.value(total).scalar();
    if !loss.is_finite() || predictions.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFinite {
            context: "batch loss".into(),
        });
    }
    let grads_by_var = tape.backward(total);
    let grads = vars
        .iter()
        .map(|(name, v)| (name.clone(), tape.grad_of(&grads_by_var, *v)))
        .collect();
    Ok(BatchGrads {
        loss,
        predictions,
        grads,
    })
}
