use serde::{Deserialize, Serialize};

use super::atom_features::{encode_atom, AtomFeatureVector};
use super::la::{dot3, norm3};
use super::neighbors::neighbor_search;
use super::rbf::{overlap_gamma, rbf_expand, uniform_centers};
use super::structure::CrystalStructure;
use super::CrystalError;
use crate::elementkg::ElementTable;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GraphConfig {
    /// Neighbor cutoff in angstroms.
    pub cutoff: f64,
    /// Minimum outgoing edges per node before the cutoff stops expanding.
    pub min_neighbors: usize,
    /// RBF centers for the inverse-distance edge expansion.
    pub edge_centers: usize,
    /// Inverse-distance axis range covered by the edge centers.
    pub edge_range: [f64; 2],
    /// RBF centers for each cosine expansion (axis is [-1, 1]).
    pub angle_centers: usize,
    /// The constant c in c/distance, in angstroms.
    pub length_scale: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            cutoff: 8.0,
            min_neighbors: 12,
            edge_centers: 64,
            edge_range: [0.0, 1.5],
            angle_centers: 10,
            length_scale: 1.0,
        }
    }
}

impl GraphConfig {
    fn edge_basis(&self) -> (Vec<f64>, f64) {
        let centers = uniform_centers(self.edge_centers, self.edge_range[0], self.edge_range[1]);
        let gamma = overlap_gamma(&centers);
        (centers, gamma)
    }

    fn angle_basis(&self) -> (Vec<f64>, f64) {
        let centers = uniform_centers(self.angle_centers, -1.0, 1.0);
        let gamma = overlap_gamma(&centers);
        (centers, gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub image: [i32; 3],
    pub distance: f64,
    /// RBF expansion of length_scale/distance.
    pub edge_feat: Vec<f64>,
    /// Cosine expansions against the three lattice rows.
    pub angle_feats: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalGraph {
    pub id: String,
    pub species: Vec<String>,
    pub node_features: Vec<AtomFeatureVector>,
    pub edges: Vec<GraphEdge>,
    /// Edge expansion of each lattice row's own length (the lattice
    /// self-edges).
    pub lattice_feats: [Vec<f64>; 3],
    /// (symbol, fraction of atom count), sorted by symbol.
    pub composition: Vec<(String, f64)>,
    /// Width of each cosine expansion; kept on the graph so edgeless
    /// graphs still know their angular basis size.
    pub angle_centers: usize,
    /// Cutoff after any adaptive expansion.
    pub effective_cutoff: f64,
}

impl CrystalGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Componentwise mean of the node vectors.
    pub fn mean_node_feature(&self) -> Vec<f64> {
        let n = self.node_features.len().max(1);
        let dim = self.node_features.first().map_or(0, |v| v.len());
        let mut mean = vec![0.0; dim];
        for v in &self.node_features {
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        mean
    }
}

/// RBF expansion of length_scale/distance over the edge basis.
pub fn edge_feature(distance: f64, cfg: &GraphConfig) -> Vec<f64> {
    assert!(distance > 0.0, "edge distance must be positive");
    let (centers, gamma) = cfg.edge_basis();
    rbf_expand(cfg.length_scale / distance, &centers, gamma)
}

/// For each lattice row, the cosine of the angle it makes with `vector`,
/// expanded over the angle basis.
pub fn angle_features(
    vector: &[f64; 3],
    lattice: &[[f64; 3]; 3],
    cfg: &GraphConfig,
) -> [Vec<f64>; 3] {
    let (centers, gamma) = cfg.angle_basis();
    let vn = norm3(vector);
    assert!(vn > 0.0, "edge vector must be nonzero");
    let mut out: [Vec<f64>; 3] = Default::default();
    for k in 0..3 {
        let row = &lattice[k];
        let cos = dot3(vector, row) / (vn * norm3(row));
        out[k] = rbf_expand(cos.clamp(-1.0, 1.0), &centers, gamma);
    }
    out
}

fn composition_summary(species: &[String]) -> Vec<(String, f64)> {
    let mut counts = std::collections::BTreeMap::new();
    for s in species {
        *counts.entry(s.clone()).or_insert(0u64) += 1;
    }
    let total = species.len() as f64;
    counts
        .into_iter()
        .map(|(s, c)| (s, c as f64 / total))
        .collect()
}

pub fn build_graph(
    structure: &CrystalStructure,
    table: &ElementTable,
    cfg: &GraphConfig,
) -> Result<CrystalGraph, CrystalError> {
    let node_features = structure
        .species
        .iter()
        .map(|s| encode_atom(s, table))
        .collect::<Result<Vec<_>, _>>()?;

    let (neighbors, effective_cutoff) =
        neighbor_search(structure, cfg.cutoff, cfg.min_neighbors)?;
    let edges = neighbors
        .into_iter()
        .map(|e| GraphEdge {
            src: e.src,
            dst: e.dst,
            image: e.image,
            distance: e.distance,
            edge_feat: edge_feature(e.distance, cfg),
            angle_feats: angle_features(&e.vector, &structure.lattice, cfg),
        })
        .collect();

    let lattice_feats = [
        edge_feature(norm3(&structure.lattice[0]), cfg),
        edge_feature(norm3(&structure.lattice[1]), cfg),
        edge_feature(norm3(&structure.lattice[2]), cfg),
    ];

    Ok(CrystalGraph {
        id: structure.id.clone(),
        species: structure.species.clone(),
        node_features,
        edges,
        lattice_feats,
        composition: composition_summary(&structure.species),
        angle_centers: cfg.angle_centers,
        effective_cutoff,
    })
}
