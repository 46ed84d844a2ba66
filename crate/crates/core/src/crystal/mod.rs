//! Periodic crystal graphs.
//!
//! A structure is a lattice (rows are lattice vectors in angstroms),
//! fractional coordinates, and a species list. [`neighbor_search`] finds
//! every pair within a cutoff across periodic images, [`encode_atom`] turns
//! an element into the 70-component property vector, and [`build_graph`]
//! assembles the full graph: node vectors, RBF-expanded inverse-distance
//! edge features, the three lattice-angle expansions per edge, and the
//! lattice self-edge features.
//!
//! Every feature depends on geometry only through interatomic distances and
//! angles against the lattice rows, so rotating or translating the Cartesian
//! frame leaves the graph unchanged.

mod atom_features;
mod graph;
mod la;
mod neighbors;
mod rbf;
mod structure;

pub use atom_features::{encode_atom, AtomFeatureVector, ATOM_FEATURE_DIM};
pub use graph::{angle_features, build_graph, edge_feature, CrystalGraph, GraphConfig, GraphEdge};
pub use neighbors::{brute_force_neighbors, neighbor_search, NeighborEdge};
pub use rbf::{overlap_gamma, rbf_expand, uniform_centers};
pub use structure::{frac_to_cart, parse_structure, CrystalStructure, StructureRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrystalError {
    #[error("structure {id}: lattice is singular (|det| = {det:.3e})")]
    BadLattice { id: String, det: f64 },
    #[error("structure {id}: unknown species {symbol:?}")]
    UnknownSpecies { id: String, symbol: String },
    #[error("structure {id}: {species} species but {coords} coordinate rows")]
    ShapeMismatch {
        id: String,
        species: usize,
        coords: usize,
    },
    #[error("structure {id} has no atoms")]
    EmptyStructure { id: String },
    #[error("structure {id}: non-finite fractional coordinate")]
    NonFiniteCoordinate { id: String },
    #[error("structure {id}: cannot bound periodic images for this lattice")]
    DegenerateLattice { id: String },
    #[error("{symbol}: attribute {attribute} has unusable value {value:?}")]
    BadAttributeValue {
        symbol: String,
        attribute: String,
        value: String,
    },
    #[error(transparent)]
    Element(#[from] crate::elementkg::ElementKgError),
}
