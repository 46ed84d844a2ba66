//! Core library for crystal property prediction from fused element-knowledge
//! and crystal-structure representations.
//!
//! The pieces, in pipeline order:
//!
//! * [`elementkg`]: loads the bundled element attribute table, discretizes
//!   continuous attributes into labeled bins, and builds a knowledge graph of
//!   (attribute, relation, element) triples.
//! * [`kgembed`]: turns the knowledge graph into random-walk and lexical
//!   corpora, trains skip-gram embeddings with negative sampling, and forms
//!   per-composition embeddings as weighted sums of element vectors.
//! * [`crystal`]: parses periodic structures, finds neighbors under periodic
//!   boundary conditions, and assembles invariant crystal graphs with a
//!   70-dimensional atom encoding plus radial and angular edge features.
//! * [`model`]: a graph transformer over those crystal graphs fused with the
//!   composition embedding, trained with Adam on double precision end to end,
//!   with finite-difference gradient verification built in.
//! * [`pipeline`]: dataset loading, splits, metrics, stage orchestration, and
//!   the run manifest used by the command line front end.

pub mod crystal;
pub mod elementkg;
pub mod kgembed;
pub mod model;
pub mod pipeline;
pub mod rng;

pub use crystal::{
    brute_force_neighbors, build_graph, encode_atom, frac_to_cart, neighbor_search,
    parse_structure, AtomFeatureVector, CrystalGraph, CrystalStructure, GraphConfig,
    NeighborEdge, StructureRecord, ATOM_FEATURE_DIM,
};
pub use elementkg::{
    build_kg, build_triples, discretize, DiscretizationRule, ElementKg, ElementRecord,
    ElementTable, Triple,
};
pub use kgembed::{
    composition_embedding, lexical_document, merge_corpora, structural_document,
    train_skipgram, CompositionEmbedding, Corpus, EmbeddingTable, SkipGramConfig, WalkConfig,
};
pub use model::{
    adam_step, grad_check, init_params, loss_and_grad, train_loop, Checkpoint, CheckpointMeta,
    LossKind, ModelConfig, Parameters, PreparedSample, TrainConfig,
};
pub use pipeline::{
    load_dataset, mae, run_pipeline, split_dataset, DatasetRecord, Manifest, RunConfig,
    SplitSpec,
};
