use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use crate::elementkg::ElementKg;
use crate::rng::stream;

/// Random-walk settings for structural documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct WalkConfig {
    pub walks_per_entity: usize,
    /// Number of hops; a full walk has `2 * depth + 1` tokens.
    pub depth: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_entity: 20,
            depth: 4,
            seed: 0,
        }
    }
}

/// Uniform random walks from every entity. Each document alternates entity
/// and relation tokens (`e0 r1 e1 ... r_d e_d`); a walk stops early at a
/// dead end, and an isolated entity yields a single-token document.
///
/// Each walk draws from its own PRNG stream derived from
/// `(seed, entity, walk index)`, so the corpus does not depend on iteration
/// or thread order.
pub fn structural_document(kg: &ElementKg, cfg: &WalkConfig) -> Corpus {
    let mut corpus = Corpus::new();
    for entity in 0..kg.entity_count() {
        for walk in 0..cfg.walks_per_entity {
            let mut rng = stream(cfg.seed, &[entity as u64, walk as u64]);
            let mut tokens = Vec::with_capacity(2 * cfg.depth + 1);
            let mut current = entity;
            tokens.push(kg.entity_label(current).to_string());
            for _ in 0..cfg.depth {
                let neighbors = kg.neighbors(current);
                if neighbors.is_empty() {
                    break;
                }
                let (relation, next) = neighbors[rng.gen_range(0..neighbors.len())];
                tokens.push(kg.relation_label(relation).to_string());
                tokens.push(kg.entity_label(next).to_string());
                current = next;
            }
            corpus.push_document(tokens);
        }
    }
    corpus
}

/// One sentence per triple: `subject predicate object`.
pub fn lexical_document(kg: &ElementKg) -> Corpus {
    let mut corpus = Corpus::new();
    for &(s, p, o) in kg.triples() {
        corpus.push_document(vec![
            kg.entity_label(s).to_string(),
            kg.relation_label(p).to_string(),
            kg.entity_label(o).to_string(),
        ]);
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elementkg::{build_kg, Triple};

    fn toy_kg() -> ElementKg {
        build_kg(&[
            Triple::new("Density2", "isDensityOf", "Na"),
            Triple::new("Group1", "isGroupOf", "Na"),
            Triple::new("Density2", "isDensityOf", "K"),
        ])
    }

    #[test]
    fn walks_alternate_entities_and_relations() {
        let kg = toy_kg();
        let cfg = WalkConfig {
            walks_per_entity: 5,
            depth: 3,
            seed: 11,
        };
        let corpus = structural_document(&kg, &cfg);
        assert_eq!(corpus.document_count(), kg.entity_count() * 5);
        for doc in corpus.documents() {
            assert!(doc.len() <= 2 * cfg.depth + 1);
            assert_eq!(doc.len() % 2, 1);
            for (i, token) in doc.iter().enumerate() {
                if i % 2 == 0 {
                    assert!(kg.entity_id(token).is_some(), "{token} should be an entity");
                } else {
                    assert!(token.starts_with("is"), "{token} should be a relation");
                }
            }
        }
    }

    #[test]
    fn depth_one_documents_have_at_most_three_tokens() {
        let kg = toy_kg();
        let cfg = WalkConfig {
            walks_per_entity: 3,
            depth: 1,
            seed: 0,
        };
        for doc in structural_document(&kg, &cfg).documents() {
            assert!(doc.len() <= 3);
        }
    }

    #[test]
    fn zero_depth_walks_are_single_tokens() {
        let kg = toy_kg();
        let corpus = structural_document(
            &kg,
            &WalkConfig {
                walks_per_entity: 1,
                depth: 0,
                seed: 1,
            },
        );
        assert_eq!(corpus.document_count(), kg.entity_count());
        for doc in corpus.documents() {
            assert_eq!(doc.len(), 1);
        }
    }

    #[test]
    fn same_seed_gives_identical_corpora() {
        let kg = toy_kg();
        let cfg = WalkConfig {
            walks_per_entity: 7,
            depth: 4,
            seed: 99,
        };
        assert_eq!(structural_document(&kg, &cfg), structural_document(&kg, &cfg));
        let other = WalkConfig { seed: 100, ..cfg };
        assert_ne!(structural_document(&kg, &cfg), structural_document(&kg, &other));
    }

    #[test]
    fn lexical_documents_cover_every_triple_once() {
        let kg = toy_kg();
        let corpus = lexical_document(&kg);
        assert_eq!(corpus.document_count(), 3);
        assert!(corpus
            .documents()
            .iter()
            .any(|d| d == &["Density2", "isDensityOf", "Na"]));
    }
}
