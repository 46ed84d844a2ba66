use std::collections::BTreeMap;

use super::skipgram::EmbeddingTable;
use super::EmbedError;

/// Stoichiometry-weighted mean of element embeddings, with the fractions
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionEmbedding {
    pub vector: Vec<f64>,
    /// (symbol, fraction) pairs sorted by symbol; fractions sum to 1.
    pub fractions: Vec<(String, f64)>,
}

/// Embeds a composition as `sum_i lambda_i e_i` where `lambda_i` is element
/// i's share of the atom count. Species repeats are merged and terms are
/// accumulated in symbol order, so any permutation of the input produces a
/// bit-identical vector.
pub fn composition_embedding(
    species: &[String],
    table: &EmbeddingTable,
) -> Result<CompositionEmbedding, EmbedError> {
    if species.is_empty() {
        return Err(EmbedError::EmptyComposition);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for symbol in species {
        *counts.entry(symbol.as_str()).or_insert(0) += 1;
    }
    let total = species.len() as f64;

    let mut vector = vec![0.0; table.dim()];
    let mut fractions = Vec::with_capacity(counts.len());
    for (symbol, count) in counts {
        let embedding = table
            .get(symbol)
            .ok_or_else(|| EmbedError::UnknownElement(symbol.to_string()))?;
        let lambda = count as f64 / total;
        for (acc, x) in vector.iter_mut().zip(embedding) {
            *acc += lambda * x;
        }
        fractions.push((symbol.to_string(), lambda));
    }
    Ok(CompositionEmbedding { vector, fractions })
}
