use std::collections::BTreeMap;

use super::triples::Triple;

/// The element knowledge graph: interned entities and relations plus an
/// adjacency list stored in both directions, so walks can traverse a triple
/// from either end.
#[derive(Debug, Clone)]
pub struct ElementKg {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: BTreeMap<String, usize>,
    /// Per entity: sorted, deduplicated `(relation, neighbor)` pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Canonical directed triples `(subject, predicate, object)` by id,
    /// deduplicated and sorted.
    triples: Vec<(usize, usize, usize)>,
}

/// Builds the graph from triples. Duplicate triples collapse to one edge.
pub fn build_kg(triples: &[Triple]) -> ElementKg {
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut entity_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut relation_ids: BTreeMap<String, usize> = BTreeMap::new();

    let mut intern_entity = |label: &str, entities: &mut Vec<String>| {
        *entity_ids.entry(label.to_string()).or_insert_with(|| {
            entities.push(label.to_string());
            entities.len() - 1
        })
    };

    let mut id_triples = Vec::with_capacity(triples.len());
    for t in triples {
        let s = intern_entity(&t.subject, &mut entities);
        let o = intern_entity(&t.object, &mut entities);
        let p = *relation_ids.entry(t.predicate.clone()).or_insert_with(|| {
            relations.push(t.predicate.clone());
            relations.len() - 1
        });
        id_triples.push((s, p, o));
    }
    id_triples.sort_unstable();
    id_triples.dedup();

    let mut adjacency = vec![Vec::new(); entities.len()];
    for &(s, p, o) in &id_triples {
        adjacency[s].push((p, o));
        adjacency[o].push((p, s));
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }

    ElementKg {
        entities,
        relations,
        entity_ids,
        adjacency,
        triples: id_triples,
    }
}

impl ElementKg {
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_label(&self, id: usize) -> &str {
        &self.entities[id]
    }

    pub fn relation_label(&self, id: usize) -> &str {
        &self.relations[id]
    }

    pub fn entity_id(&self, label: &str) -> Option<usize> {
        self.entity_ids.get(label).copied()
    }

    pub fn neighbors(&self, entity: usize) -> &[(usize, usize)] {
        &self.adjacency[entity]
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }
}
