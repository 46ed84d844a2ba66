use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::EmbedError;

/// A token corpus: one document per entry, plus vocabulary counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: Vec<Vec<String>>,
    counts: BTreeMap<String, u64>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a document; empty documents are ignored.
    pub fn push_document(&mut self, tokens: Vec<String>) {
        if tokens.is_empty() {
            return;
        }
        for t in &tokens {
            *self.counts.entry(t.clone()).or_insert(0) += 1;
        }
        self.documents.push(tokens);
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn document_count(&self) -> usize {
        self.documents.len()
    }

    pub fn token_count(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Concatenates two corpora; vocabulary counts are summed.
pub fn merge_corpora(a: &Corpus, b: &Corpus) -> Corpus {
    let mut merged = a.clone();
    for doc in b.documents() {
        merged.push_document(doc.clone());
    }
    merged
}

/// One document per line, tokens separated by single spaces.
pub fn write_corpus<W: Write>(mut w: W, corpus: &Corpus) -> std::io::Result<()> {
    for doc in corpus.documents() {
        writeln!(w, "{}", doc.join(" "))?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Corpus, EmbedError> {
    let mut corpus = Corpus::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        corpus.push_document(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(corpus)
}
