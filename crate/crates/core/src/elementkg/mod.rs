//! Element attribute table and the knowledge graph built from it.
//!
//! Continuous attributes are discretized into equal-width bins and rendered as
//! labeled entities (`Density3`), categorical attributes as labeled values
//! (`BlockS`). Each attribute value yields one triple
//! `(label, is<Attribute>Of, element)`, and the triples form an undirected
//! co-occurrence graph over elements, attribute labels, and relations.

mod discretize;
mod graph;
mod table;
mod triples;

pub use discretize::{default_rules, discretize, Binned, DiscretizationRule};
pub use graph::{build_kg, ElementKg};
pub use table::{
    bundled_table, AttributeKind, AttributeSchema, AttributeValue, ElementRecord, ElementTable,
    MAX_ATOMIC_NUMBER, MIN_ATTRIBUTES,
};
pub use triples::{build_triples, read_triples, write_triples, Triple};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElementKgError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("duplicate symbol {0}")]
    DuplicateSymbol(String),
    #[error("duplicate atomic number {0}")]
    DuplicateAtomicNumber(u8),
    #[error("element {symbol} has atomic number {atomic_number} outside the supported range 1..={max}", max = MAX_ATOMIC_NUMBER)]
    OutOfSupportedRange { symbol: String, atomic_number: u32 },
    #[error("element {symbol} is missing attribute {attribute}")]
    MissingAttribute { symbol: String, attribute: String },
    #[error("attribute {attribute}: expected unit {expected}, found {found}")]
    UnitMismatch {
        attribute: String,
        expected: String,
        found: String,
    },
    #[error("attribute {attribute} of {symbol} is not finite")]
    NonFiniteValue { symbol: String, attribute: String },
    #[error("table has {found} attributes, need at least {need}")]
    TooFewAttributes { found: usize, need: usize },
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("value for {attribute} is non-finite")]
    NonFiniteInput { attribute: String },
}
