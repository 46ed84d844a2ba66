use std::io::{BufRead, Write};

use super::discretize::{discretize, DiscretizationRule};
use super::table::{AttributeValue, ElementTable};
use super::ElementKgError;

/// One knowledge-graph statement, e.g. `(Density2, isDensityOf, Na)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
        }
    }
}

/// Renders the entity label for an attribute value: continuous attributes use
/// the bin index (`Density2`), categorical ones the camel-cased value
/// (`CategoryAlkaliMetal`).
fn value_label(
    attribute: &str,
    value: &AttributeValue,
    rules: &[DiscretizationRule],
) -> Result<(String, bool), ElementKgError> {
    match value {
        AttributeValue::Number(x) => {
            let rule = rules
                .iter()
                .find(|r| r.attribute == attribute)
                .ok_or_else(|| ElementKgError::UnknownAttribute(attribute.to_string()))?;
            let binned = discretize(*x, rule)?;
            Ok((format!("{attribute}{}", binned.index), binned.clamped))
        }
        AttributeValue::Label(s) => Ok((format!("{attribute}{}", camel(s)), false)),
    }
}

fn camel(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut upper = true;
    for c in value.chars() {
        if c == '-' || c == '_' || c == ' ' {
            upper = true;
        } else if upper {
            out.extend(c.to_uppercase());
            upper = false;
        } else {
            out.push(c);
        }
    }
    out
}

fn predicate_for(attribute: &str) -> String {
    format!("is{attribute}Of")
}

/// Builds one triple per (element, attribute): `(label, is<Attr>Of, symbol)`.
/// Output order is by atomic number, then schema attribute order, so the
/// serialized form is stable for identical inputs.
pub fn build_triples(
    table: &ElementTable,
    rules: &[DiscretizationRule],
) -> Result<Vec<Triple>, ElementKgError> {
    let mut triples = Vec::with_capacity(table.len() * table.schema().len());
    for record in table.records() {
        for schema in table.schema() {
            let value = record.attributes.get(&schema.name).ok_or_else(|| {
                ElementKgError::MissingAttribute {
                    symbol: record.symbol.clone(),
                    attribute: schema.name.clone(),
                }
            })?;
            let (label, _clamped) = value_label(&schema.name, value, rules)?;
            triples.push(Triple {
                subject: label,
                predicate: predicate_for(&schema.name),
                object: record.symbol.clone(),
            });
        }
    }
    Ok(triples)
}

/// Writes triples as `subject<TAB>predicate<TAB>object` lines.
pub fn write_triples<W: Write>(mut w: W, triples: &[Triple]) -> std::io::Result<()> {
    for t in triples {
        writeln!(w, "{}\t{}\t{}", t.subject, t.predicate, t.object)?;
    }
    Ok(())
}

pub fn read_triples<R: BufRead>(r: R) -> Result<Vec<Triple>, ElementKgError> {
    let mut triples = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(p), Some(o), None) => triples.push(Triple::new(s, p, o)),
            _ => {
                return Err(ElementKgError::Parse {
                    line: no + 1,
                    message: "expected subject\\tpredicate\\tobject".into(),
                })
            }
        }
    }
    Ok(triples)
}
