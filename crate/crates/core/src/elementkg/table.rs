use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use super::ElementKgError;

/// Highest atomic number the toolkit supports.
pub const MAX_ATOMIC_NUMBER: u8 = 103;

/// Every element record must carry at least this many attributes.
pub const MIN_ATTRIBUTES: usize = 15;

const BUNDLED_TSV: &str = include_str!("../../data/element_table.tsv");

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeKind {
    /// Range observed over the loaded table; bin edges derive from it.
    Continuous { min: f64, max: f64 },
    /// Distinct labels observed over the loaded table, sorted.
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    pub name: String,
    pub unit: Option<String>,
    pub kind: AttributeKind,
}

impl AttributeSchema {
    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, AttributeKind::Continuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone)]
pub struct ElementRecord {
    pub symbol: String,
    pub atomic_number: u8,
    pub attributes: BTreeMap<String, AttributeValue>,
}

impl ElementRecord {
    /// Numeric attribute lookup; errors if absent or categorical.
    pub fn number(&self, attribute: &str) -> Result<f64, ElementKgError> {
        match self.attributes.get(attribute) {
            Some(AttributeValue::Number(x)) => Ok(*x),
            _ => Err(ElementKgError::MissingAttribute {
                symbol: self.symbol.clone(),
                attribute: attribute.to_string(),
            }),
        }
    }

    /// Categorical attribute lookup; errors if absent or numeric.
    pub fn label(&self, attribute: &str) -> Result<&str, ElementKgError> {
        match self.attributes.get(attribute) {
            Some(AttributeValue::Label(s)) => Ok(s),
            _ => Err(ElementKgError::MissingAttribute {
                symbol: self.symbol.clone(),
                attribute: attribute.to_string(),
            }),
        }
    }
}

/// The element attribute table: one record per element plus the schema
/// inferred from the header and data.
#[derive(Debug, Clone, Default)]
pub struct ElementTable {
    records: Vec<ElementRecord>,
    schema: Vec<AttributeSchema>,
    by_symbol: BTreeMap<String, usize>,
}

impl ElementTable {
    pub fn load(path: &Path) -> Result<Self, ElementKgError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses a tab-separated table. The first header column is `symbol`, the
    /// second `atomic_number`; the rest are `Name|unit|kind` cells with kind
    /// `continuous` or `categorical`. Lines starting with `#` are comments.
    /// An empty input yields an empty table with an empty schema.
    pub fn parse(text: &str) -> Result<Self, ElementKgError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

        let Some((header_no, header)) = lines.next() else {
            return Ok(Self::default());
        };
        let columns = parse_header(header_no + 1, header)?;

        let mut records: Vec<ElementRecord> = Vec::new();
        let mut by_symbol = BTreeMap::new();
        let mut seen_z = std::collections::BTreeSet::new();
        for (no, line) in lines {
            let record = parse_row(no + 1, line, &columns)?;
            if by_symbol.contains_key(&record.symbol) {
                return Err(ElementKgError::DuplicateSymbol(record.symbol));
            }
            if !seen_z.insert(record.atomic_number) {
                return Err(ElementKgError::DuplicateAtomicNumber(record.atomic_number));
            }
            by_symbol.insert(record.symbol.clone(), records.len());
            records.push(record);
        }

        if !records.is_empty() && columns.len() < MIN_ATTRIBUTES {
            return Err(ElementKgError::TooFewAttributes {
                found: columns.len(),
                need: MIN_ATTRIBUTES,
            });
        }

        records.sort_by_key(|r| r.atomic_number);
        let by_symbol = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.symbol.clone(), i))
            .collect();
        let schema = infer_schema(&columns, &records)?;
        Ok(Self {
            records,
            schema,
            by_symbol,
        })
    }

    pub fn records(&self) -> &[ElementRecord] {
        &self.records
    }

    pub fn schema(&self) -> &[AttributeSchema] {
        &self.schema
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSchema> {
        self.schema.iter().find(|s| s.name == name)
    }

    pub fn get(&self, symbol: &str) -> Option<&ElementRecord> {
        self.by_symbol.get(symbol).map(|&i| &self.records[i])
    }

    pub fn require(&self, symbol: &str) -> Result<&ElementRecord, ElementKgError> {
        self.get(symbol)
            .ok_or_else(|| ElementKgError::UnknownElement(symbol.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Atomic numbers in `1..=MAX_ATOMIC_NUMBER` that the table does not cover.
    pub fn missing_atomic_numbers(&self) -> Vec<u8> {
        let present: std::collections::BTreeSet<u8> =
            self.records.iter().map(|r| r.atomic_number).collect();
        (1..=MAX_ATOMIC_NUMBER)
            .filter(|z| !present.contains(z))
            .collect()
    }
}

/// The table shipped with the crate (Z = 1..=103, 15 attributes).
pub fn bundled_table() -> &'static ElementTable {
    static TABLE: OnceLock<ElementTable> = OnceLock::new();
    TABLE.get_or_init(|| ElementTable::parse(BUNDLED_TSV).expect("bundled element table parses"))
}

struct Column {
    name: String,
    unit: Option<String>,
    continuous: bool,
}

fn parse_header(line_no: usize, header: &str) -> Result<Vec<Column>, ElementKgError> {
    let cells: Vec<&str> = header.split('\t').collect();
    if cells.len() < 2 || cells[0] != "symbol" || cells[1] != "atomic_number" {
        return Err(ElementKgError::Parse {
            line: line_no,
            message: "header must start with 'symbol\\tatomic_number'".into(),
        });
    }
    let mut columns = Vec::new();
    let mut names = std::collections::BTreeSet::new();
    for cell in &cells[2..] {
        let parts: Vec<&str> = cell.split('|').collect();
        if parts.len() != 3 {
            return Err(ElementKgError::InvalidSchema(format!(
                "attribute header {cell:?} is not Name|unit|kind"
            )));
        }
        let (name, unit, kind) = (parts[0], parts[1], parts[2]);
        if name.is_empty() || !names.insert(name.to_string()) {
            return Err(ElementKgError::InvalidSchema(format!(
                "attribute name {name:?} empty or repeated"
            )));
        }
        let continuous = match kind {
            "continuous" => true,
            "categorical" => false,
            other => {
                return Err(ElementKgError::InvalidSchema(format!(
                    "attribute {name}: unknown kind {other:?}"
                )))
            }
        };
        if continuous && unit.is_empty() {
            return Err(ElementKgError::InvalidSchema(format!(
                "continuous attribute {name} must declare a unit"
            )));
        }
        columns.push(Column {
            name: name.to_string(),
            unit: if unit.is_empty() {
                None
            } else {
                Some(unit.to_string())
            },
            continuous,
        });
    }
    Ok(columns)
}

fn parse_row(
    line_no: usize,
    line: &str,
    columns: &[Column],
) -> Result<ElementRecord, ElementKgError> {
    let cells: Vec<&str> = line.split('\t').collect();
    if cells.len() != columns.len() + 2 {
        return Err(ElementKgError::Parse {
            line: line_no,
            message: format!(
                "expected {} columns, found {}",
                columns.len() + 2,
                cells.len()
            ),
        });
    }
    let symbol = cells[0].trim().to_string();
    if symbol.is_empty() {
        return Err(ElementKgError::Parse {
            line: line_no,
            message: "empty symbol".into(),
        });
    }
    let atomic_number: u32 = cells[1].trim().parse().map_err(|_| ElementKgError::Parse {
        line: line_no,
        message: format!("bad atomic number {:?}", cells[1]),
    })?;
    if atomic_number == 0 || atomic_number > u32::from(MAX_ATOMIC_NUMBER) {
        return Err(ElementKgError::OutOfSupportedRange {
            symbol,
            atomic_number,
        });
    }

    let mut attributes = BTreeMap::new();
    for (column, cell) in columns.iter().zip(&cells[2..]) {
        let cell = cell.trim();
        if cell.is_empty() {
            return Err(ElementKgError::MissingAttribute {
                symbol,
                attribute: column.name.clone(),
            });
        }
        let value = if column.continuous {
            let x: f64 = cell.parse().map_err(|_| ElementKgError::Parse {
                line: line_no,
                message: format!("attribute {}: bad number {cell:?}", column.name),
            })?;
            if !x.is_finite() {
                return Err(ElementKgError::NonFiniteValue {
                    symbol,
                    attribute: column.name.clone(),
                });
            }
            AttributeValue::Number(x)
        } else {
            AttributeValue::Label(cell.to_string())
        };
        attributes.insert(column.name.clone(), value);
    }
    Ok(ElementRecord {
        symbol,
        atomic_number: atomic_number as u8,
        attributes,
    })
}

fn infer_schema(
    columns: &[Column],
    records: &[ElementRecord],
) -> Result<Vec<AttributeSchema>, ElementKgError> {
    let mut schema = Vec::with_capacity(columns.len());
    for column in columns {
        let kind = if column.continuous {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for r in records {
                let x = r.number(&column.name)?;
                min = min.min(x);
                max = max.max(x);
            }
            if records.is_empty() {
                min = 0.0;
                max = 1.0;
            }
            if !(min < max) && records.len() > 1 {
                return Err(ElementKgError::InvalidSchema(format!(
                    "continuous attribute {} is constant over the table",
                    column.name
                )));
            }
            AttributeKind::Continuous { min, max }
        } else {
            let mut categories: Vec<String> = records
                .iter()
                .map(|r| r.label(&column.name).map(str::to_string))
                .collect::<Result<_, _>>()?;
            categories.sort();
            categories.dedup();
            AttributeKind::Categorical { categories }
        };
        schema.push(AttributeSchema {
            name: column.name.clone(),
            unit: column.unit.clone(),
            kind,
        });
    }
    Ok(schema)
}
