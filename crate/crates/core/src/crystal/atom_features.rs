use std::sync::OnceLock;

use super::CrystalError;
use crate::elementkg::{discretize, DiscretizationRule, ElementRecord, ElementTable};

pub const ATOM_FEATURE_DIM: usize = 70;

// Block layout. Flags first, then one-hot blocks in table order.
const FLAG_LANTHANIDE: usize = 0;
const FLAG_ACTINIDE: usize = 1;
const GROUP_OFFSET: usize = 2; // 18 groups
const PERIOD_OFFSET: usize = 20; // periods 1..9
const RADIUS_OFFSET: usize = 29; // 10 bins over 32..232 pm
const VALENCE_OFFSET: usize = 39; // 1..17 electrons
const IE_OFFSET: usize = 56; // 10 bins over 3..65 eV
const BLOCK_OFFSET: usize = 66; // s, p, d, f

const LANTHANIDES: std::ops::RangeInclusive<u8> = 57..=71;
const ACTINIDES: std::ops::RangeInclusive<u8> = 89..=103;

/// The 70-component binary atom descriptor: two flags plus six one-hot
/// property blocks (group 18, period 9, covalent radius 10, valence
/// electrons 17, first ionization energy 10, block 4).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomFeatureVector {
    pub values: Vec<f64>,
}

impl AtomFeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lanthanide(&self) -> bool {
        self.values[FLAG_LANTHANIDE] == 1.0
    }

    pub fn actinide(&self) -> bool {
        self.values[FLAG_ACTINIDE] == 1.0
    }

    pub fn ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }
}

fn radius_rule() -> &'static DiscretizationRule {
    static RULE: OnceLock<DiscretizationRule> = OnceLock::new();
    RULE.get_or_init(|| {
        DiscretizationRule::equal_width("CovalentRadius", 32.0, 232.0, 10).expect("fixed range")
    })
}

fn ionization_rule() -> &'static DiscretizationRule {
    static RULE: OnceLock<DiscretizationRule> = OnceLock::new();
    RULE.get_or_init(|| {
        DiscretizationRule::equal_width("FirstIonizationEnergy", 3.0, 65.0, 10)
            .expect("fixed range")
    })
}

fn expect_unit(table: &ElementTable, attribute: &str, expected: &str) -> Result<(), CrystalError> {
    let schema = table
        .attribute(attribute)
        .ok_or_else(|| crate::elementkg::ElementKgError::MissingAttribute {
            symbol: "<schema>".into(),
            attribute: attribute.into(),
        })?;
    let found = schema.unit.as_deref().unwrap_or("none");
    if found != expected {
        return Err(crate::elementkg::ElementKgError::UnitMismatch {
            attribute: attribute.into(),
            expected: expected.into(),
            found: found.into(),
        }
        .into());
    }
    Ok(())
}

fn parse_range(
    record: &ElementRecord,
    attribute: &str,
    lo: i64,
    hi: i64,
) -> Result<usize, CrystalError> {
    let label = record.label(attribute)?;
    let parsed: i64 = label.parse().map_err(|_| CrystalError::BadAttributeValue {
        symbol: record.symbol.clone(),
        attribute: attribute.into(),
        value: label.to_string(),
    })?;
    if !(lo..=hi).contains(&parsed) {
        return Err(CrystalError::BadAttributeValue {
            symbol: record.symbol.clone(),
            attribute: attribute.into(),
            value: label.to_string(),
        });
    }
    Ok((parsed - lo) as usize)
}

/// Encodes one element into the 70-component vector. Lanthanides and
/// actinides get period slots 8 and 9 on top of their flags; out-of-window
/// radius or ionization values clamp to the end bins.
pub fn encode_atom(symbol: &str, table: &ElementTable) -> Result<AtomFeatureVector, CrystalError> {
    expect_unit(table, "CovalentRadius", "pm")?;
    expect_unit(table, "FirstIonizationEnergy", "eV")?;
    let record = table.require(symbol)?;
    let z = record.atomic_number;

    let mut values = vec![0.0; ATOM_FEATURE_DIM];
    if LANTHANIDES.contains(&z) {
        values[FLAG_LANTHANIDE] = 1.0;
    }
    if ACTINIDES.contains(&z) {
        values[FLAG_ACTINIDE] = 1.0;
    }

    let group = parse_range(record, "Group", 1, 18)?;
    values[GROUP_OFFSET + group] = 1.0;

    let period = if LANTHANIDES.contains(&z) {
        7 // encoded as the 8th period
    } else if ACTINIDES.contains(&z) {
        8 // encoded as the 9th period
    } else {
        parse_range(record, "Period", 1, 7)?
    };
    values[PERIOD_OFFSET + period] = 1.0;

    let radius = record.number("CovalentRadius")?;
    values[RADIUS_OFFSET + discretize(radius, radius_rule())?.index] = 1.0;

    let valence = parse_range(record, "ValenceElectrons", 1, 17)?;
    values[VALENCE_OFFSET + valence] = 1.0;

    let ie = record.number("FirstIonizationEnergy")?;
    values[IE_OFFSET + discretize(ie, ionization_rule())?.index] = 1.0;

    let block = match record.label("Block")? {
        "s" => 0,
        "p" => 1,
        "d" => 2,
        "f" => 3,
        other => {
            return Err(CrystalError::BadAttributeValue {
                symbol: record.symbol.clone(),
                attribute: "Block".into(),
                value: other.to_string(),
            })
        }
    };
    values[BLOCK_OFFSET + block] = 1.0;

    Ok(AtomFeatureVector { values })
}
