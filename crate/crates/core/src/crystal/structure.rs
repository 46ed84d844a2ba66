use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::la::{det3, row_times_mat};
use super::CrystalError;
use crate::elementkg::ElementTable;

/// One line of a dataset file. Lattice rows are lattice vectors in
/// angstroms; coordinates are fractional.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StructureRecord {
    pub id: String,
    pub lattice: [[f64; 3]; 3],
    pub frac_coords: Vec<[f64; 3]>,
    pub species: Vec<String>,
    #[serde(default)]
    pub targets: BTreeMap<String, f64>,
}

/// A validated structure: species known to the element table, coordinates
/// wrapped into [0, 1), non-singular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalStructure {
    pub id: String,
    pub lattice: [[f64; 3]; 3],
    pub frac_coords: Vec<[f64; 3]>,
    pub species: Vec<String>,
    pub targets: BTreeMap<String, f64>,
}

impl CrystalStructure {
    pub fn num_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn cart_coords(&self) -> Vec<[f64; 3]> {
        self.frac_coords
            .iter()
            .map(|f| frac_to_cart(f, &self.lattice))
            .collect()
    }
}

/// Fractional to Cartesian: row vector times the lattice matrix.
pub fn frac_to_cart(frac: &[f64; 3], lattice: &[[f64; 3]; 3]) -> [f64; 3] {
    row_times_mat(frac, lattice)
}

fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub fn parse_structure(
    record: &StructureRecord,
    table: &ElementTable,
) -> Result<CrystalStructure, CrystalError> {
    let id = record.id.clone();
    if record.species.len() != record.frac_coords.len() {
        return Err(CrystalError::ShapeMismatch {
            id,
            species: record.species.len(),
            coords: record.frac_coords.len(),
        });
    }
    if record.species.is_empty() {
        return Err(CrystalError::EmptyStructure { id });
    }
    for symbol in &record.species {
        if table.get(symbol).is_none() {
            return Err(CrystalError::UnknownSpecies {
                id,
                symbol: symbol.clone(),
            });
        }
    }
    let det = det3(&record.lattice);
    if !det.is_finite() || det.abs() <= 1e-9 {
        return Err(CrystalError::BadLattice { id, det });
    }
    if record
        .frac_coords
        .iter()
        .flatten()
        .any(|x| !x.is_finite())
    {
        return Err(CrystalError::NonFiniteCoordinate { id });
    }
    let frac_coords = record
        .frac_coords
        .iter()
        .map(|f| [wrap_unit(f[0]), wrap_unit(f[1]), wrap_unit(f[2])])
        .collect();
    Ok(CrystalStructure {
        id,
        lattice: record.lattice,
        frac_coords,
        species: record.species.clone(),
        targets: record.targets.clone(),
    })
}
