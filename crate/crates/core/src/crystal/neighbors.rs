use super::la::{det3, invert3, norm3, row_times_mat};
use super::structure::CrystalStructure;
use super::CrystalError;

/// A directed edge from atom `src` to the periodic image of atom `dst`
/// shifted by `image` cells. `vector` points src -> dst image, in angstroms.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEdge {
    pub src: usize,
    pub dst: usize,
    pub image: [i32; 3],
    pub vector: [f64; 3],
    pub distance: f64,
}

fn edge_between(
    structure: &CrystalStructure,
    i: usize,
    j: usize,
    image: [i32; 3],
) -> NeighborEdge {
    let fi = &structure.frac_coords[i];
    let fj = &structure.frac_coords[j];
    let diff = [
        fj[0] + image[0] as f64 - fi[0],
        fj[1] + image[1] as f64 - fi[1],
        fj[2] + image[2] as f64 - fi[2],
    ];
    let vector = row_times_mat(&diff, &structure.lattice);
    let distance = norm3(&vector);
    NeighborEdge {
        src: i,
        dst: j,
        image,
        vector,
        distance,
    }
}

fn sort_edges(edges: &mut [NeighborEdge]) {
    edges.sort_by(|a, b| {
        (a.src, a.dst, a.image)
            .partial_cmp(&(b.src, b.dst, b.image))
            .expect("integer keys")
    });
}

fn collect_edges(structure: &CrystalStructure, cutoff: f64, bound: [i32; 3]) -> Vec<NeighborEdge> {
    let n = structure.num_atoms();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for a in -bound[0]..=bound[0] {
                for b in -bound[1]..=bound[1] {
                    for c in -bound[2]..=bound[2] {
                        let e = edge_between(structure, i, j, [a, b, c]);
                        if e.distance > 0.0 && e.distance <= cutoff {
                            edges.push(e);
                        }
                    }
                }
            }
        }
    }
    sort_edges(&mut edges);
    edges
}

/// Per-axis image bound: a displacement of length <= cutoff moves the k-th
/// fractional coordinate by at most cutoff * |column k of L^-1|, and the
/// in-cell offset adds less than 1.
fn image_bounds(structure: &CrystalStructure, cutoff: f64) -> Result<[i32; 3], CrystalError> {
    let inv = invert3(&structure.lattice).ok_or_else(|| CrystalError::DegenerateLattice {
        id: structure.id.clone(),
    })?;
    let mut bound = [0i32; 3];
    for k in 0..3 {
        let col = [inv[0][k], inv[1][k], inv[2][k]];
        let reach = cutoff * norm3(&col);
        if !reach.is_finite() {
            return Err(CrystalError::DegenerateLattice {
                id: structure.id.clone(),
            });
        }
        bound[k] = reach.ceil() as i32 + 1;
    }
    Ok(bound)
}

/// All pairs (src, dst, image) with 0 < distance <= cutoff, ordered by
/// (src, dst, image). When a node ends up with fewer than `min_neighbors`
/// outgoing edges the cutoff grows by 1.2x and the search repeats; the
/// returned value is the cutoff that finally satisfied the bound.
pub fn neighbor_search(
    structure: &CrystalStructure,
    cutoff: f64,
    min_neighbors: usize,
) -> Result<(Vec<NeighborEdge>, f64), CrystalError> {
    assert!(cutoff > 0.0, "cutoff must be positive");
    let mut effective = cutoff;
    loop {
        let bound = image_bounds(structure, effective)?;
        let edges = collect_edges(structure, effective, bound);
        if min_neighbors == 0 {
            return Ok((edges, effective));
        }
        let mut counts = vec![0usize; structure.num_atoms()];
        for e in &edges {
            counts[e.src] += 1;
        }
        if counts.iter().all(|&c| c >= min_neighbors) {
            return Ok((edges, effective));
        }
        effective *= 1.2;
    }
}

/// Verification oracle: enumerates a conservatively large image box derived
/// from a lower bound on the lattice's smallest singular value
/// (|det L| / ||L||_F^2) and filters by distance. Test use only.
pub fn brute_force_neighbors(
    structure: &CrystalStructure,
    cutoff: f64,
) -> Result<Vec<NeighborEdge>, CrystalError> {
    assert!(cutoff > 0.0, "cutoff must be positive");
    let det = det3(&structure.lattice).abs();
    let fro2: f64 = structure
        .lattice
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum();
    if !(det > 1e-12 && fro2.is_finite()) {
        return Err(CrystalError::DegenerateLattice {
            id: structure.id.clone(),
        });
    }
    let m = (cutoff * fro2 / det).ceil() as i32 + 2;
    Ok(collect_edges(structure, cutoff, [m, m, m]))
}
