/// `count` centers evenly spaced over [lo, hi], endpoints included.
pub fn uniform_centers(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    assert!(count >= 1 && hi > lo);
    if count == 1 {
        return vec![(lo + hi) / 2.0];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|k| lo + step * k as f64).collect()
}

/// Gamma such that adjacent Gaussians cross at exp(-1/4): with spacing d,
/// exp(-gamma (d/2)^2) = exp(-1/4) gives gamma = 1/d^2.
pub fn overlap_gamma(centers: &[f64]) -> f64 {
    if centers.len() < 2 {
        return 1.0;
    }
    let spacing = centers[1] - centers[0];
    1.0 / (spacing * spacing)
}

/// Component k = exp(-gamma (x - center_k)^2).
pub fn rbf_expand(x: f64, centers: &[f64], gamma: f64) -> Vec<f64> {
    centers
        .iter()
        .map(|c| {
            let d = x - c;
            (-gamma * d * d).exp()
        })
        .collect()
}
