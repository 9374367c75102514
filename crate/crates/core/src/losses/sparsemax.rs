//! Sparsemax: Euclidean projection onto the probability simplex.

/// Simplex-projection threshold `T(z)`: the value for which
/// `sum_j max(0, z_j - T) = 1`.
///
/// Equals `(sum_{j in support} z_j - 1) / |support|`.
pub fn sparsemax_threshold(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support_sum = sorted[0];
    let mut k = 1;
    for (j, &zj) in sorted.iter().enumerate() {
        cumsum += zj;
        let rank = (j + 1) as f64;
        if 1.0 + rank * zj > cumsum {
            k = j + 1;
            support_sum = cumsum;
        }
    }
    (support_sum - 1.0) / k as f64
}

/// `argmin_{p in simplex} ||p - z||^2`.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    let t = sparsemax_threshold(z);
    z.iter().map(|&x| (x - t).max(0.0)).collect()
}

/// Indices where `sparsemax(z)` is strictly positive.
pub fn sparsemax_support(z: &[f64]) -> Vec<usize> {
    let t = sparsemax_threshold(z);
    z.iter().enumerate().filter(|(_, &x)| x - t > 0.0).map(|(j, _)| j).collect()
}
