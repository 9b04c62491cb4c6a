//! Small numerical helpers used across the crate.

/// Neumaier-compensated sum. Mixed-magnitude sums over tensor-product
/// POVMs (thousands of terms at 6 qubits) lose digits under naive
/// accumulation; the variance functional must stay within a 1e-8
/// cross-check budget.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Euclidean projection of `v` onto the probability simplex
/// `{ w : w_i >= 0, sum_i w_i = 1 }`.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    assert!(n > 0, "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry"));

    // Largest k with sorted[k-1] - (cumsum_k - 1)/k > 0.
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn compensated_sum_matches_exact_on_adversarial_input() {
        // 1 + 1e16 - 1e16 loses the 1 under naive summation order.
        let s = compensated_sum([1.0, 1e16, -1e16]);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn simplex_projection_of_point_in_simplex_is_identity() {
        let v = [0.2, 0.3, 0.5];
        let p = project_onto_simplex(&v);
        for (a, b) in p.iter().zip(v.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn simplex_projection_clamps_and_renormalizes() {
        let p = project_onto_simplex(&[2.0, -1.0]);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-14);
        let q = project_onto_simplex(&[0.6, 0.6]);
        assert_abs_diff_eq!(q[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(q[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn simplex_projection_sums_to_one() {
        let p = project_onto_simplex(&[3.0, 0.1, -2.0, 0.4]);
        let total: f64 = p.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}
