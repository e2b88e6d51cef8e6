//! Finite-difference weights on arbitrary node sets (Fornberg's recursion).
//!
//! Every stencil in the crate comes out of `fd_weights`: interior derivative
//! rows, one-sided boundary traces, ghost-node elimination and endpoint
//! extrapolation. Weights are exact for polynomials up to degree
//! `xs.len() - 1`.

/// Weights for derivatives 0..=m at evaluation point `z` on nodes `xs`.
///
/// Returns `m + 1` rows; row `k` holds the weights of a k-th derivative
/// approximation, one weight per node in `xs`.
pub fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let nd = xs.len();
    assert!(nd > m, "need more than m nodes for an m-th derivative");
    let mut c = vec![vec![0.0; nd]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..nd {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Just the weights of the m-th derivative at `z` on nodes `xs`.
pub fn deriv_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    fd_weights(z, xs, m).pop().unwrap()
}
