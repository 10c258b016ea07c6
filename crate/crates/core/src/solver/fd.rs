//! Finite-difference weights on arbitrary node sets (Fornberg's algorithm).

/// Weights for derivatives of order `0..=m` at `z` from nodes `x`.
///
/// Returns `w[d][j]`: the weight of the value at `x[j]` in the `d`-th
/// derivative approximation.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0_f64; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mi = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mi).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mi).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centered_five_point_second_derivative() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &x, 2);
        let expect = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w[2].iter().zip(&expect) {
            assert_relative_eq!(*a, *b, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_on_polynomials_nonuniform() {
        let x = [0.0, 0.13, 0.21, 0.55, 0.8, 1.0];
        let z = 0.21;
        let w = fornberg_weights(z, &x, 2);
        // f = x^4: f'(z) = 4z³, f''(z) = 12z²
        let f: Vec<f64> = x.iter().map(|&t| t.powi(4)).collect();
        let d1: f64 = w[1].iter().zip(&f).map(|(a, b)| a * b).sum();
        let d2: f64 = w[2].iter().zip(&f).map(|(a, b)| a * b).sum();
        assert_relative_eq!(d1, 4.0 * z.powi(3), epsilon = 1e-11);
        assert_relative_eq!(d2, 12.0 * z * z, epsilon = 1e-9);
    }
}
