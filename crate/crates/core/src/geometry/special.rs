//! Special-function kernels used by the Ewald split of the lattice Green
//! function: the exponential integral `E1` and the entire combinations that
//! appear once the logarithmic singularity is removed analytically.

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(z)` for `z > 0`.
///
/// Power series below `z = 1.2`, modified-Lentz continued fraction above.
/// Relative accuracy is a few ulps across the range used here (`z` up to ~80;
/// larger arguments underflow to 0 anyway).
pub fn exp_int_e1(z: f64) -> f64 {
    assert!(z > 0.0, "E1 requires a positive argument");
    if z <= 1.2 {
        e1_plus_ln(z) - z.ln()
    } else {
        // E1(z) = e^{-z} / (z + 1 - 1²/(z + 3 - 2²/(z + 5 - ...)))
        let mut f = z + 1.0;
        let mut c = f;
        let mut d = 0.0_f64;
        for n in 1..200 {
            let a = -((n * n) as f64);
            let b = z + (2 * n + 1) as f64;
            d = b + a * d;
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            c = b + a / c;
            if c.abs() < 1e-300 {
                c = 1e-300;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-z).exp() / f
    }
}

/// The entire function `E1(z) + ln z = -γ + Σ_{k≥1} (-1)^{k+1} z^k/(k·k!)`.
///
/// Finite at `z = 0`; this is the combination left over after the log
/// singularity of the short-range Ewald term is subtracted analytically.
pub fn e1_plus_ln(z: f64) -> f64 {
    assert!(z >= 0.0);
    if z <= 1.2 {
        let mut sum = 0.0;
        let mut term = 1.0_f64;
        for k in 1..60 {
            term *= -z / k as f64;
            let contrib = -term / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-18 * (1.0 + sum.abs()) {
                break;
            }
        }
        sum - EULER_GAMMA
    } else {
        exp_int_e1(z) + z.ln()
    }
}

/// `g1(z) = (1 - e^{-z})/z`, the derivative kernel of `E1(z) + ln z`.
pub fn g1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `g1'(z) = (e^{-z}(1+z) - 1)/z²`, series-evaluated near zero to avoid
/// cancellation.
pub fn g1_prime(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // Σ_{k≥1} k (-1)^k z^{k-1} / (k+1)!
        let mut sum = 0.0;
        let mut pow = 1.0_f64; // z^{k-1}
        let mut fact = 2.0_f64; // (k+1)!
        for k in 1..30 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let contrib = sign * k as f64 * pow / fact;
            sum += contrib;
            pow *= z;
            fact *= (k + 2) as f64;
            if contrib.abs() < 1e-19 {
                break;
            }
        }
        sum
    } else {
        ((-z).exp() * (1.0 + z) - 1.0) / (z * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn e1_reference_values() {
        // Abramowitz & Stegun 5.1: E1(1) = 0.219383934...
        assert_relative_eq!(exp_int_e1(1.0), 0.219_383_934_395_520_3, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(0.5), 0.559_773_594_776_160_2, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(2.0), 0.048_900_510_708_061_12, max_relative = 1e-13);
        assert_relative_eq!(exp_int_e1(10.0), 4.156_968_929_685_325e-6, max_relative = 1e-12);
    }

    #[test]
    fn e1_branches_match_at_crossover() {
        for &z in &[1.1_f64, 1.2, 1.3] {
            // Direct comparison of the two evaluation routes around z = 1.2.
            let lo = {
                let mut sum = 0.0;
                let mut term = 1.0_f64;
                for k in 1..80 {
                    term *= -z / k as f64;
                    sum += -term / k as f64;
                }
                sum - EULER_GAMMA - z.ln()
            };
            assert_relative_eq!(exp_int_e1(z), lo, max_relative = 1e-13);
        }
    }

    #[test]
    fn g1_matches_difference_quotient_of_e1_plus_ln() {
        for &z in &[1e-6_f64, 0.01, 0.3, 1.0, 3.0] {
            let h = 1e-6 * z.max(1e-3);
            let fd = (e1_plus_ln(z + h) - e1_plus_ln(z - h)) / (2.0 * h);
            // d/dz [E1 + ln] = -e^{-z}/z + 1/z = g1(z)
            assert_relative_eq!(g1(z), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn g1_prime_series_vs_direct() {
        for &z in &[0.49, 0.51, 0.2, 1.0] {
            let direct = ((-z as f64).exp() * (1.0 + z) - 1.0) / (z * z);
            assert_relative_eq!(g1_prime(z), direct, max_relative = 1e-10);
        }
        assert_relative_eq!(g1_prime(0.0), -0.5, max_relative = 1e-14);
    }
}
