//! Quadrature building blocks: Gauss–Legendre panels, polar/annular grids,
//! and smooth radial cutoffs used to split singular integrands.

use std::f64::consts::PI;

use crate::geometry::Point;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter().zip(&w).map(|(&xi, &wi)| (mid + half * xi, half * wi)).collect()
}

/// Radial panels from `r_in` to `r_out` with geometric growth (ratio 2 until
/// the panel width saturates), Gauss nodes per panel. Suited to integrands
/// growing like a power of `1/r` at the inner cutoff.
pub fn geometric_radial_panels(r_in: f64, r_out: f64, nodes_per_panel: usize) -> Vec<(f64, f64)> {
    assert!(r_in > 0.0 && r_out > r_in);
    let mut out = Vec::new();
    let mut a = r_in;
    while a < r_out {
        let b = (2.0 * a).min(r_out);
        out.extend(gauss_on(a, b, nodes_per_panel));
        a = b;
    }
    out
}

/// ∫ over the annulus `r_in ≤ |x - c| ≤ r_out` of `f`, by geometric radial
/// Gauss panels × angular trapezoid (spectral in the smooth angle).
pub fn integrate_annulus<F: Fn(Point) -> f64>(
    c: Point,
    r_in: f64,
    r_out: f64,
    n_angle: usize,
    nodes_per_panel: usize,
    f: F,
) -> f64 {
    let radial = geometric_radial_panels(r_in, r_out, nodes_per_panel);
    integrate_rings(c, &radial, n_angle, f)
}

/// Annulus integral with caller-supplied radial panel edges; needed when the
/// integrand has known non-analytic bands (e.g. smooth cutoffs) that must not
/// straddle a single Gauss panel.
pub fn integrate_annulus_edges<F: Fn(Point) -> f64>(
    c: Point,
    edges: &[f64],
    n_angle: usize,
    nodes_per_panel: usize,
    f: F,
) -> f64 {
    let mut radial = Vec::new();
    for pair in edges.windows(2) {
        radial.extend(gauss_on(pair[0], pair[1], nodes_per_panel));
    }
    integrate_rings(c, &radial, n_angle, f)
}

fn integrate_rings<F: Fn(Point) -> f64>(
    c: Point,
    radial: &[(f64, f64)],
    n_angle: usize,
    f: F,
) -> f64 {
    let dth = 2.0 * PI / n_angle as f64;
    let mut sum = 0.0;
    for &(r, wr) in radial {
        let mut ring = 0.0;
        for k in 0..n_angle {
            let th = dth * k as f64;
            ring += f(Point::new(c.x + r * th.cos(), c.y + r * th.sin()));
        }
        sum += wr * r * ring * dth;
    }
    sum
}

/// Panel edges running geometrically (ratio 2) from `r_in` to `split`, then
/// uniformly across `[split, r_out]` in `n_band` slices.
pub fn edges_geometric_then_uniform(r_in: f64, split: f64, r_out: f64, n_band: usize) -> Vec<f64> {
    let mut edges = vec![r_in];
    let mut a = r_in;
    while a < split {
        a = (2.0 * a).min(split);
        edges.push(a);
    }
    for i in 1..=n_band {
        edges.push(split + (r_out - split) * i as f64 / n_band as f64);
    }
    edges
}

/// ∫ over the full disk `|x - c| ≤ r_out`, radial Gauss panels of roughly
/// uniform width × angular trapezoid.
pub fn integrate_disk<F: Fn(Point) -> f64>(
    c: Point,
    r_out: f64,
    n_radial_panels: usize,
    n_angle: usize,
    nodes_per_panel: usize,
    f: F,
) -> f64 {
    let dth = 2.0 * PI / n_angle as f64;
    let mut sum = 0.0;
    for p in 0..n_radial_panels {
        let a = r_out * p as f64 / n_radial_panels as f64;
        let b = r_out * (p + 1) as f64 / n_radial_panels as f64;
        for (r, wr) in gauss_on(a, b, nodes_per_panel) {
            let mut ring = 0.0;
            for k in 0..n_angle {
                let th = dth * k as f64;
                ring += f(Point::new(c.x + r * th.cos(), c.y + r * th.sin()));
            }
            sum += wr * r * ring * dth;
        }
    }
    sum
}

/// C^∞ transition: 0 for `t ≤ 0`, 1 for `t ≥ 1`, built from `e^{-1/t}`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Radial cutoff equal to 1 inside `r_on`, 0 outside `r_off`.
pub fn radial_cutoff(r: f64, r_on: f64, r_off: f64) -> f64 {
    1.0 - smooth_step((r - r_on) / (r_off - r_on))
}

/// Composite Simpson weights on `n+1` uniform nodes (`n` even), spacing `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson rule needs an even panel count");
    let mut w = vec![0.0; n + 1];
    for i in 0..=n {
        w[i] = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h / 3.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n nodes are exact for degree 2n-1.
        let rule = gauss_on(0.0, 1.0, 8);
        let val: f64 = rule.iter().map(|&(x, w)| w * x.powi(15)).sum();
        assert_relative_eq!(val, 1.0 / 16.0, epsilon = 1e-14);
    }

    #[test]
    fn annulus_rule_reproduces_power_law() {
        // ∫_{a<|x|<b} |x|^{-4} dx = π (a^{-2} - b^{-2})
        let (a, b) = (0.01, 0.5);
        let v = integrate_annulus(Point::new(0.0, 0.0), a, b, 64, 12, |p| p.norm2().powi(-2));
        assert_relative_eq!(v, PI * (1.0 / (a * a) - 1.0 / (b * b)), max_relative = 1e-12);
    }

    #[test]
    fn disk_rule_reproduces_gaussian() {
        let v = integrate_disk(Point::new(0.2, -0.1), 1.0, 24, 96, 8, |p| {
            (-(p - Point::new(0.2, -0.1)).norm2() * 4.0).exp()
        });
        // ∫_{|x|<1} e^{-4|x|²} = (π/4)(1 - e^{-4})
        assert_relative_eq!(v, PI / 4.0 * (1.0 - (-4.0_f64).exp()), max_relative = 1e-10);
    }

    #[test]
    fn smooth_step_endpoints() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert_relative_eq!(smooth_step(0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let n = 10;
        let h = 1.0 / n as f64;
        let w = simpson_weights(n, h);
        let val: f64 = (0..=n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
        assert_relative_eq!(val, 0.25, epsilon = 1e-14);
    }
}
