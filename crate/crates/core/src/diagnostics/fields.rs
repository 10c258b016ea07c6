//! Scalar fields with value, gradient and Laplacian — the common currency of
//! the identity checks. Closed-form fields carry analytic derivatives;
//! grid-backed fields interpolate bilinearly (the sampling pipeline used for
//! solver output, with its O(h²) convergence order).

use std::f64::consts::PI;

use crate::geometry::{Point, Vec2};

pub trait Field2: Sync {
    fn value(&self, p: Point) -> f64;
    fn grad(&self, p: Point) -> Vec2;
    fn lap(&self, p: Point) -> f64;
}

/// Quadratic polynomial `c00 + c10 x + c01 y + c20 x² + c11 xy + c02 y²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticField {
    pub c00: f64,
    pub c10: f64,
    pub c01: f64,
    pub c20: f64,
    pub c11: f64,
    pub c02: f64,
}

impl Field2 for QuadraticField {
    fn value(&self, p: Point) -> f64 {
        self.c00
            + self.c10 * p.x
            + self.c01 * p.y
            + self.c20 * p.x * p.x
            + self.c11 * p.x * p.y
            + self.c02 * p.y * p.y
    }

    fn grad(&self, p: Point) -> Vec2 {
        Point::new(
            self.c10 + 2.0 * self.c20 * p.x + self.c11 * p.y,
            self.c01 + self.c11 * p.x + 2.0 * self.c02 * p.y,
        )
    }

    fn lap(&self, _p: Point) -> f64 {
        2.0 * self.c20 + 2.0 * self.c02
    }
}

/// Band-limited periodic field `Σ amp · cos(2π(kx x + ky y) + phase)`.
#[derive(Clone, Debug)]
pub struct TrigField {
    pub terms: Vec<(f64, f64, f64, f64)>, // (amp, kx, ky, phase)
}

impl Field2 for TrigField {
    fn value(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|&(a, kx, ky, ph)| a * (2.0 * PI * (kx * p.x + ky * p.y) + ph).cos())
            .sum()
    }

    fn grad(&self, p: Point) -> Vec2 {
        let mut g = Vec2::default();
        for &(a, kx, ky, ph) in &self.terms {
            let s = (2.0 * PI * (kx * p.x + ky * p.y) + ph).sin();
            g.x -= a * 2.0 * PI * kx * s;
            g.y -= a * 2.0 * PI * ky * s;
        }
        g
    }

    fn lap(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|&(a, kx, ky, ph)| {
                -a * 4.0 * PI * PI * (kx * kx + ky * ky)
                    * (2.0 * PI * (kx * p.x + ky * p.y) + ph).cos()
            })
            .sum()
    }
}

/// Gaussian bump `amp · exp(-|x-c|²/w²)`.
#[derive(Clone, Copy, Debug)]
pub struct BumpField {
    pub center: Point,
    pub width: f64,
    pub amp: f64,
}

impl Field2 for BumpField {
    fn value(&self, p: Point) -> f64 {
        self.amp * (-(p - self.center).norm2() / (self.width * self.width)).exp()
    }

    fn grad(&self, p: Point) -> Vec2 {
        let d = p - self.center;
        d.scale(-2.0 / (self.width * self.width) * self.value(p))
    }

    fn lap(&self, p: Point) -> f64 {
        let w2 = self.width * self.width;
        let d2 = (p - self.center).norm2();
        self.value(p) * (4.0 * d2 / (w2 * w2) - 4.0 / w2)
    }
}

/// Weighted sum of fields.
pub struct SumField<'a> {
    pub parts: Vec<(f64, &'a dyn Field2)>,
}

impl Field2 for SumField<'_> {
    fn value(&self, p: Point) -> f64 {
        self.parts.iter().map(|(c, f)| c * f.value(p)).sum()
    }

    fn grad(&self, p: Point) -> Vec2 {
        let mut g = Vec2::default();
        for (c, f) in &self.parts {
            let fg = f.grad(p);
            g.x += c * fg.x;
            g.y += c * fg.y;
        }
        g
    }

    fn lap(&self, p: Point) -> f64 {
        self.parts.iter().map(|(c, f)| c * f.lap(p)).sum()
    }
}

/// Identically-zero field (placeholder for absent `φ` or `log h`).
pub struct ZeroField;

impl Field2 for ZeroField {
    fn value(&self, _p: Point) -> f64 {
        0.0
    }
    fn grad(&self, _p: Point) -> Vec2 {
        Vec2::default()
    }
    fn lap(&self, _p: Point) -> f64 {
        0.0
    }
}

/// Periodic grid samples with bilinear value/gradient interpolation.
///
/// Gradients are sampled separately (analytically for manufactured fields,
/// spectrally for solver fields) rather than differenced, so the only error
/// of this backend is the O(h²) interpolation itself.
pub struct SampledField {
    pub n: usize,
    pub values: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub laps: Vec<f64>,
}

impl SampledField {
    pub fn sample(field: &dyn Field2, n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        let mut grad_x = vec![0.0; n * n];
        let mut grad_y = vec![0.0; n * n];
        let mut laps = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let p = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
                let idx = iy * n + ix;
                values[idx] = field.value(p);
                let g = field.grad(p);
                grad_x[idx] = g.x;
                grad_y[idx] = g.y;
                laps[idx] = field.lap(p);
            }
        }
        SampledField { n, values, grad_x, grad_y, laps }
    }

    fn bilinear(&self, data: &[f64], p: Point) -> f64 {
        let n = self.n as f64;
        let fx = (p.x - p.x.floor()) * n;
        let fy = (p.y - p.y.floor()) * n;
        let ix = fx.floor() as usize % self.n;
        let iy = fy.floor() as usize % self.n;
        let tx = fx - fx.floor();
        let ty = fy - fy.floor();
        let ixp = (ix + 1) % self.n;
        let iyp = (iy + 1) % self.n;
        let v00 = data[iy * self.n + ix];
        let v10 = data[iy * self.n + ixp];
        let v01 = data[iyp * self.n + ix];
        let v11 = data[iyp * self.n + ixp];
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }
}

impl Field2 for SampledField {
    fn value(&self, p: Point) -> f64 {
        self.bilinear(&self.values, p)
    }

    fn grad(&self, p: Point) -> Vec2 {
        Point::new(self.bilinear(&self.grad_x, p), self.bilinear(&self.grad_y, p))
    }

    fn lap(&self, p: Point) -> f64 {
        self.bilinear(&self.laps, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = BumpField { center: Point::new(0.4, 0.6), width: 0.15, amp: 0.8 };
        let p = Point::new(0.45, 0.52);
        let h = 1e-6;
        let g = b.grad(p);
        let fd = (b.value(Point::new(p.x + h, p.y)) - b.value(Point::new(p.x - h, p.y))) / (2.0 * h);
        assert_relative_eq!(g.x, fd, max_relative = 1e-8);
        let lap_fd = (b.value(Point::new(p.x + h, p.y)) + b.value(Point::new(p.x - h, p.y))
            + b.value(Point::new(p.x, p.y + h))
            + b.value(Point::new(p.x, p.y - h))
            - 4.0 * b.value(p))
            / (h * h);
        assert_relative_eq!(b.lap(p), lap_fd, max_relative = 1e-3);
    }

    #[test]
    fn sampled_field_converges_quadratically() {
        let f = TrigField { terms: vec![(0.7, 1.0, 2.0, 0.3), (0.2, 3.0, -1.0, 1.1)] };
        let p = Point::new(0.313, 0.271);
        let mut errs = Vec::new();
        for &n in &[64usize, 128] {
            let s = SampledField::sample(&f, n);
            errs.push((s.value(p) - f.value(p)).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 2.5 && ratio < 7.0, "bilinear order ~2, got ratio {ratio}");
    }
}
