//! The singular weight `h(x) = h*(x) · e^{-4π Σ_j α_j G(x, p_j)}` and its
//! logarithmic derivatives.
//!
//! `h*` is restricted to a closed-form family with analytic first and second
//! derivatives, so `∇ log h` and `Δ log h` carry no finite-difference noise
//! into the expansion coefficients downstream.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GreenTable, Point, Vec2};

/// One term `amp · cos(2π(kx·x + ky·y) + phase)` of the exponent of `h*`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CosTerm {
    pub amp: f64,
    pub kx: f64,
    pub ky: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Closed-form positive smooth part `h*`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SmoothPart {
    Constant(f64),
    /// `h* = exp(Σ terms)` — positive by construction.
    ExpCos(Vec<CosTerm>),
}

impl SmoothPart {
    pub fn one() -> Self {
        SmoothPart::Constant(1.0)
    }

    fn log_value(&self, x: Point) -> f64 {
        match self {
            SmoothPart::Constant(c) => c.ln(),
            SmoothPart::ExpCos(terms) => terms
                .iter()
                .map(|t| t.amp * (2.0 * PI * (t.kx * x.x + t.ky * x.y) + t.phase).cos())
                .sum(),
        }
    }

    fn log_grad(&self, x: Point) -> Vec2 {
        match self {
            SmoothPart::Constant(_) => Vec2::default(),
            SmoothPart::ExpCos(terms) => {
                let mut g = Vec2::default();
                for t in terms {
                    let s = (2.0 * PI * (t.kx * x.x + t.ky * x.y) + t.phase).sin();
                    g.x += -t.amp * 2.0 * PI * t.kx * s;
                    g.y += -t.amp * 2.0 * PI * t.ky * s;
                }
                g
            }
        }
    }

    fn log_lap(&self, x: Point) -> f64 {
        match self {
            SmoothPart::Constant(_) => 0.0,
            SmoothPart::ExpCos(terms) => terms
                .iter()
                .map(|t| {
                    let c = (2.0 * PI * (t.kx * x.x + t.ky * x.y) + t.phase).cos();
                    -t.amp * 4.0 * PI * PI * (t.kx * t.kx + t.ky * t.ky) * c
                })
                .sum(),
        }
    }
}

/// A vortex point `p` with strength `α > -1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Vortex {
    pub point: Point,
    pub alpha: f64,
}

/// The weight specification: smooth part, vortex points, and the Hölder
/// exponent `σ` of the `C^{2,σ}` class declared by the `h*` family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightSpec {
    pub smooth: SmoothPart,
    pub vortices: Vec<Vortex>,
    pub sigma: f64,
}

/// Distances below this clamp `h` to its limiting value at a vortex.
const VORTEX_CLAMP: f64 = 1e-8;

impl WeightSpec {
    pub fn uniform() -> Self {
        WeightSpec { smooth: SmoothPart::one(), vortices: Vec::new(), sigma: 1.0 }
    }

    pub fn new(smooth: SmoothPart, vortices: Vec<Vortex>, sigma: f64) -> Result<Self> {
        let w = WeightSpec { smooth, vortices, sigma };
        w.validate_standalone()?;
        Ok(w)
    }

    fn validate_standalone(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Hölder exponent sigma = {} must lie in (0, 1]",
                self.sigma
            )));
        }
        if let SmoothPart::Constant(c) = self.smooth {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("constant h* = {c} must be positive")));
            }
        }
        for v in &self.vortices {
            if v.alpha <= -1.0 {
                return Err(Error::InvalidConfig(format!(
                    "vortex strength alpha = {} must exceed -1",
                    v.alpha
                )));
            }
        }
        Ok(())
    }

    /// Full validation against a domain: positivity of `h*` on a dense grid
    /// and pairwise-distinct in-domain vortices.
    pub fn validate(&self, g: &GreenTable) -> Result<()> {
        self.validate_standalone()?;
        let domain = g.domain();
        for (i, v) in self.vortices.iter().enumerate() {
            domain.check_contains(v.point)?;
            for w in &self.vortices[i + 1..] {
                if domain.distance(v.point, w.point) < 1e-10 {
                    return Err(Error::InvalidConfig("vortex points must be pairwise distinct".into()));
                }
            }
        }
        // h* > 0 on a dense grid; ExpCos is positive by construction but the
        // grid sweep also catches NaNs from bad coefficients.
        for i in 0..32 {
            for j in 0..32 {
                let p = match domain.kind {
                    DomainKind::Torus => Point::new(i as f64 / 32.0, j as f64 / 32.0),
                    DomainKind::Disk => {
                        let r = 0.99 * i as f64 / 31.0;
                        let th = 2.0 * PI * j as f64 / 32.0;
                        Point::new(r * th.cos(), r * th.sin())
                    }
                };
                let v = self.log_value_smooth(p);
                if !v.is_finite() {
                    return Err(Error::InvalidConfig("h* is not finite on the domain".into()));
                }
            }
        }
        Ok(())
    }

    fn log_value_smooth(&self, x: Point) -> f64 {
        self.smooth.log_value(x)
    }

    fn nearest_vortex(&self, g: &GreenTable, x: Point) -> Option<(f64, &Vortex)> {
        self.vortices
            .iter()
            .map(|v| (g.domain().distance(x, v.point), v))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
    }

    /// `h(x) ≥ 0`; exactly 0 at a vortex with positive strength.
    pub fn h_eval(&self, g: &GreenTable, x: Point) -> Result<f64> {
        g.domain().check_contains(x)?;
        if let Some((d, v)) = self.nearest_vortex(g, x) {
            if d < VORTEX_CLAMP && v.alpha != 0.0 {
                if v.alpha > 0.0 {
                    return Ok(0.0);
                }
                return Err(Error::SingularEvaluation(
                    x,
                    "weight diverges at a vortex of negative strength",
                ));
            }
        }
        let mut log_h = self.log_value_smooth(x);
        for v in &self.vortices {
            if v.alpha != 0.0 {
                log_h -= 4.0 * PI * v.alpha * g.green(x, v.point)?;
            }
        }
        Ok(log_h.exp())
    }

    /// `log h(x)`; an error at vortices where `h` vanishes or diverges.
    pub fn log_h(&self, g: &GreenTable, x: Point) -> Result<f64> {
        g.domain().check_contains(x)?;
        let mut log_h = self.log_value_smooth(x);
        for v in &self.vortices {
            if v.alpha != 0.0 {
                log_h -= 4.0 * PI * v.alpha * g.green(x, v.point)?;
            }
        }
        Ok(log_h)
    }

    /// `∇ log h(x)`.
    pub fn grad_log_h(&self, g: &GreenTable, x: Point) -> Result<Vec2> {
        let mut grad = self.smooth.log_grad(x);
        for v in &self.vortices {
            if v.alpha != 0.0 {
                let gg = g.green_grad_x(x, v.point)?;
                grad = grad + gg.scale(-4.0 * PI * v.alpha);
            }
        }
        Ok(grad)
    }

    /// `Δ log h(x)` away from vortices.
    ///
    /// Off the vortex points `ΔG(·,p) = 1` on the torus (the background term
    /// of `-ΔG = δ - 1`) and `0` on the disk, so the vortex factor contributes
    /// `-4π Σ α_j` on the torus and nothing on the disk.
    pub fn lap_log_h(&self, g: &GreenTable, x: Point) -> Result<f64> {
        if let Some((d, v)) = self.nearest_vortex(g, x) {
            if d < VORTEX_CLAMP && v.alpha != 0.0 {
                return Err(Error::SingularEvaluation(x, "Δ log h at a vortex point"));
            }
        }
        let mut lap = self.smooth.log_lap(x);
        if matches!(g.domain().kind, DomainKind::Torus) {
            let alpha_sum: f64 = self.vortices.iter().map(|v| v.alpha).sum();
            lap -= 4.0 * PI * alpha_sum;
        }
        Ok(lap)
    }

    /// Gradient and Laplacian of `log h` in one call.
    pub fn log_h_derivs(&self, g: &GreenTable, x: Point) -> Result<(Vec2, f64)> {
        Ok((self.grad_log_h(g, x)?, self.lap_log_h(g, x)?))
    }

    /// Hessian of `log h` (needed by the Hessian of the configuration
    /// functional).
    pub fn hess_log_h(&self, g: &GreenTable, x: Point) -> Result<crate::geometry::Mat2> {
        let mut h = match &self.smooth {
            SmoothPart::Constant(_) => crate::geometry::Mat2::default(),
            SmoothPart::ExpCos(terms) => {
                let mut m = crate::geometry::Mat2::default();
                for t in terms {
                    let c = (2.0 * PI * (t.kx * x.x + t.ky * x.y) + t.phase).cos();
                    let f = -t.amp * 4.0 * PI * PI * c;
                    m = m.add(crate::geometry::Mat2::symmetric(
                        f * t.kx * t.kx,
                        f * t.kx * t.ky,
                        f * t.ky * t.ky,
                    ));
                }
                m
            }
        };
        for v in &self.vortices {
            if v.alpha != 0.0 {
                let hess = g.green_hess_x(x, v.point)?;
                h = h.add(hess.scale(-4.0 * PI * v.alpha));
            }
        }
        Ok(h)
    }

    /// Hypothesis guard: flags blow-up candidates within `2 r0` of a vortex.
    pub fn check_separation(&self, g: &GreenTable, q: &[Point], r0: f64) -> Result<()> {
        for (j, &qj) in q.iter().enumerate() {
            for v in &self.vortices {
                let d = g.domain().distance(qj, v.point);
                if d < 2.0 * r0 {
                    return Err(Error::HypothesisViolation(format!(
                        "blow-up point {j} is within 2·r0 = {} of a vortex (distance {d:.3e})",
                        2.0 * r0
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use approx::assert_relative_eq;

    fn torus_table() -> GreenTable {
        GreenTable::for_domain(DomainSpec::torus())
    }

    fn disk_table() -> GreenTable {
        GreenTable::for_domain(DomainSpec::disk())
    }

    #[test]
    fn trivial_weight_is_one() {
        let g = torus_table();
        let w = WeightSpec::uniform();
        for &x in &[Point::new(0.1, 0.2), Point::new(0.7, 0.9)] {
            assert_relative_eq!(w.h_eval(&g, x).unwrap(), 1.0, epsilon = 1e-15);
            let (grad, lap) = w.log_h_derivs(&g, x).unwrap();
            assert_eq!(grad.norm(), 0.0);
            assert_eq!(lap, 0.0);
        }
    }

    #[test]
    fn positive_vortex_zeroes_the_weight() {
        let g = torus_table();
        let p = Point::new(0.5, 0.5);
        let w = WeightSpec::new(
            SmoothPart::one(),
            vec![Vortex { point: p, alpha: 1.0 }],
            1.0,
        )
        .unwrap();
        assert_eq!(w.h_eval(&g, p).unwrap(), 0.0);
        assert!(w.h_eval(&g, Point::new(0.1, 0.1)).unwrap() > 0.0);
    }

    #[test]
    fn disk_center_vortex_gives_radius_squared() {
        // On the disk R(x,0) = 0, so h(x) = |x|² exactly for a unit vortex at 0.
        let g = disk_table();
        let w = WeightSpec::new(
            SmoothPart::one(),
            vec![Vortex { point: Point::new(0.0, 0.0), alpha: 1.0 }],
            1.0,
        )
        .unwrap();
        let h = w.h_eval(&g, Point::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(h, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn torus_vortex_laplacian_off_vortex() {
        // Δ log h = -4π Σ α_j on the torus away from the vortex points;
        // confirmed against finite differences of log h below.
        let g = torus_table();
        let w = WeightSpec::new(
            SmoothPart::one(),
            vec![Vortex { point: Point::new(0.7, 0.7), alpha: 2.0 }],
            1.0,
        )
        .unwrap();
        let x = Point::new(0.2, 0.1);
        let lap = w.lap_log_h(&g, x).unwrap();
        assert_relative_eq!(lap, -8.0 * PI, epsilon = 1e-12);

        let fd = fd_laplacian(&w, &g, x, 1e-4);
        assert_relative_eq!(lap, fd, max_relative = 1e-6);
    }

    #[test]
    fn cosine_smooth_part_laplacian() {
        // h* = exp(cos(2πx)/2): Δ log h* at the origin is -2π².
        let g = torus_table();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 }]),
            vec![],
            1.0,
        )
        .unwrap();
        let lap = w.lap_log_h(&g, Point::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(lap, -2.0 * PI * PI, epsilon = 1e-12);
        let fd = fd_laplacian(&w, &g, Point::new(0.0, 0.0), 1e-3);
        assert_relative_eq!(lap, fd, max_relative = 1e-6);
    }

    /// 4th-order central-difference Laplacian of log h — the independent
    /// oracle for the analytic derivatives.
    fn fd_laplacian(w: &WeightSpec, g: &GreenTable, x: Point, h: f64) -> f64 {
        let f = |p: Point| w.log_h(g, p).unwrap();
        let d2 = |e: Point| {
            (-f(x + e.scale(2.0)) + 16.0 * f(x + e) - 30.0 * f(x) + 16.0 * f(x - e)
                - f(x - e.scale(2.0)))
                / (12.0 * h * h)
        };
        d2(Point::new(h, 0.0)) + d2(Point::new(0.0, h))
    }

    #[test]
    fn derivatives_match_finite_differences_at_random_points() {
        use rand::Rng;
        use rand::SeedableRng;
        let g = torus_table();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![
                CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 },
                CosTerm { amp: 0.25, kx: 0.0, ky: 1.0, phase: 0.0 },
            ]),
            vec![Vortex { point: Point::new(0.55, 0.55), alpha: 1.5 }],
            1.0,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 50 {
            let x = Point::new(rng.random::<f64>(), rng.random::<f64>());
            if g.domain().distance(x, Point::new(0.55, 0.55)) < 0.05 {
                continue;
            }
            tested += 1;
            let (grad, lap) = w.log_h_derivs(&g, x).unwrap();
            let h = 1e-4;
            let f = |p: Point| w.log_h(&g, p).unwrap();
            let gx = (-f(Point::new(x.x + 2.0 * h, x.y)) + 8.0 * f(Point::new(x.x + h, x.y))
                - 8.0 * f(Point::new(x.x - h, x.y))
                + f(Point::new(x.x - 2.0 * h, x.y)))
                / (12.0 * h);
            let gy = (-f(Point::new(x.x, x.y + 2.0 * h)) + 8.0 * f(Point::new(x.x, x.y + h))
                - 8.0 * f(Point::new(x.x, x.y - h))
                + f(Point::new(x.x, x.y - 2.0 * h)))
                / (12.0 * h);
            assert_relative_eq!(grad.x, gx, epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!(grad.y, gy, epsilon = 1e-6, max_relative = 1e-6);
            let fd_lap = fd_laplacian(&w, &g, x, 1e-4);
            assert_relative_eq!(lap, fd_lap, epsilon = 1e-5, max_relative = 1e-6);
        }
    }

    #[test]
    fn negative_strength_vortex_is_singular_at_the_point() {
        let g = torus_table();
        let p = Point::new(0.5, 0.5);
        let w = WeightSpec::new(
            SmoothPart::one(),
            vec![Vortex { point: p, alpha: -0.5 }],
            1.0,
        )
        .unwrap();
        assert!(w.h_eval(&g, p).is_err());
        // Remark-range strengths below -1 are rejected outright.
        assert!(WeightSpec::new(
            SmoothPart::one(),
            vec![Vortex { point: p, alpha: -1.5 }],
            1.0
        )
        .is_err());
    }
}
