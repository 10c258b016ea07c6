//! Dirichlet Green function of the unit disk, in closed form via the image
//! point `y* = y/|y|²`:
//!
//! `G(x,y) = (1/2π) log(|y|·|x-y*| / |x-y|)`, `G(x,0) = -(1/2π) log|x|`.
//!
//! The regular part collapses to `R(x,y) = (1/4π) log S(x,y)` with
//! `S = |x|²|y|² - 2⟨x,y⟩ + 1`, which is symmetric, smooth on the closed
//! disk, and equals `(1-|y|²)²` on the diagonal (so the Robin function is
//! `(1/2π) log(1-|y|²)`). All derivatives below are exact differentiations of
//! these expressions.

use std::f64::consts::PI;

use super::{Mat2, Point, Vec2};

fn s_value(x: Point, y: Point) -> f64 {
    x.norm2() * y.norm2() - 2.0 * x.dot(y) + 1.0
}

pub fn green(x: Point, y: Point) -> f64 {
    let r2 = (x - y).norm2();
    0.5 * (s_value(x, y).ln() - r2.ln()) / (2.0 * PI)
}

pub fn regular(x: Point, y: Point) -> f64 {
    s_value(x, y).ln() / (4.0 * PI)
}

pub fn regular_grad_y(x: Point, y: Point) -> Vec2 {
    let s = s_value(x, y);
    let ds = y.scale(2.0 * x.norm2()) - x.scale(2.0);
    ds.scale(1.0 / (4.0 * PI * s))
}

pub fn regular_hess_y(x: Point, y: Point) -> Mat2 {
    let s = s_value(x, y);
    let ds = y.scale(2.0 * x.norm2()) - x.scale(2.0);
    let d2 = Mat2::symmetric(2.0 * x.norm2(), 0.0, 2.0 * x.norm2());
    // (S·∇²S - ∇S⊗∇S) / (4π S²)
    let outer = Mat2::symmetric(ds.x * ds.x, ds.x * ds.y, ds.y * ds.y);
    d2.scale(s).add(outer.scale(-1.0)).scale(1.0 / (4.0 * PI * s * s))
}

/// `∂²R/∂x_i∂y_j`.
pub fn regular_hess_xy(x: Point, y: Point) -> Mat2 {
    let s = s_value(x, y);
    let dsx = x.scale(2.0 * y.norm2()) - y.scale(2.0);
    let dsy = y.scale(2.0 * x.norm2()) - x.scale(2.0);
    // ∂²S/∂x_i∂y_j = 4 x_i y_j - 2 δ_ij
    let d2 = Mat2 {
        xx: 4.0 * x.x * y.x - 2.0,
        xy: 4.0 * x.x * y.y,
        yx: 4.0 * x.y * y.x,
        yy: 4.0 * x.y * y.y - 2.0,
    };
    let outer = Mat2 {
        xx: dsx.x * dsy.x,
        xy: dsx.x * dsy.y,
        yx: dsx.y * dsy.x,
        yy: dsx.y * dsy.y,
    };
    d2.scale(s).add(outer.scale(-1.0)).scale(1.0 / (4.0 * PI * s * s))
}

pub fn green_grad_y(x: Point, y: Point) -> Vec2 {
    let d = x - y;
    let r2 = d.norm2();
    // ∇_y [-(1/2π) ln|x-y|] = (1/2π) d / r²
    regular_grad_y(x, y) + d.scale(1.0 / (2.0 * PI * r2))
}

pub fn green_hess_y(x: Point, y: Point) -> Mat2 {
    let d = x - y;
    let r2 = d.norm2();
    // ∂²/∂y_i∂y_j [-(1/2π) ln r] = (1/2π)(2 d_i d_j - δ_ij r²)/r⁴... with sign:
    // ∂/∂y_j ln r = -d_j/r²; ∂/∂y_i(-d_j/r²) = δ_ij/r² - 2 d_i d_j/r⁴.
    let log_hess = Mat2::symmetric(
        1.0 / r2 - 2.0 * d.x * d.x / (r2 * r2),
        -2.0 * d.x * d.y / (r2 * r2),
        1.0 / r2 - 2.0 * d.y * d.y / (r2 * r2),
    );
    regular_hess_y(x, y).add(log_hess.scale(-1.0 / (2.0 * PI)))
}

pub fn green_hess_xy(x: Point, y: Point) -> Mat2 {
    let d = x - y;
    let r2 = d.norm2();
    // ∂²(ln r)/∂x_i∂y_j = (2 d_i d_j - δ_ij r²)/r⁴
    let log_mixed = Mat2 {
        xx: (2.0 * d.x * d.x - r2) / (r2 * r2),
        xy: 2.0 * d.x * d.y / (r2 * r2),
        yx: 2.0 * d.y * d.x / (r2 * r2),
        yy: (2.0 * d.y * d.y - r2) / (r2 * r2),
    };
    regular_hess_xy(x, y).add(log_mixed.scale(-1.0 / (2.0 * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pole_at_origin_reduces_to_log() {
        // G(x, 0) = -(1/2π) ln|x|: at |x| = 1/2 this is ln 2 / 2π.
        let g = green(Point::new(0.5, 0.0), Point::new(0.0, 0.0));
        assert_relative_eq!(g, std::f64::consts::LN_2 / (2.0 * PI), epsilon = 1e-14);
    }

    #[test]
    fn regular_part_vanishes_for_central_pole() {
        for &x in &[Point::new(0.3, 0.0), Point::new(-0.2, 0.7), Point::new(0.0, 0.0)] {
            assert_relative_eq!(regular(x, Point::new(0.0, 0.0)), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn vanishes_on_the_boundary() {
        let ys = [Point::new(0.3, 0.2), Point::new(-0.5, 0.1), Point::new(0.0, 0.9)];
        for i in 0..32 {
            let th = 2.0 * PI * i as f64 / 32.0;
            let x = Point::new(th.cos(), th.sin());
            for &y in &ys {
                assert!(green(x, y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = Point::new(0.3, -0.4);
        let b = Point::new(-0.1, 0.6);
        assert_relative_eq!(green(a, b), green(b, a), epsilon = 1e-14);
        assert_relative_eq!(regular(a, b), regular(b, a), epsilon = 1e-14);
    }

    #[test]
    fn robin_function_closed_form() {
        // R(y,y) = (1/2π) ln(1-|y|²), maximal at the centre.
        for &r in &[0.0, 0.3, 0.6, 0.9] {
            let y = Point::new(r, 0.0);
            assert_relative_eq!(
                regular(y, y),
                (1.0 - r * r).ln() / (2.0 * PI),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = Point::new(0.25, -0.15);
        let y = Point::new(-0.3, 0.35);
        let h = 1e-6;
        let g = green_grad_y(x, y);
        let fdx = (green(x, Point::new(y.x + h, y.y)) - green(x, Point::new(y.x - h, y.y)))
            / (2.0 * h);
        let fdy = (green(x, Point::new(y.x, y.y + h)) - green(x, Point::new(y.x, y.y - h)))
            / (2.0 * h);
        assert_relative_eq!(g.x, fdx, epsilon = 1e-8);
        assert_relative_eq!(g.y, fdy, epsilon = 1e-8);

        let hes = green_hess_y(x, y);
        let gp = green_grad_y(x, Point::new(y.x + h, y.y));
        let gm = green_grad_y(x, Point::new(y.x - h, y.y));
        assert_relative_eq!(hes.xx, (gp.x - gm.x) / (2.0 * h), epsilon = 1e-7);
        assert_relative_eq!(hes.yx, (gp.y - gm.y) / (2.0 * h), epsilon = 1e-7);

        let mixed = green_hess_xy(x, y);
        let gxp = green_grad_y(Point::new(x.x + h, x.y), y);
        let gxm = green_grad_y(Point::new(x.x - h, x.y), y);
        assert_relative_eq!(mixed.xx, (gxp.x - gxm.x) / (2.0 * h), epsilon = 1e-7);
        assert_relative_eq!(mixed.xy, (gxp.y - gxm.y) / (2.0 * h), epsilon = 1e-7);
    }

    #[test]
    fn harmonic_in_each_argument_off_pole() {
        let x = Point::new(0.25, -0.15);
        let y = Point::new(-0.3, 0.35);
        assert_relative_eq!(green_hess_y(x, y).trace(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(regular_hess_y(x, y).trace(), 0.0, epsilon = 1e-12);
    }
}
