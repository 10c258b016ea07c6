//! The configuration functional `f_m` and the derived scalar quantities:
//! `G_j^*`, `ℓ(q)`, `D(q)`, `Φ_j`, `f_{q,j}`, critical-point search, and the
//! domain partition `{M_j}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GreenTable, Mat2, Point, Vec2};
use crate::quad;
use crate::weight::WeightSpec;

/// Cell assignment rule for the partition `{M_j}`.
///
/// The partition only has to be disjoint, covering, and contain the `2r0`
/// ball around each point; Voronoi cells (under the domain metric) are the
/// canonical reproducible choice, and axis-aligned (Chebyshev-metric) cells
/// are exposed to test insensitivity of `D(q)` to the choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionRule {
    Voronoi,
    AxisAligned,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub rule: PartitionRule,
    pub r0: f64,
}

impl PartitionSpec {
    pub fn voronoi(r0: f64) -> Self {
        PartitionSpec { rule: PartitionRule::Voronoi, r0 }
    }
}

/// The `m` candidate concentration points with their partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupConfiguration {
    pub q: Vec<Point>,
    pub partition: PartitionSpec,
}

impl BlowupConfiguration {
    pub fn new(g: &GreenTable, w: &WeightSpec, q: Vec<Point>, partition: PartitionSpec) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidConfig("need at least one concentration point".into()));
        }
        let cfg = BlowupConfiguration { q, partition };
        cfg.validate(g, w)?;
        Ok(cfg)
    }

    /// Invariants: pairwise distinct, `≥ 4 r0` apart (so each Voronoi cell
    /// contains the `2 r0` ball), `≥ 2 r0` from every vortex, and `≥ 2 r0`
    /// from the disk boundary.
    pub fn validate(&self, g: &GreenTable, w: &WeightSpec) -> Result<()> {
        let domain = g.domain();
        let r0 = self.partition.r0;
        if !(r0 > 0.0 && r0 < 0.5) {
            return Err(Error::InvalidConfig(format!("r0 = {r0} must lie in (0, 1/2)")));
        }
        for (j, &qj) in self.q.iter().enumerate() {
            domain.check_contains(qj)?;
            if domain.boundary_distance(qj) < 2.0 * r0 {
                return Err(Error::HypothesisViolation(format!(
                    "point {j} is within 2·r0 of the domain boundary"
                )));
            }
            for (l, &ql) in self.q.iter().enumerate().skip(j + 1) {
                let d = match self.partition.rule {
                    PartitionRule::Voronoi => domain.distance(qj, ql),
                    PartitionRule::AxisAligned => {
                        let v = domain.displacement(qj, ql);
                        v.x.abs().max(v.y.abs())
                    }
                };
                if d < 4.0 * r0 {
                    return Err(Error::HypothesisViolation(format!(
                        "points {j} and {l} are {d:.4} apart; cells cannot contain the 2·r0 balls \
                         (need ≥ {})",
                        4.0 * r0
                    )));
                }
            }
        }
        w.check_separation(g, &self.q, r0)
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, g: &GreenTable, x: Point) -> usize {
        let domain = g.domain();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &qj) in self.q.iter().enumerate() {
            let d = match self.partition.rule {
                PartitionRule::Voronoi => domain.distance(x, qj),
                PartitionRule::AxisAligned => {
                    let v = domain.displacement(x, qj);
                    v.x.abs().max(v.y.abs())
                }
            };
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }
}

/// `G_j^*(x) = 8π R(x, q_j) + 8π Σ_{l≠j} G(x, q_l)`; smooth at `x = q_j`.
pub fn g_star(cfg: &BlowupConfiguration, g: &GreenTable, j: usize, x: Point) -> Result<f64> {
    let mut sum = 8.0 * PI * g.green_regular(x, cfg.q[j])?;
    for (l, &ql) in cfg.q.iter().enumerate() {
        if l != j {
            sum += 8.0 * PI * g.green(x, ql)?;
        }
    }
    Ok(sum)
}

pub fn g_star_grad(cfg: &BlowupConfiguration, g: &GreenTable, j: usize, x: Point) -> Result<Vec2> {
    // Gradient in x: R's first-argument gradient is ∇_y R(q_j, x) by symmetry.
    let mut grad = g.regular_grad_y(cfg.q[j], x)?.scale(8.0 * PI);
    for (l, &ql) in cfg.q.iter().enumerate() {
        if l != j {
            grad = grad + g.green_grad_x(x, ql)?.scale(8.0 * PI);
        }
    }
    Ok(grad)
}

/// Value, gradient (2m-vector) and Hessian (2m×2m) of the configuration
/// functional
/// `f_m(x_1..x_m) = Σ_j [log h(x_j) + 4π R(x_j,x_j)] + 4π Σ_{l≠j} G(x_l,x_j)`.
pub struct FmEval {
    pub value: f64,
    pub grad: Vec<Vec2>,
    pub hess: DMatrix<f64>,
}

impl FmEval {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g.norm2()).sum::<f64>().sqrt()
    }
}

pub fn f_m_eval(g: &GreenTable, w: &WeightSpec, points: &[Point]) -> Result<FmEval> {
    let m = points.len();
    let mut value = 0.0;
    let mut grad = vec![Vec2::default(); m];
    let mut hess = DMatrix::<f64>::zeros(2 * m, 2 * m);

    for (j, &xj) in points.iter().enumerate() {
        value += w.log_h(g, xj)? + 4.0 * PI * g.green_regular(xj, xj)?;
        let mut gj = w.grad_log_h(g, xj)? + g.robin_grad(xj)?.scale(4.0 * PI);
        let mut hjj = w.hess_log_h(g, xj)?.add(g.robin_hess(xj)?.scale(4.0 * PI));
        for (l, &xl) in points.iter().enumerate() {
            if l == j {
                continue;
            }
            value += 4.0 * PI * g.green(xl, xj)?;
            gj = gj + g.green_grad_x(xj, xl)?.scale(8.0 * PI);
            hjj = hjj.add(g.green_hess_x(xj, xl)?.scale(8.0 * PI));
            let mixed = g.green_hess_xy(xj, xl)?.scale(8.0 * PI);
            write_block(&mut hess, j, l, mixed);
        }
        grad[j] = gj;
        write_block(&mut hess, j, j, hjj);
    }
    Ok(FmEval { value, grad, hess })
}

fn write_block(h: &mut DMatrix<f64>, j: usize, l: usize, m: Mat2) {
    h[(2 * j, 2 * l)] = m.xx;
    h[(2 * j, 2 * l + 1)] = m.xy;
    h[(2 * j + 1, 2 * l)] = m.yx;
    h[(2 * j + 1, 2 * l + 1)] = m.yy;
}

/// Result of the Newton search for a critical configuration of `f_m`.
pub struct CriticalPoint {
    pub q: Vec<Point>,
    pub grad_norm: f64,
    pub hess: DMatrix<f64>,
    pub det: f64,
    pub nondegenerate: bool,
    pub iterations: usize,
}

/// Newton iteration on `∇f_m` from a seed configuration.
///
/// Non-degeneracy is declared when `|det D²f_m| > 1e-8 · s^{2m}` with `s` the
/// largest Hessian entry, guarding against false positives from quadrature
/// noise.
pub fn find_critical_configuration(
    g: &GreenTable,
    w: &WeightSpec,
    seed: &[Point],
    tol: f64,
    max_iter: usize,
) -> Result<CriticalPoint> {
    let m = seed.len();
    if m == 0 {
        return Err(Error::InvalidConfig("empty seed".into()));
    }
    let mut q: Vec<Point> = seed.to_vec();
    let min_sep = pairwise_min_distance(g, seed).unwrap_or(f64::INFINITY);

    let mut iterations = 0;
    loop {
        let eval = f_m_eval(g, w, &q)?;
        let gn = eval.grad_norm();
        if gn <= tol || iterations >= max_iter {
            if gn > tol {
                return Err(Error::NewtonDiverged(format!(
                    "critical-point search stalled at |grad| = {gn:.3e} after {iterations} iterations"
                )));
            }
            let scale = eval.hess.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            let det = eval.hess.clone().determinant();
            let nondegenerate = scale > 0.0 && det.abs() > 1e-8 * scale.powi(2 * m as i32);
            return Ok(CriticalPoint { q, grad_norm: gn, hess: eval.hess, det, nondegenerate, iterations });
        }

        let mut rhs = DVector::<f64>::zeros(2 * m);
        for (j, gr) in eval.grad.iter().enumerate() {
            rhs[2 * j] = -gr.x;
            rhs[2 * j + 1] = -gr.y;
        }
        let lu = eval.hess.clone().lu();
        let step = lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("singular Hessian in critical-point Newton".into()))?;
        for j in 0..m {
            q[j] = g
                .domain()
                .wrap(Point::new(q[j].x + step[2 * j], q[j].y + step[2 * j + 1]));
            g.domain().check_contains(q[j])?;
        }
        if let Some(d) = pairwise_min_distance(g, &q) {
            if d < 0.25 * min_sep {
                return Err(Error::NewtonDiverged(
                    "concentration points collided during the search".into(),
                ));
            }
        }
        iterations += 1;
    }
}

fn pairwise_min_distance(g: &GreenTable, q: &[Point]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (j, &a) in q.iter().enumerate() {
        for &b in &q[j + 1..] {
            let d = g.domain().distance(a, b);
            best = Some(best.map_or(d, |x: f64| x.min(d)));
        }
    }
    best
}

/// `ℓ(q) = Σ_j [Δ log h(q_j) + 8mπ - 2K(q_j)] h(q_j) e^{G_j^*(q_j)}`.
///
/// On the torus the bracket is `Δ log h + 8πm` (K ≡ 0); on the disk the
/// Dirichlet variant drops the `8πm` background term.
pub fn ell(cfg: &BlowupConfiguration, g: &GreenTable, w: &WeightSpec) -> Result<f64> {
    let m = cfg.m() as f64;
    let mut sum = 0.0;
    for (j, &qj) in cfg.q.iter().enumerate() {
        let bracket = match g.domain().kind {
            DomainKind::Torus => w.lap_log_h(g, qj)? + 8.0 * m * PI,
            DomainKind::Disk => w.lap_log_h(g, qj)?,
        };
        sum += bracket * w.h_eval(g, qj)? * g_star(cfg, g, j, qj)?.exp();
    }
    Ok(sum)
}

/// `Φ_j(x, q) = Σ_l 8π G(x, q_l) - G_j^*(q_j) + log h(x) - log h(q_j)`.
pub fn phi_exponent(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    j: usize,
    x: Point,
) -> Result<f64> {
    let mut sum = -g_star(cfg, g, j, cfg.q[j])?;
    for &ql in &cfg.q {
        sum += 8.0 * PI * g.green(x, ql)?;
    }
    sum += w.log_h(g, x)? - w.log_h(g, cfg.q[j])?;
    Ok(sum)
}

/// `f_{q,j}(x) = 8π[R(x,q_j) - R(q_j,q_j) + Σ_{l≠j}(G(x,q_l) - G(q_j,q_l))]
///  + log(h(x)/h(q_j))`.
///
/// Satisfies `e^{Φ_j(x)} = e^{f_{q,j}(x)} / |x - q_j|⁴` exactly in the flat
/// chart; the right-hand form is the cancellation-free way to evaluate the
/// `D(q)` integrand near `q_j`.
pub fn f_qj(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    j: usize,
    x: Point,
) -> Result<f64> {
    let qj = cfg.q[j];
    let mut sum = 8.0 * PI * (g.green_regular(x, qj)? - g.green_regular(qj, qj)?);
    for (l, &ql) in cfg.q.iter().enumerate() {
        if l != j {
            sum += 8.0 * PI * (g.green(x, ql)? - g.green(qj, ql)?);
        }
    }
    sum += w.log_h(g, x)? - w.log_h(g, cfg.q[j])?;
    Ok(sum)
}

/// Quadrature and extrapolation controls for [`d_of_q`].
#[derive(Clone, Copy, Debug)]
pub struct DQuadrature {
    /// Tensor-grid resolution for the outer (cell minus ball) region.
    pub outer_grid: usize,
    /// Angular nodes for annular integrals.
    pub n_angle: usize,
    /// Gauss nodes per radial panel.
    pub nodes_per_panel: usize,
    /// |log-slope| above `threshold·max(1,|D|)` marks `D(q)` undefined.
    pub slope_threshold: f64,
}

impl Default for DQuadrature {
    fn default() -> Self {
        DQuadrature { outer_grid: 512, n_angle: 256, nodes_per_panel: 12, slope_threshold: 1e-3 }
    }
}

/// Per-radius table and extrapolated value of the regularized outer integral.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DReport {
    /// Extrapolated constant term: `D(q)` when defined.
    pub value: f64,
    /// Fitted coefficient of `log r`; materially nonzero iff `ℓ(q) ≠ 0`.
    pub log_slope: f64,
    /// Fitted coefficient of `r²`.
    pub curvature: f64,
    /// `(r, D_r)` pairs.
    pub table: Vec<(f64, f64)>,
    /// False when the log slope says the `r → 0` limit diverges.
    pub defined: bool,
}

impl DReport {
    /// Finite-`r` regularized evaluation `a + b log r + c r²` of the fit.
    pub fn regularized_at(&self, r: f64) -> f64 {
        self.value + self.log_slope * r.ln() + self.curvature * r * r
    }
}

/// `D(q)`: for each `r` computes
/// `Σ_j h(q_j) e^{G_j^*(q_j)} (∫_{M_j \ U_{r_j}} e^{Φ_j} dμ - π/r_j²)` with
/// `r_j = r √(8 h(q_j) e^{G_j^*(q_j)})`, then extrapolates on `{1, log r, r²}`.
pub fn d_of_q(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    radii: &[f64],
    quadrature: DQuadrature,
) -> Result<DReport> {
    if radii.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "insufficient radii for extrapolation: need ≥ 3, got {}",
            radii.len()
        )));
    }
    let r0 = cfg.partition.r0;
    let m = cfg.m();

    // Per-bubble constants.
    let mut coeff = Vec::with_capacity(m);
    for j in 0..m {
        let c = w.h_eval(g, cfg.q[j])? * g_star(cfg, g, j, cfg.q[j])?.exp();
        coeff.push(c);
    }
    for &r in radii {
        if !(r > 0.0 && r <= r0) {
            return Err(Error::InvalidConfig(format!("radius {r} outside (0, r0]")));
        }
        for (j, &c) in coeff.iter().enumerate() {
            let rj = r * (8.0 * c).sqrt();
            // The annulus [r_j, r0] must contain the full cutoff transition
            // band [r0/2, r0] for the outer/annulus split to tile exactly.
            if rj > 0.5 * r0 {
                return Err(Error::InvalidConfig(format!(
                    "scaled inner radius r_{j} = {rj:.4} exceeds r0/2 = {}; shrink the radii list",
                    0.5 * r0
                )));
            }
        }
    }

    // r-independent outer integrals over M_j \ U_{r0/2..r0} (smooth cutoff).
    let outer: Vec<f64> = (0..m)
        .map(|j| outer_integral(cfg, g, w, j, quadrature))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut d_r = 0.0;
        for j in 0..m {
            let rj = r * (8.0 * coeff[j]).sqrt();
            let ann = annulus_integral(cfg, g, w, j, rj, quadrature)?;
            d_r += coeff[j] * (outer[j] + ann - PI / (rj * rj));
        }
        table.push((r, d_r));
    }

    // Least squares on {1, log r, r²}.
    let n = table.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut b = DVector::<f64>::zeros(n);
    for (i, &(r, v)) in table.iter().enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = r.ln();
        a[(i, 2)] = r * r;
        b[i] = v;
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Quadrature("singular normal equations in D(q) extrapolation".into()))?;
    let (value, log_slope, curvature) = (sol[0], sol[1], sol[2]);
    let defined = log_slope.abs() <= quadrature.slope_threshold * value.abs().max(1.0);
    Ok(DReport { value, log_slope, curvature, table, defined })
}

/// `∫_{M_j} e^{Φ_j} (1 - η_j) dμ` with `η_j` the smooth radial cutoff equal
/// to 1 inside `r0/2` and 0 outside `r0`: the r-independent part of the
/// `D(q)` integral.
fn outer_integral(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    j: usize,
    quadrature: DQuadrature,
) -> Result<f64> {
    let r0 = cfg.partition.r0;
    let domain = g.domain();
    let qj = cfg.q[j];
    let m = cfg.m();
    let integrand = |x: Point| -> f64 {
        if m > 1 && cfg.cell_of(g, x) != j {
            return 0.0;
        }
        let s = domain.distance(x, qj);
        let cut = 1.0 - quad::radial_cutoff(s, r0 / 2.0, r0);
        if cut == 0.0 {
            return 0.0;
        }
        cut * phi_exponent(cfg, g, w, j, x).map(f64::exp).unwrap_or(0.0)
    };
    match domain.kind {
        DomainKind::Torus => {
            let n = quadrature.outer_grid;
            let mut sum = 0.0;
            for iy in 0..n {
                for ix in 0..n {
                    sum += integrand(Point::new(ix as f64 / n as f64, iy as f64 / n as f64));
                }
            }
            Ok(sum / (n * n) as f64)
        }
        DomainKind::Disk => Ok(quad::integrate_disk(
            Point::new(0.0, 0.0),
            1.0,
            48,
            quadrature.n_angle,
            quadrature.nodes_per_panel,
            integrand,
        )),
    }
}

/// `∫ over r_j ≤ |x-q_j| ≤ r0 of e^{Φ_j} η_j`, evaluated in the
/// cancellation-free form `e^{f_{q,j}} / |x-q_j|⁴`.
fn annulus_integral(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    j: usize,
    rj: f64,
    quadrature: DQuadrature,
) -> Result<f64> {
    let r0 = cfg.partition.r0;
    let qj = cfg.q[j];
    let domain = g.domain();
    // The cutoff band [r0/2, r0] is smooth but not analytic; give it its own
    // uniform panels so Gauss quadrature converges there.
    let edges = quad::edges_geometric_then_uniform(rj, 0.5 * r0, r0, 10);
    let val = quad::integrate_annulus_edges(
        qj,
        &edges,
        quadrature.n_angle,
        quadrature.nodes_per_panel,
        |x| {
            let s = domain.distance(x, qj);
            let cut = quad::radial_cutoff(s, r0 / 2.0, r0);
            if cut == 0.0 {
                return 0.0;
            }
            let f = f_qj(cfg, g, w, j, x).unwrap_or(f64::NEG_INFINITY);
            cut * f.exp() / (s * s * s * s)
        },
    );
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::weight::{CosTerm, SmoothPart};
    use approx::assert_relative_eq;

    fn torus_g() -> GreenTable {
        GreenTable::for_domain(DomainSpec::torus())
    }

    fn disk_g() -> GreenTable {
        GreenTable::for_domain(DomainSpec::disk())
    }

    fn single(q: Point, r0: f64) -> BlowupConfiguration {
        BlowupConfiguration { q: vec![q], partition: PartitionSpec::voronoi(r0) }
    }

    #[test]
    fn g_star_vanishes_on_disk_with_central_pole() {
        let g = disk_g();
        let cfg = single(Point::new(0.0, 0.0), 0.2);
        for &x in &[Point::new(0.3, 0.1), Point::new(-0.5, 0.2)] {
            assert_relative_eq!(g_star(&cfg, &g, 0, x).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn g_star_is_translation_invariant_on_torus() {
        let g = torus_g();
        let a = single(Point::new(0.2, 0.3), 0.1);
        let b = single(Point::new(0.7, 0.9), 0.1);
        let va = g_star(&a, &g, 0, a.q[0]).unwrap();
        let vb = g_star(&b, &g, 0, b.q[0]).unwrap();
        assert_relative_eq!(va, vb, epsilon = 1e-12);
        assert_relative_eq!(
            va,
            8.0 * PI * g.green_regular(a.q[0], a.q[0]).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn g_star_two_points_unfolds_definition() {
        let g = torus_g();
        let q = vec![Point::new(0.2, 0.2), Point::new(0.7, 0.7)];
        let cfg = BlowupConfiguration { q: q.clone(), partition: PartitionSpec::voronoi(0.1) };
        let v = g_star(&cfg, &g, 0, q[0]).unwrap();
        let expect = 8.0 * PI * g.green_regular(q[0], q[0]).unwrap()
            + 8.0 * PI * g.green(q[0], q[1]).unwrap();
        assert_relative_eq!(v, expect, epsilon = 1e-13);
    }

    #[test]
    fn f1_gradient_vanishes_for_uniform_weight_on_torus() {
        let g = torus_g();
        let w = WeightSpec::uniform();
        for &q in &[Point::new(0.3, 0.3), Point::new(0.8, 0.1)] {
            let eval = f_m_eval(&g, &w, &[q]).unwrap();
            assert!(eval.grad_norm() < 1e-12, "grad = {:?}", eval.grad);
        }
    }

    #[test]
    fn f1_gradient_vanishes_at_disk_centre() {
        let g = disk_g();
        let w = WeightSpec::uniform();
        let eval = f_m_eval(&g, &w, &[Point::new(0.0, 0.0)]).unwrap();
        assert!(eval.grad_norm() < 1e-12);
        assert_relative_eq!(
            eval.value,
            4.0 * PI * g.green_regular(Point::new(0.0, 0.0), Point::new(0.0, 0.0)).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn f_m_gradient_matches_finite_differences() {
        let g = torus_g();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![
                CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 },
                CosTerm { amp: 0.25, kx: 0.0, ky: 1.0, phase: 0.0 },
            ]),
            vec![],
            1.0,
        )
        .unwrap();
        let pts = [Point::new(0.13, 0.22), Point::new(0.61, 0.72)];
        let eval = f_m_eval(&g, &w, &pts).unwrap();
        let h = 1e-4;
        let f = |p: &[Point]| f_m_eval(&g, &w, p).unwrap().value;
        for j in 0..2 {
            for dim in 0..2 {
                let mut pp = pts.to_vec();
                let mut pm = pts.to_vec();
                let mut p2p = pts.to_vec();
                let mut p2m = pts.to_vec();
                let bump = |p: &mut Point, s: f64| {
                    if dim == 0 {
                        p.x += s;
                    } else {
                        p.y += s;
                    }
                };
                bump(&mut pp[j], h);
                bump(&mut pm[j], -h);
                bump(&mut p2p[j], 2.0 * h);
                bump(&mut p2m[j], -2.0 * h);
                let fd = (-f(&p2p) + 8.0 * f(&pp) - 8.0 * f(&pm) + f(&p2m)) / (12.0 * h);
                let gj = if dim == 0 { eval.grad[j].x } else { eval.grad[j].y };
                assert_relative_eq!(gj, fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
        // Hessian against finite differences of the gradient.
        for j in 0..2 {
            let mut pp = pts.to_vec();
            let mut pm = pts.to_vec();
            pp[j].x += h;
            pm[j].x -= h;
            let gp = f_m_eval(&g, &w, &pp).unwrap();
            let gm = f_m_eval(&g, &w, &pm).unwrap();
            for l in 0..2 {
                let fd_x = (gp.grad[l].x - gm.grad[l].x) / (2.0 * h);
                let fd_y = (gp.grad[l].y - gm.grad[l].y) / (2.0 * h);
                assert_relative_eq!(eval.hess[(2 * l, 2 * j)], fd_x, epsilon = 1e-5, max_relative = 1e-4);
                assert_relative_eq!(eval.hess[(2 * l + 1, 2 * j)], fd_y, epsilon = 1e-5, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn f_m_is_symmetric_under_relabeling() {
        let g = torus_g();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![CosTerm { amp: 0.3, kx: 1.0, ky: 1.0, phase: 0.4 }]),
            vec![],
            1.0,
        )
        .unwrap();
        let a = [Point::new(0.1, 0.2), Point::new(0.6, 0.7)];
        let b = [a[1], a[0]];
        let ea = f_m_eval(&g, &w, &a).unwrap();
        let eb = f_m_eval(&g, &w, &b).unwrap();
        assert_relative_eq!(ea.value, eb.value, epsilon = 1e-12);
        assert_relative_eq!(ea.grad[0].x, eb.grad[1].x, epsilon = 1e-12);
        assert_relative_eq!(ea.grad[1].y, eb.grad[0].y, epsilon = 1e-12);
        assert_relative_eq!(ea.hess[(0, 0)], eb.hess[(2, 2)], epsilon = 1e-12);
        assert_relative_eq!(ea.hess[(0, 2)], eb.hess[(2, 0)], epsilon = 1e-12);
    }

    #[test]
    fn uniform_torus_weight_is_degenerate_everywhere() {
        let g = torus_g();
        let w = WeightSpec::uniform();
        let res = find_critical_configuration(&g, &w, &[Point::new(0.4, 0.6)], 1e-10, 20).unwrap();
        assert!(res.grad_norm <= 1e-10);
        assert!(!res.nondegenerate);
        assert_relative_eq!(res.det, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn cosine_weight_critical_point_at_origin() {
        let g = torus_g();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![
                CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 },
                CosTerm { amp: 0.25, kx: 0.0, ky: 1.0, phase: 0.0 },
            ]),
            vec![],
            1.0,
        )
        .unwrap();
        let res =
            find_critical_configuration(&g, &w, &[Point::new(0.1, 0.1)], 1e-10, 40).unwrap();
        let q = g.domain().displacement(res.q[0], Point::new(0.0, 0.0));
        assert!(q.norm() < 1e-9, "critical point at {:?}", res.q[0]);
        assert!(res.nondegenerate);
        // Hessian of log h* at 0 is diag(-2π², -π²).
        assert_relative_eq!(res.hess[(0, 0)], -2.0 * PI * PI, epsilon = 1e-9);
        assert_relative_eq!(res.hess[(1, 1)], -PI * PI, epsilon = 1e-9);
    }

    #[test]
    fn disk_critical_point_at_centre() {
        let g = disk_g();
        let w = WeightSpec::uniform();
        let res =
            find_critical_configuration(&g, &w, &[Point::new(0.2, 0.1)], 1e-10, 40).unwrap();
        assert!(res.q[0].norm() < 1e-9);
        assert!(res.nondegenerate);
    }

    #[test]
    fn ell_on_disk_with_uniform_weight_vanishes() {
        let g = disk_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.0, 0.0), 0.2);
        assert_relative_eq!(ell(&cfg, &g, &w).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ell_on_torus_with_uniform_weight() {
        // bracket = 8π, h = 1, so ℓ = 8π e^{8π R(0,0)}.
        let g = torus_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.0, 0.0), 0.1);
        let r00 = g.green_regular(Point::new(0.0, 0.0), Point::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(
            ell(&cfg, &g, &w).unwrap(),
            8.0 * PI * (8.0 * PI * r00).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ell_scales_linearly_in_h() {
        let g = torus_g();
        let base = WeightSpec::new(
            SmoothPart::ExpCos(vec![CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 }]),
            vec![],
            1.0,
        )
        .unwrap();
        let scaled = WeightSpec::new(
            SmoothPart::ExpCos(vec![
                CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 },
                // adding a constant c to the exponent multiplies h by e^c
                CosTerm { amp: 0.7, kx: 0.0, ky: 0.0, phase: 0.0 },
            ]),
            vec![],
            1.0,
        )
        .unwrap();
        let cfg = single(Point::new(0.0, 0.0), 0.1);
        let l0 = ell(&cfg, &g, &base).unwrap();
        let l1 = ell(&cfg, &g, &scaled).unwrap();
        assert_relative_eq!(l1, l0 * 0.7_f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn phi_and_fqj_satisfy_the_flat_chart_identity() {
        let g = torus_g();
        let w = WeightSpec::new(
            SmoothPart::ExpCos(vec![CosTerm { amp: 0.4, kx: 1.0, ky: 2.0, phase: 0.1 }]),
            vec![],
            1.0,
        )
        .unwrap();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.2, 0.25), Point::new(0.7, 0.75)],
            partition: PartitionSpec::voronoi(0.1),
        };
        for &x in &[Point::new(0.25, 0.3), Point::new(0.15, 0.18), Point::new(0.4, 0.4)] {
            let phi = phi_exponent(&cfg, &g, &w, 0, x).unwrap();
            let f = f_qj(&cfg, &g, &w, 0, x).unwrap();
            let r = g.domain().distance(x, cfg.q[0]);
            // Φ + 4 log|x - q_j| - f_{q,j} = 0
            assert_relative_eq!(phi + 4.0 * r.ln() - f, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn fqj_vanishes_at_its_own_point() {
        let g = disk_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.1, -0.2), 0.2);
        assert_relative_eq!(f_qj(&cfg, &g, &w, 0, cfg.q[0]).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn disk_phi_reduces_to_green_pole() {
        // h ≡ 1, m = 1, q = 0: Φ₁(x) = 8π G_Ω(x,0) = -4 log|x|.
        let g = disk_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.0, 0.0), 0.2);
        for &x in &[Point::new(0.3, 0.0), Point::new(-0.2, 0.4)] {
            let phi = phi_exponent(&cfg, &g, &w, 0, x).unwrap();
            assert_relative_eq!(phi, -4.0 * x.norm().ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn d_of_q_disk_uniform_is_minus_pi() {
        // ∫_{r₁<|x|<1} |x|^{-4} dx - π/r₁² = -π exactly, for every radius.
        let g = disk_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.0, 0.0), 0.2);
        let radii = [0.03, 0.02, 0.012, 0.008, 0.005];
        let rep = d_of_q(&cfg, &g, &w, &radii, DQuadrature::default()).unwrap();
        assert!(rep.defined, "log slope {}", rep.log_slope);
        assert_relative_eq!(rep.value, -PI, epsilon = 1e-3);
        for &(r, v) in &rep.table {
            // Closed-form annulus value at every radius.
            let rj = r * 8.0_f64.sqrt();
            let exact = PI * (1.0 / (rj * rj) - 1.0) - PI / (rj * rj);
            assert_relative_eq!(v, exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn d_of_q_needs_at_least_three_radii() {
        let g = disk_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.0, 0.0), 0.2);
        assert!(d_of_q(&cfg, &g, &w, &[0.05], DQuadrature::default()).is_err());
    }

    #[test]
    fn d_of_q_torus_uniform_flags_log_divergence() {
        // ℓ ≠ 0 on the torus with h ≡ 1: slope ≈ -(π/2) ℓ, D undefined.
        let g = torus_g();
        let w = WeightSpec::uniform();
        let cfg = single(Point::new(0.5, 0.5), 0.1);
        let radii = [0.02, 0.012, 0.008, 0.005, 0.003];
        let quadr = DQuadrature { outer_grid: 256, ..DQuadrature::default() };
        let rep = d_of_q(&cfg, &g, &w, &radii, quadr).unwrap();
        assert!(!rep.defined);
        let l = ell(&cfg, &g, &w).unwrap();
        assert_relative_eq!(rep.log_slope, -0.5 * PI * l, max_relative = 0.02);
    }

    #[test]
    fn configuration_validation_rejects_bad_setups() {
        let g = torus_g();
        let w = WeightSpec::uniform();
        // Too close for the 2 r0 cell-containment condition.
        assert!(BlowupConfiguration::new(
            &g,
            &w,
            vec![Point::new(0.2, 0.2), Point::new(0.25, 0.2)],
            PartitionSpec::voronoi(0.1),
        )
        .is_err());
        // Disk: too close to the boundary.
        let gd = disk_g();
        assert!(BlowupConfiguration::new(
            &gd,
            &w,
            vec![Point::new(0.95, 0.0)],
            PartitionSpec::voronoi(0.2),
        )
        .is_err());
    }
}
