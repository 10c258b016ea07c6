//! Domains, metric data, and Green functions with regular parts and
//! derivatives up to second order.
//!
//! Two flat domains are supported: the unit-volume square torus and the unit
//! disk. Both have Gaussian curvature zero and a trivial global chart, so the
//! isothermal-chart machinery degenerates to the identity and all formulas
//! below are Euclidean.

pub mod disk;
pub mod special;
pub mod torus;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the domain, also used as a 2-vector for gradients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

pub type Vec2 = Point;

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Symmetric-in-use 2x2 matrix for Hessians and mixed second derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl Mat2 {
    pub fn symmetric(xx: f64, xy: f64, yy: f64) -> Self {
        Mat2 { xx, xy, yx: xy, yy }
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn add(self, o: Mat2) -> Mat2 {
        Mat2 {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yx: self.yx + o.yx,
            yy: self.yy + o.yy,
        }
    }

    pub fn scale(self, s: f64) -> Mat2 {
        Mat2 {
            xx: self.xx * s,
            xy: self.xy * s,
            yx: self.yx * s,
            yy: self.yy * s,
        }
    }

    pub fn transpose(self) -> Mat2 {
        Mat2 {
            xx: self.xx,
            xy: self.yx,
            yx: self.xy,
            yy: self.yy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    Torus,
    Disk,
}

/// Flat unit-volume torus `[0,1)²` or unit disk `|x| ≤ 1`.
///
/// Side lengths / radius are fixed so that the torus volume is exactly 1 and
/// the disk radius is exactly 1; the curvature is identically zero for both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
}

impl DomainSpec {
    pub fn torus() -> Self {
        DomainSpec { kind: DomainKind::Torus }
    }

    pub fn disk() -> Self {
        DomainSpec { kind: DomainKind::Disk }
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::Torus => 1.0,
            DomainKind::Disk => std::f64::consts::PI,
        }
    }

    /// Gaussian curvature; identically zero on both supported domains.
    pub fn gaussian_curvature(&self, _x: Point) -> f64 {
        0.0
    }

    pub fn contains(&self, p: Point) -> bool {
        match self.kind {
            DomainKind::Torus => true,
            DomainKind::Disk => p.norm2() <= 1.0 + 1e-12,
        }
    }

    pub fn check_contains(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(p))
        }
    }

    /// Canonical representative: torus points wrapped into `[0,1)²`.
    pub fn wrap(&self, p: Point) -> Point {
        match self.kind {
            DomainKind::Torus => Point::new(p.x - p.x.floor(), p.y - p.y.floor()),
            DomainKind::Disk => p,
        }
    }

    /// Displacement `x - y`; on the torus the nearest-image representative in
    /// `[-1/2, 1/2)²`.
    pub fn displacement(&self, x: Point, y: Point) -> Vec2 {
        match self.kind {
            DomainKind::Torus => {
                let wrap_half = |t: f64| t - (t + 0.5).floor();
                Point::new(wrap_half(x.x - y.x), wrap_half(x.y - y.y))
            }
            DomainKind::Disk => x - y,
        }
    }

    pub fn distance(&self, x: Point, y: Point) -> f64 {
        self.displacement(x, y).norm()
    }

    /// Distance from `p` to the domain boundary (torus: +∞, it has none).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self.kind {
            DomainKind::Torus => f64::INFINITY,
            DomainKind::Disk => 1.0 - p.norm(),
        }
    }
}

/// Evaluation method backing a [`GreenTable`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GreenMethod {
    /// Short-range real-space image sum plus long-range Fourier sum.
    /// Default on the torus: uniform accuracy down to tiny separations.
    EwaldSplit { beta: f64 },
    /// Fourier series summed exactly in the transverse coordinate and
    /// truncated at `k_max` in the other; cross-check mode on the torus.
    FourierTruncation { k_max: usize },
    /// Exact closed form: image formula on the disk, log-product form on the
    /// torus.
    ClosedForm,
}

impl GreenMethod {
    pub fn default_for(domain: DomainSpec) -> Self {
        match domain.kind {
            DomainKind::Torus => GreenMethod::EwaldSplit { beta: 4.0 },
            DomainKind::Disk => GreenMethod::ClosedForm,
        }
    }
}

enum Evaluator {
    Torus(torus::TorusGreen),
    Disk,
}

/// Immutable Green-function evaluator for one domain and method.
///
/// All evaluators are pure; a constructed table can be shared freely across
/// threads.
pub struct GreenTable {
    domain: DomainSpec,
    method: GreenMethod,
    eval: Evaluator,
}

/// Separations below this are treated as coincident for `G` evaluations.
const COINCIDENCE_TOL: f64 = 1e-13;

impl GreenTable {
    pub fn new(domain: DomainSpec, method: GreenMethod) -> Result<Self> {
        let eval = match domain.kind {
            DomainKind::Torus => Evaluator::Torus(torus::TorusGreen::new(method)?),
            DomainKind::Disk => {
                if !matches!(method, GreenMethod::ClosedForm) {
                    return Err(Error::InvalidConfig(
                        "disk Green function is only available in closed form".into(),
                    ));
                }
                Evaluator::Disk
            }
        };
        Ok(GreenTable { domain, method, eval })
    }

    pub fn for_domain(domain: DomainSpec) -> Self {
        GreenTable::new(domain, GreenMethod::default_for(domain)).expect("default method is valid")
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn method(&self) -> GreenMethod {
        self.method
    }

    fn check_pair(&self, x: Point, y: Point) -> Result<()> {
        self.domain.check_contains(x)?;
        self.domain.check_contains(y)
    }

    fn check_distinct(&self, x: Point, y: Point) -> Result<()> {
        if self.domain.distance(x, y) < COINCIDENCE_TOL {
            Err(Error::SingularEvaluation(x, "Green function evaluated on the diagonal"))
        } else {
            Ok(())
        }
    }

    /// `G(x, y)`: zero-mean lattice Green function on the torus, Dirichlet
    /// Green function on the disk.
    pub fn green(&self, x: Point, y: Point) -> Result<f64> {
        self.check_pair(x, y)?;
        self.check_distinct(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.value(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::green(x, y),
        })
    }

    /// Regular part `R(x, y) = G(x, y) + (1/2π) log|x - y|`, with the log
    /// singularity cancelled analytically; the diagonal `x = y` is allowed
    /// and yields the Robin function.
    pub fn green_regular(&self, x: Point, y: Point) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.regular_value(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::regular(x, y),
        })
    }

    /// `∇_y G(x, y)`.
    pub fn green_grad_y(&self, x: Point, y: Point) -> Result<Vec2> {
        self.check_pair(x, y)?;
        self.check_distinct(x, y)?;
        Ok(match &self.eval {
            // G = g(x-y): ∇_y = -g'(d)
            Evaluator::Torus(t) => -t.grad(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::green_grad_y(x, y),
        })
    }

    /// `∇_x G(x, y)`; by symmetry of `G` this is `∇_y G(y, x)`.
    pub fn green_grad_x(&self, x: Point, y: Point) -> Result<Vec2> {
        self.green_grad_y(y, x)
    }

    /// Hessian of `G` in the second argument.
    pub fn green_hess_y(&self, x: Point, y: Point) -> Result<Mat2> {
        self.check_pair(x, y)?;
        self.check_distinct(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.hess(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::green_hess_y(x, y),
        })
    }

    pub fn green_hess_x(&self, x: Point, y: Point) -> Result<Mat2> {
        self.green_hess_y(y, x)
    }

    /// Mixed second derivative `∂²G/∂x_i ∂y_j`.
    pub fn green_hess_xy(&self, x: Point, y: Point) -> Result<Mat2> {
        self.check_pair(x, y)?;
        self.check_distinct(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.hess(self.domain.displacement(x, y)).scale(-1.0),
            Evaluator::Disk => disk::green_hess_xy(x, y),
        })
    }

    /// `∇_y R(x, y)`; diagonal allowed.
    pub fn regular_grad_y(&self, x: Point, y: Point) -> Result<Vec2> {
        self.check_pair(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => -t.regular_grad(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::regular_grad_y(x, y),
        })
    }

    pub fn regular_hess_y(&self, x: Point, y: Point) -> Result<Mat2> {
        self.check_pair(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.regular_hess(self.domain.displacement(x, y)),
            Evaluator::Disk => disk::regular_hess_y(x, y),
        })
    }

    pub fn regular_hess_xy(&self, x: Point, y: Point) -> Result<Mat2> {
        self.check_pair(x, y)?;
        Ok(match &self.eval {
            Evaluator::Torus(t) => t.regular_hess(self.domain.displacement(x, y)).scale(-1.0),
            Evaluator::Disk => disk::regular_hess_xy(x, y),
        })
    }

    /// Robin function `R(x, x)`.
    pub fn robin(&self, x: Point) -> Result<f64> {
        self.green_regular(x, x)
    }

    /// Gradient of the Robin function `t(x) = R(x, x)`.
    ///
    /// By the symmetry `R(x,y) = R(y,x)`, `∇t = 2 ∇_y R(x, y)|_{y=x}`.
    pub fn robin_grad(&self, x: Point) -> Result<Vec2> {
        Ok(self.regular_grad_y(x, x)?.scale(2.0))
    }

    /// Hessian of the Robin function:
    /// `∂²t/∂x_i∂x_k = 2 (∂²R/∂x_i∂y_k + ∂²R/∂y_i∂y_k)|_{y=x}`.
    pub fn robin_hess(&self, x: Point) -> Result<Mat2> {
        let mixed = self.regular_hess_xy(x, x)?;
        let hess_y = self.regular_hess_y(x, x)?;
        Ok(mixed.add(hess_y).scale(2.0))
    }
}
