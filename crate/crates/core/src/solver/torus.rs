//! Spectral Newton solver for the torus equation `Δũ + ρ(h e^{ũ} - 1) = 0`
//! and the amplitude-parametrised continuation of the bubbling branch.
//!
//! Linearisations `Δ + ρ h e^{ũ}` are solved by GMRES preconditioned with the
//! spectral `(Δ - s)^{-1}`; the potential is a thin spike of integral `ρ`, so
//! the preconditioned operator is identity plus a numerically low-rank part
//! and iteration counts stay modest even deep in the bubbling regime.

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GreenTable, Point};
use crate::quantities::BlowupConfiguration;
use crate::solver::ansatz;
use crate::solver::extract::{extract_torus, ExtractOptions};
use crate::solver::linsolve::{gmres, GmresOptions};
use crate::solver::spectral::Spectral2d;
use crate::solver::{BranchRecord, FieldData, SolutionField};
use crate::weight::WeightSpec;

pub struct TorusProblem {
    pub n: usize,
    pub spectral: Spectral2d,
    /// Weight `h` sampled on the grid.
    pub h: Vec<f64>,
}

/// Hard floor on bubble-core resolution: below ~2 cells per core radius the
/// sub-grid height fit degrades and the tool refuses to continue.
pub const REFUSAL_CORE_CELLS: f64 = 2.0;

/// Newton step size below which the iterate is converged; the spectral
/// residual cannot be driven much past its rounding floor, the step can.
const STEP_TOL: f64 = 1e-9;

/// Sup-norm clamp on Newton steps.
const MAX_STEP: f64 = 3.0;

impl TorusProblem {
    pub fn new(g: &GreenTable, w: &WeightSpec, n: usize) -> Result<Self> {
        if g.domain().kind != DomainKind::Torus {
            return Err(Error::InvalidConfig("spectral solver requires the torus domain".into()));
        }
        let mut h = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let p = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
                h[iy * n + ix] = w.h_eval(g, p)?;
            }
        }
        Ok(TorusProblem { n, spectral: Spectral2d::new(n), h })
    }

    pub fn grid_point(&self, idx: usize) -> Point {
        Point::new((idx % self.n) as f64 / self.n as f64, (idx / self.n) as f64 / self.n as f64)
    }

    /// Index of the grid point nearest to `p`.
    pub fn nearest_index(&self, p: Point) -> usize {
        let wrap = |t: f64| t - t.floor();
        let ix = (wrap(p.x) * self.n as f64).round() as usize % self.n;
        let iy = (wrap(p.y) * self.n as f64).round() as usize % self.n;
        iy * self.n + ix
    }

    /// `∫_M h e^{u} dμ` (grid mean on the unit-volume torus).
    pub fn mass(&self, u: &[f64]) -> f64 {
        self.h.iter().zip(u).map(|(&h, &ui)| h * ui.exp()).sum::<f64>() / u.len() as f64
    }

    /// Pointwise residual `Δu + ρ(h e^u - 1)`.
    pub fn residual_field(&self, u: &[f64], rho: f64) -> Vec<f64> {
        let mut r = self.spectral.laplacian(u);
        for i in 0..r.len() {
            r[i] += rho * (self.h[i] * u[i].exp() - 1.0);
        }
        r
    }

    /// Discrete L²(M) norm (unit volume).
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        (f.iter().map(|&x| x * x).sum::<f64>() / f.len() as f64).sqrt()
    }

    /// Solve `(Δ + diag(w)) x = b` by preconditioned GMRES.
    pub fn solve_linear(&self, wvec: &[f64], b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
        let shift = (wvec.iter().sum::<f64>() / wvec.len() as f64).max(1.0);
        let apply = |v: &[f64]| {
            let mut out = self.spectral.laplacian(v);
            for i in 0..out.len() {
                out[i] += wvec[i] * v[i];
            }
            out
        };
        let precond = |v: &[f64]| self.spectral.solve_shifted(v, shift);
        let opts = GmresOptions { tol_rel: 1e-11, restart: 40, max_iters: 1600, stagnation: 0.98 };
        let (x, _iters, res) = gmres(apply, precond, b, x0, &opts)?;
        // Inexact-Newton floor: a stalled solve is still a usable step as
        // long as the relative residual is small; degenerate configurations
        // (exact translation invariance) stall around 1e-6.
        if res > 1e-3 {
            return Err(Error::LinearSolve(format!(
                "GMRES stalled at relative residual {res:.3e}"
            )));
        }
        Ok(x)
    }

    /// Newton iteration at fixed `ρ`, with a sup-norm step clamp and
    /// backtracking line search. Degenerate configurations (translation
    /// invariance) make the linearisation near-singular; the clamp keeps
    /// steps from running away along the flat directions.
    pub fn newton_solve(
        &self,
        u0: &[f64],
        rho: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let mut u = u0.to_vec();
        let mut last = f64::INFINITY;
        let mut increases = 0;
        for iter in 0..max_iter {
            let f = self.residual_field(&u, rho);
            let norm = self.l2_norm(&f);
            if norm <= tol {
                return Ok((u, iter, norm));
            }
            if norm > 2.0 * last {
                increases += 1;
                if increases >= 3 {
                    return Err(Error::NewtonDiverged(format!(
                        "residual increased three times (now {norm:.3e})"
                    )));
                }
            } else {
                increases = 0;
            }
            last = norm;
            let wvec: Vec<f64> = self.h.iter().zip(&u).map(|(&h, &ui)| rho * h * ui.exp()).collect();
            let rhs: Vec<f64> = f.iter().map(|&x| -x).collect();
            let mut step = self.solve_linear(&wvec, &rhs, None)?;
            let mut step_max = step.iter().fold(0.0_f64, |a, &s| a.max(s.abs()));
            if step_max > MAX_STEP {
                let scale = MAX_STEP / step_max;
                for s in step.iter_mut() {
                    *s *= scale;
                }
                step_max = MAX_STEP;
            }
            // Backtracking: halve while the residual grows.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..5 {
                let trial: Vec<f64> =
                    u.iter().zip(&step).map(|(&ui, &si)| ui + alpha * si).collect();
                let trial_norm = self.l2_norm(&self.residual_field(&trial, rho));
                if trial_norm <= norm * 1.0001 || alpha <= 1.0 / 16.0 {
                    u = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonDiverged("line search failed".into()));
            }
            // The spectral residual floors at FFT rounding noise on the
            // large core values; a vanishing Newton step is the sharper
            // convergence signal.
            if alpha * step_max <= STEP_TOL {
                let f = self.residual_field(&u, rho);
                return Ok((u, iter + 1, self.l2_norm(&f)));
            }
        }
        Err(Error::NewtonDiverged(format!(
            "fixed-ρ Newton did not reach tol {tol:.1e} in {max_iter} iterations"
        )))
    }

    /// Bordered Newton for the augmented system `{F(u, ρ) = 0, u(pin) = val}`
    /// with unknowns `(u, ρ)`. Returns `(u, ρ, iterations, residual_norm)`.
    pub fn solve_pinned(
        &self,
        u0: &[f64],
        rho0: f64,
        pin_idx: usize,
        pin_val: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, f64, usize, f64)> {
        let mut u = u0.to_vec();
        let mut rho = rho0;
        let mut last = f64::INFINITY;
        let mut increases = 0;
        for iter in 0..max_iter {
            let f = self.residual_field(&u, rho);
            let pin = u[pin_idx] - pin_val;
            let norm = self.l2_norm(&f).hypot(pin);
            if norm <= tol {
                return Ok((u, rho, iter, self.l2_norm(&f)));
            }
            if norm > 2.0 * last {
                increases += 1;
                if increases >= 3 {
                    return Err(Error::NewtonDiverged(format!(
                        "pinned residual increased three times (now {norm:.3e})"
                    )));
                }
            } else {
                increases = 0;
            }
            last = norm;

            let wvec: Vec<f64> = self.h.iter().zip(&u).map(|(&h, &ui)| rho * h * ui.exp()).collect();
            // Block elimination: a = J⁻¹F, b = J⁻¹ ∂F/∂ρ.
            let a = self.solve_linear(&wvec, &f, None)?;
            let drho: Vec<f64> = self.h.iter().zip(&u).map(|(&h, &ui)| h * ui.exp() - 1.0).collect();
            let b = self.solve_linear(&wvec, &drho, None)?;
            if b[pin_idx].abs() < 1e-300 {
                return Err(Error::LinearSolve("pinning row decoupled from ρ".into()));
            }
            let delta_rho = (pin - a[pin_idx]) / b[pin_idx];
            let mut step_max = delta_rho.abs();
            for i in 0..u.len() {
                let du = -a[i] - delta_rho * b[i];
                u[i] += du;
                step_max = step_max.max(du.abs());
            }
            rho += delta_rho;
            if step_max <= STEP_TOL {
                let f = self.residual_field(&u, rho);
                return Ok((u, rho, iter + 1, self.l2_norm(&f)));
            }
        }
        Err(Error::NewtonDiverged(format!(
            "pinned Newton did not reach tol {tol:.1e} in {max_iter} iterations"
        )))
    }
}

/// Outcome of a branch continuation; `aborted` carries the reason when the
/// schedule could not be completed (records hold the last good steps).
pub struct ContinuationOutcome {
    pub records: Vec<BranchRecord>,
    pub aborted: Option<String>,
}

/// Amplitude-parametrised continuation along an increasing λ schedule.
///
/// Each target pins the field value at the grid point nearest `q₁` to the
/// ansatz prediction for that height, making `ρ` an output and sidestepping
/// any fold of `ρ(λ)`. Failed steps are retried after bisecting the λ step.
pub fn continue_branch(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    problem: &TorusProblem,
    schedule: &[f64],
    delta: f64,
    tol: f64,
) -> Result<ContinuationOutcome> {
    let mut records = Vec::new();
    if schedule.is_empty() {
        return Ok(ContinuationOutcome { records, aborted: None });
    }
    if schedule.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidConfig("λ schedule must be strictly increasing".into()));
    }
    let pin_idx = problem.nearest_index(cfg.q[0]);
    let pin_point = problem.grid_point(pin_idx);

    // Resolution refusal, checked before any expensive work.
    let lambda_max = *schedule.last().unwrap();
    let h_q1 = w.h_eval(g, cfg.q[0])?;
    let rho_est = 8.0 * std::f64::consts::PI * cfg.m() as f64;
    let core = (8.0 / (rho_est * h_q1)).sqrt() * (-lambda_max / 2.0).exp();
    let cells = core * problem.n as f64;
    if cells < REFUSAL_CORE_CELLS {
        return Err(Error::UnderResolved(format!(
            "λ = {lambda_max} puts ~{cells:.1} grid cells on the bubble core (< {REFUSAL_CORE_CELLS}); \
             increase the grid or lower the schedule"
        )));
    }

    let first = ansatz::bubble_ansatz(cfg, g, w, problem, schedule[0])?;
    let mut u = match first.data {
        FieldData::TorusGrid { values, .. } => values,
        FieldData::DiskRadial { .. } => unreachable!(),
    };
    let mut rho = first.rho;

    let opts = ExtractOptions { delta, ..ExtractOptions::default() };
    let mut idx = 0;
    let mut last_lambda: Option<f64> = None;
    let mut bisections = 0;
    while idx < schedule.len() {
        let target = schedule[idx];
        let pin_val = ansatz::pin_value(cfg, g, w, target, pin_point)?;
        match problem.solve_pinned(&u, rho, pin_idx, pin_val, tol, 30) {
            Ok((u_new, rho_new, iters, res_norm)) => {
                u = u_new;
                rho = rho_new;
                let record = extract_torus(
                    problem, g, w, cfg, &u, rho, target, iters, res_norm, &opts,
                )?;
                records.push(record);
                last_lambda = Some(target);
                idx += 1;
                bisections = 0;
            }
            Err(e) => {
                if bisections >= 3 {
                    return Ok(ContinuationOutcome {
                        records,
                        aborted: Some(format!("persistent step failure at λ = {target}: {e}")),
                    });
                }
                // Bisect: solve an intermediate height first.
                let base = last_lambda.unwrap_or(target - 0.5);
                let mid = 0.5 * (base + target);
                let mid_pin = ansatz::pin_value(cfg, g, w, mid, pin_point)?;
                match problem.solve_pinned(&u, rho, pin_idx, mid_pin, tol, 30) {
                    Ok((u_mid, rho_mid, _, _)) => {
                        u = u_mid;
                        rho = rho_mid;
                        bisections += 1;
                    }
                    Err(e2) => {
                        return Ok(ContinuationOutcome {
                            records,
                            aborted: Some(format!(
                                "step to λ = {target} failed ({e}); bisection to {mid} also failed ({e2})"
                            )),
                        });
                    }
                }
            }
        }
    }
    Ok(ContinuationOutcome { records, aborted: None })
}

/// Convenience: solution field wrapper for a converged state.
pub fn to_field(problem: &TorusProblem, u: Vec<f64>, rho: f64) -> SolutionField {
    SolutionField { data: FieldData::TorusGrid { n: problem.n, values: u }, rho }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use approx::assert_relative_eq;

    fn torus() -> GreenTable {
        GreenTable::for_domain(DomainSpec::torus())
    }

    #[test]
    fn zero_field_is_exact_solution_for_uniform_weight() {
        let g = torus();
        let w = WeightSpec::uniform();
        let p = TorusProblem::new(&g, &w, 32).unwrap();
        let u = vec![0.0; 32 * 32];
        let r = p.residual_field(&u, 3.7);
        assert!(p.l2_norm(&r) < 1e-14);
    }

    #[test]
    fn newton_finds_trivial_solution_subcritical() {
        let g = torus();
        let w = WeightSpec::uniform();
        let p = TorusProblem::new(&g, &w, 32).unwrap();
        let u0 = vec![0.1; 32 * 32];
        let (u, iters, _) = p.newton_solve(&u0, 1.0, 1e-12, 30).unwrap();
        assert!(iters <= 10);
        assert!(u.iter().all(|&x| x.abs() < 1e-10));
    }

    #[test]
    fn residual_norm_matches_direct_quadrature() {
        let g = torus();
        let w = WeightSpec::uniform();
        let n = 32;
        let p = TorusProblem::new(&g, &w, n).unwrap();
        let u: Vec<f64> = (0..n * n)
            .map(|i| {
                let x = (i % n) as f64 / n as f64;
                let y = (i / n) as f64 / n as f64;
                0.3 * (2.0 * std::f64::consts::PI * x).cos()
                    + 0.1 * (2.0 * std::f64::consts::PI * y).sin()
            })
            .collect();
        let rho = 2.0;
        let r = p.residual_field(&u, rho);
        // Independent recomputation of the same discrete operator.
        let lap = p.spectral.laplacian(&u);
        let mut acc = 0.0;
        for i in 0..n * n {
            let v = lap[i] + rho * (p.h[i] * u[i].exp() - 1.0);
            acc += v * v;
        }
        let direct = (acc / (n * n) as f64).sqrt();
        assert_relative_eq!(p.l2_norm(&r), direct, epsilon = 1e-13);
    }
}
