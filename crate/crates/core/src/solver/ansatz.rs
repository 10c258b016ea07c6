//! Glued-bubble initial guess: standard profiles at the concentration points
//! with heights tied together by the branch relations, blended into the
//! shared Green-function outer profile by a smooth radial partition of unity.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{GreenTable, Point};
use crate::quad::radial_cutoff;
use crate::quantities::{ell, g_star, BlowupConfiguration};
use crate::solver::torus::TorusProblem;
use crate::solver::{FieldData, SolutionField};
use crate::weight::WeightSpec;

struct BubbleParams {
    x_star: Point,
    lambda: f64,
    h_q: f64,
    gstar_q: f64,
}

struct AnsatzParams {
    bubbles: Vec<BubbleParams>,
    rho: f64,
    /// Common additive constant of the outer profile
    /// `Σ_l 8π G(·,q_l) + c_out`.
    c_out: f64,
    r0: f64,
}

fn build_params(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    lambda1: f64,
) -> Result<AnsatzParams> {
    let m = cfg.m();
    let mut h_q = Vec::with_capacity(m);
    let mut gs_q = Vec::with_capacity(m);
    for (j, &qj) in cfg.q.iter().enumerate() {
        h_q.push(w.h_eval(g, qj)?);
        gs_q.push(g_star(cfg, g, j, qj)?);
    }
    // Heights from e^{λ_j} h²(q_j) e^{G_j^*} = const across bubbles.
    let c1 = h_q[0] * h_q[0] * gs_q[0].exp();
    let lambdas: Vec<f64> = (0..m)
        .map(|j| lambda1 + (c1 / (h_q[j] * h_q[j] * gs_q[j].exp())).ln())
        .collect();
    // Leading-order ρ on the branch.
    let l = ell(cfg, g, w)?;
    let rho = 8.0 * PI * m as f64
        + (2.0 / m as f64) * lambda1 * (-lambda1).exp() * l / c1;

    // Bubble-overlap guard.
    let core_max = (0..m)
        .map(|j| (8.0 / (rho * h_q[j])).sqrt() * (-lambdas[j] / 2.0).exp())
        .fold(0.0_f64, f64::max);
    for (j, &qj) in cfg.q.iter().enumerate() {
        for &ql in &cfg.q[j + 1..] {
            if g.domain().distance(qj, ql) < 4.0 * core_max {
                return Err(Error::InvalidConfig(format!(
                    "bubbles overlap at λ = {lambda1}: pairwise distance below 4 core radii"
                )));
            }
        }
    }

    let bubbles = (0..m)
        .map(|j| {
            let grad = w.grad_log_h(g, cfg.q[j])?;
            Ok(BubbleParams {
                x_star: cfg.q[j] + grad.scale(2.0 / (rho * h_q[j] * lambdas[j].exp())),
                lambda: lambdas[j],
                h_q: h_q[j],
                gstar_q: gs_q[j],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_out = -(lambda1 + 2.0 * (rho * h_q[0] / 8.0).ln() + gs_q[0]);
    Ok(AnsatzParams { bubbles, rho, c_out, r0: cfg.partition.r0 })
}

fn profile(b: &BubbleParams, rho: f64, x: Point, g: &GreenTable) -> f64 {
    let d2 = g.domain().displacement(x, b.x_star).norm2();
    b.lambda - 2.0 * (1.0 + rho * b.h_q / 8.0 * b.lambda.exp() * d2).ln()
}

fn local_value(
    params: &AnsatzParams,
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    j: usize,
    x: Point,
) -> Result<f64> {
    let b = &params.bubbles[j];
    Ok(profile(b, params.rho, x, g) + g_star(cfg, g, j, x)? - b.gstar_q)
}

fn outer_value(params: &AnsatzParams, cfg: &BlowupConfiguration, g: &GreenTable, x: Point) -> Result<f64> {
    let mut sum = params.c_out;
    for &ql in &cfg.q {
        sum += 8.0 * PI * g.green(x, ql)?;
    }
    Ok(sum)
}

/// The glued field on the solver grid.
pub fn bubble_ansatz(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    problem: &TorusProblem,
    lambda1: f64,
) -> Result<SolutionField> {
    let params = build_params(cfg, g, w, lambda1)?;
    let n = problem.n;
    let mut values = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let x = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
            // Nearest bubble owns the blend.
            let (j, s) = cfg
                .q
                .iter()
                .enumerate()
                .map(|(j, &qj)| (j, g.domain().distance(x, qj)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let chi = radial_cutoff(s, params.r0 / 2.0, params.r0);
            let v = if chi >= 1.0 {
                local_value(&params, cfg, g, j, x)?
            } else if chi <= 0.0 {
                outer_value(&params, cfg, g, x)?
            } else {
                chi * local_value(&params, cfg, g, j, x)?
                    + (1.0 - chi) * outer_value(&params, cfg, g, x)?
            };
            values[iy * n + ix] = v;
        }
    }
    Ok(SolutionField { data: FieldData::TorusGrid { n, values }, rho: params.rho })
}

/// Value the continuation pins at the grid point nearest `q₁` for a target
/// height: the local ansatz evaluated there.
pub fn pin_value(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    lambda1: f64,
    pin_point: Point,
) -> Result<f64> {
    let params = build_params(cfg, g, w, lambda1)?;
    local_value(&params, cfg, g, 0, pin_point)
}

/// Leading-order ρ of the ansatz (exposed for warm starts and tests).
pub fn ansatz_rho(cfg: &BlowupConfiguration, g: &GreenTable, w: &WeightSpec, lambda1: f64) -> Result<f64> {
    Ok(build_params(cfg, g, w, lambda1)?.rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::quantities::PartitionSpec;
    use approx::assert_relative_eq;

    #[test]
    fn ansatz_mass_is_nearly_normalized() {
        // ∫ h e^{ũ} should be ≈ 1 without any explicit normalisation: each
        // glued bubble carries mass ≈ 8π/ρ = 1/m.
        let g = GreenTable::for_domain(DomainSpec::torus());
        let w = WeightSpec::uniform();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.5, 0.5)],
            partition: PartitionSpec::voronoi(0.1),
        };
        let problem = TorusProblem::new(&g, &w, 128).unwrap();
        let field = bubble_ansatz(&cfg, &g, &w, &problem, 6.0).unwrap();
        let FieldData::TorusGrid { values, .. } = &field.data else { unreachable!() };
        let mass = problem.mass(values);
        assert_relative_eq!(mass, 1.0, max_relative = 0.05);
    }

    #[test]
    fn overlapping_bubbles_rejected() {
        let g = GreenTable::for_domain(DomainSpec::torus());
        let w = WeightSpec::uniform();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.3, 0.3), Point::new(0.42, 0.3)],
            partition: PartitionSpec::voronoi(0.03),
        };
        let problem = TorusProblem::new(&g, &w, 64).unwrap();
        // λ = 1: cores are huge, the 4-core-radius separation fails.
        assert!(bubble_ansatz(&cfg, &g, &w, &problem, 1.0).is_err());
    }
}
