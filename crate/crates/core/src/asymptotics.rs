//! Expansion predictors for `ρ - 8πm` and the local masses, plus weighted
//! least-squares fits of measured branches against the predicted
//! coefficients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, GreenTable};
use crate::quantities::{ell, g_star, BlowupConfiguration, DReport};
use crate::solver::BranchRecord;
use crate::weight::WeightSpec;

/// Scalar data of the blow-up configuration entering every predictor:
/// `m`, `ℓ(q)`, `h(q₁)`, `G₁*(q₁)`, `Δ log h(q_j)`, `h(q_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionInputs {
    pub m: usize,
    pub ell: f64,
    pub h_q1: f64,
    pub gstar_q1: f64,
    pub h_q: Vec<f64>,
    pub lap_log_h_q: Vec<f64>,
    pub torus: bool,
}

impl ExpansionInputs {
    pub fn compute(cfg: &BlowupConfiguration, g: &GreenTable, w: &WeightSpec) -> Result<Self> {
        let mut h_q = Vec::with_capacity(cfg.m());
        let mut lap = Vec::with_capacity(cfg.m());
        for &qj in &cfg.q {
            h_q.push(w.h_eval(g, qj)?);
            lap.push(w.lap_log_h(g, qj)?);
        }
        Ok(ExpansionInputs {
            m: cfg.m(),
            ell: ell(cfg, g, w)?,
            h_q1: h_q[0],
            gstar_q1: g_star(cfg, g, 0, cfg.q[0])?,
            h_q,
            lap_log_h_q: lap,
            torus: matches!(g.domain().kind, DomainKind::Torus),
        })
    }

    /// `h²(q₁) e^{G₁*(q₁)}`, the normalising factor of every coefficient.
    pub fn scale(&self) -> f64 {
        self.h_q1 * self.h_q1 * self.gstar_q1.exp()
    }

    /// Predicted coefficient of `λ e^{-λ}` in `ρ - 8πm`.
    pub fn c1(&self) -> f64 {
        2.0 * self.ell / (self.m as f64 * self.scale())
    }

    /// Predicted coefficient of `e^{-λ}` at ball radius `δ`:
    /// the `(log(8πm h² e^{G*} δ²) - 2)`-weighted ℓ-term plus the `D`-term.
    pub fn c2(&self, d_value: f64, delta: f64) -> f64 {
        let s = self.scale();
        let rho0 = 8.0 * PI * self.m as f64;
        self.c1() * ((rho0 * s * delta * delta).ln() - 2.0)
            + 8.0 * d_value / (s * PI * self.m as f64)
    }
}

/// Leading-order prediction `8πm + (2/m) λ e^{-λ} ℓ / (h² e^{G*})`.
pub fn predict_rho_leading(inputs: &ExpansionInputs, lambda1: f64) -> f64 {
    8.0 * PI * inputs.m as f64 + inputs.c1() * lambda1 * (-lambda1).exp()
}

/// Refined prediction with the `(λ + log(ρ h² e^{G*} δ²) - 2)` ℓ-term and the
/// `D(q)` term; `ρ` inside the logarithm is taken as `8πm` (the difference is
/// below the error order).
pub fn predict_rho_refined(
    inputs: &ExpansionInputs,
    d_value: f64,
    lambda1: f64,
    delta: f64,
) -> f64 {
    let s = inputs.scale();
    let m = inputs.m as f64;
    let rho0 = 8.0 * PI * m;
    let e = (-lambda1).exp();
    rho0
        + (2.0 * inputs.ell * e / (m * s)) * (lambda1 + (rho0 * s * delta * delta).ln() - 2.0)
        + (8.0 * e / (s * PI * m)) * d_value
}

/// Local-mass prediction
/// `ρ_j - 8π ≈ (16π/(8πm h(q_j))) {Δ log h(q_j) + 8πm·[torus]} λ e^{-λ}`.
pub fn predict_local_mass(inputs: &ExpansionInputs, j: usize, lambda_j: f64) -> f64 {
    let m = inputs.m as f64;
    let bracket = inputs.lap_log_h_q[j] + if inputs.torus { 8.0 * PI * m } else { 0.0 };
    8.0 * PI
        + 16.0 * PI / (8.0 * PI * m * inputs.h_q[j]) * bracket * lambda_j * (-lambda_j).exp()
}

/// Basis used by the branch fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitBasis {
    /// `{λ e^{-λ}, e^{-λ}}`
    Two,
    /// `{λ e^{-λ}, e^{-λ}, λ² e^{-3λ/2}}`
    Three,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub basis: FitBasis,
    /// Fitted coefficients in basis order.
    pub coefficients: Vec<f64>,
    /// Diagonal of the coefficient covariance (unit-weight variance scaled).
    pub coefficient_variance: Vec<f64>,
    /// Condition number of the weighted design matrix.
    pub condition: f64,
    /// Weighted RMS residual.
    pub residual_rms: f64,
    pub predicted_c1: f64,
    pub predicted_c2: f64,
    /// Fitted / predicted ratios (NaN when a predicted coefficient is 0).
    pub c1_ratio: f64,
    pub c2_ratio: f64,
}

/// One branch step reduced to the data the expansion analysis needs; built
/// either from in-memory [`BranchRecord`]s or from a branch CSV.
#[derive(Clone, Debug, Serialize)]
pub struct BranchSample {
    pub lambda_target: f64,
    pub lambda1: f64,
    pub rho: f64,
    pub lambda_j: Vec<f64>,
    pub local_mass: Vec<f64>,
    /// Above the hard resolution floor: enters fits.
    pub usable_for_fit: bool,
    /// The 8-cells-per-core adequacy flag.
    pub resolved: bool,
}

impl From<&BranchRecord> for BranchSample {
    fn from(r: &BranchRecord) -> Self {
        BranchSample {
            lambda_target: r.lambda_target,
            lambda1: r.lambda1(),
            rho: r.rho(),
            lambda_j: r.descriptors.bubbles.iter().map(|b| b.lambda).collect(),
            local_mass: r.descriptors.bubbles.iter().map(|b| b.local_mass).collect(),
            usable_for_fit: r.resolved_for_fit(),
            resolved: r.resolved,
        }
    }
}

/// Weighted least squares of measured `ρ - 8πm` on the chosen basis evaluated
/// at the measured `λ₁`, with weights `e^{+λ}` so each record contributes at
/// comparable relative scale.
pub fn fit_expansion(
    records: &[&BranchRecord],
    inputs: &ExpansionInputs,
    d_value: f64,
    delta: f64,
    basis: FitBasis,
) -> Result<ExpansionFit> {
    let samples: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.resolved_for_fit())
        .map(|r| (r.lambda1(), r.rho()))
        .collect();
    fit_samples(&samples, inputs, d_value, delta, basis)
}

/// Fit on raw `(λ₁, ρ)` samples; split out so synthetic branches can check
/// that the fit recovers its generator.
pub fn fit_samples(
    samples: &[(f64, f64)],
    inputs: &ExpansionInputs,
    d_value: f64,
    delta: f64,
    basis: FitBasis,
) -> Result<ExpansionFit> {
    if samples.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "expansion fit needs ≥ 4 usable branch records, got {}",
            samples.len()
        )));
    }
    let ncol = match basis {
        FitBasis::Two => 2,
        FitBasis::Three => 3,
    };
    let nrow = samples.len();
    let mut a = DMatrix::<f64>::zeros(nrow, ncol);
    let mut b = DVector::<f64>::zeros(nrow);
    let rho0 = 8.0 * PI * inputs.m as f64;
    for (i, &(lam, rho)) in samples.iter().enumerate() {
        let wgt = (lam / 2.0).exp(); // weight e^{+λ} enters squared in LSQ
        let e = (-lam).exp();
        a[(i, 0)] = wgt * lam * e;
        a[(i, 1)] = wgt * e;
        if ncol == 3 {
            a[(i, 2)] = wgt * lam * lam * (-1.5 * lam).exp();
        }
        b[i] = wgt * (rho - rho0);
    }
    let ata = a.transpose() * &a;
    let eig = ata.clone().symmetric_eigen();
    let emax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let emin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if emin > 0.0 { (emax / emin).sqrt() } else { f64::INFINITY };
    if !(condition.is_finite() && condition < 1e12) {
        return Err(Error::IllConditionedFit(format!(
            "design matrix condition {condition:.3e}; widen the λ schedule (current range too narrow)"
        )));
    }
    let atb = a.transpose() * &b;
    let sol = ata
        .clone()
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::IllConditionedFit("singular normal equations".into()))?;
    let resid = &a * &sol - &b;
    let dof = (nrow as f64 - ncol as f64).max(1.0);
    let sigma2 = resid.norm_squared() / dof;
    let cov = ata
        .try_inverse()
        .ok_or_else(|| Error::IllConditionedFit("normal equations not invertible".into()))?;
    let variance: Vec<f64> = (0..ncol).map(|i| cov[(i, i)] * sigma2).collect();

    let predicted_c1 = inputs.c1();
    let predicted_c2 = inputs.c2(d_value, delta);
    let c1_ratio = sol[0] / predicted_c1;
    let c2_ratio = sol[1] / predicted_c2;
    Ok(ExpansionFit {
        basis,
        coefficients: sol.iter().cloned().collect(),
        coefficient_variance: variance,
        condition,
        residual_rms: (resid.norm_squared() / nrow as f64).sqrt(),
        predicted_c1,
        predicted_c2,
        c1_ratio,
        c2_ratio,
    })
}

impl BranchRecord {
    /// Records usable by fits: converged and above the hard resolution floor.
    /// The 8-cell adequacy flag is reported separately; demanding it for fits
    /// would contradict the λ windows the branch runs target.
    pub fn resolved_for_fit(&self) -> bool {
        self.descriptors
            .bubbles
            .iter()
            .all(|b| b.core_cells >= crate::solver::torus::REFUSAL_CORE_CELLS)
    }
}

/// Per-record η-bound report: `sup|η| / (λ² e^{-λ})` and the regression of η
/// against the predicted `[log(R|x-x_j|+2)]²` shape.
#[derive(Clone, Debug, Serialize)]
pub struct EtaReport {
    pub lambda: f64,
    pub sup_ratio: f64,
    pub shape_coeff_measured: f64,
    pub shape_coeff_predicted: f64,
    pub shape_correlation: f64,
}

/// η shape check on a torus record. Regresses the measured η field over the
/// bubble ball against `[log(R_j |x-x_j| + 2)]²`.
pub fn eta_profile_check(
    record: &BranchRecord,
    g: &GreenTable,
    w: &WeightSpec,
    cfg: &BlowupConfiguration,
    inputs: &ExpansionInputs,
) -> Result<EtaReport> {
    let crate::solver::FieldData::TorusGrid { n, values } = &record.field.data else {
        return Err(Error::InvalidConfig("η profile check expects a torus record".into()));
    };
    let n = *n;
    let b = &record.descriptors.bubbles[0];
    let rho = record.rho();
    let delta = record.descriptors.delta;
    let domain = g.domain();
    let h_x = w.h_eval(g, b.x)?;
    let k = rho * h_x * b.lambda.exp() / 8.0;
    let big_r = (rho * h_x * b.lambda.exp() / 8.0).sqrt();
    let gstar_xj = g_star(cfg, g, 0, b.x)?;

    // Least squares η ≈ c₀ + c_shape · [log(R|x-x_j|+2)]² over the ball.
    let (mut s0, mut s1, mut s11, mut sy, mut s1y, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut sup = 0.0_f64;
    let reach = (delta * n as f64).ceil() as isize;
    let cx = (b.x.x * n as f64).round() as isize;
    let cy = (b.x.y * n as f64).round() as isize;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let xg = (cx + dx).rem_euclid(n as isize) as usize;
            let yg = (cy + dy).rem_euclid(n as isize) as usize;
            let p = crate::geometry::Point::new(xg as f64 / n as f64, yg as f64 / n as f64);
            if domain.distance(p, b.x) > delta {
                continue;
            }
            let d = domain.displacement(p, b.x_star);
            let u_j = b.lambda - 2.0 * (1.0 + k * d.norm2()).ln();
            let gs = g_star(cfg, g, 0, p)?;
            let eta = values[yg * n + xg] - u_j - (gs - gstar_xj);
            let shape = (big_r * domain.distance(p, b.x) + 2.0).ln().powi(2);
            s0 += 1.0;
            s1 += shape;
            s11 += shape * shape;
            sy += eta;
            s1y += shape * eta;
            syy += eta * eta;
            sup = sup.max(eta.abs());
        }
    }
    let det = s0 * s11 - s1 * s1;
    let c_shape = (s0 * s1y - s1 * sy) / det;
    let lam = b.lambda;
    let bracket = inputs.lap_log_h_q[0]
        + if inputs.torus { 8.0 * PI * inputs.m as f64 } else { 0.0 };
    let predicted = -8.0 / (rho * h_x) * bracket * (-lam).exp();
    // Correlation between η and the shape function.
    let cov = s1y - s1 * sy / s0;
    let var_shape = s11 - s1 * s1 / s0;
    let var_eta = syy - sy * sy / s0;
    let corr = cov / (var_shape * var_eta).sqrt().max(1e-300);
    Ok(EtaReport {
        lambda: lam,
        sup_ratio: sup / (lam * lam * (-lam).exp()),
        shape_coeff_measured: c_shape,
        shape_coeff_predicted: predicted,
        shape_correlation: corr,
    })
}

/// Side-by-side measured vs predicted table, the payload of the
/// `verify-expansion` stage.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub m: usize,
    pub delta: f64,
    pub inputs: ExpansionInputs,
    pub d_report: Option<DReport>,
    pub rows: Vec<ExpansionRow>,
    pub fit: Option<ExpansionFit>,
    /// Refined prediction at δ and δ/2 per row, recording the explicit
    /// δ-dependence spread.
    pub delta_spread_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionRow {
    pub lambda_target: f64,
    pub lambda_measured: f64,
    pub rho_measured: f64,
    pub rho_leading: f64,
    pub rho_refined: f64,
    pub rho_refined_half_delta: f64,
    pub local_mass_measured: Vec<f64>,
    pub local_mass_predicted: Vec<f64>,
    pub resolved: bool,
}

pub fn expansion_report(
    samples: &[BranchSample],
    inputs: &ExpansionInputs,
    d_report: Option<&DReport>,
    delta: f64,
    basis: FitBasis,
) -> Result<ExpansionReport> {
    let d_value = d_report.map_or(0.0, |d| if d.defined { d.value } else { d.regularized_at(delta) });
    let mut rows = Vec::with_capacity(samples.len());
    let mut spread: f64 = 0.0;
    for rec in samples {
        let lam = rec.lambda1;
        let refined = predict_rho_refined(inputs, d_value, lam, delta);
        let refined_half = predict_rho_refined(inputs, d_value, lam, delta / 2.0);
        spread = spread.max((refined - refined_half).abs());
        rows.push(ExpansionRow {
            lambda_target: rec.lambda_target,
            lambda_measured: lam,
            rho_measured: rec.rho,
            rho_leading: predict_rho_leading(inputs, lam),
            rho_refined: refined,
            rho_refined_half_delta: refined_half,
            local_mass_measured: rec.local_mass.clone(),
            local_mass_predicted: (0..inputs.m)
                .map(|j| predict_local_mass(inputs, j, rec.lambda_j[j]))
                .collect(),
            resolved: rec.resolved,
        });
    }
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.usable_for_fit)
        .map(|s| (s.lambda1, s.rho))
        .collect();
    let fit = fit_samples(&pairs, inputs, d_value, delta, basis).ok();
    Ok(ExpansionReport {
        m: inputs.m,
        delta,
        inputs: inputs.clone(),
        d_report: d_report.cloned(),
        rows,
        fit,
        delta_spread_max: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Point};
    use crate::quantities::PartitionSpec;
    use approx::assert_relative_eq;

    fn disk_inputs() -> ExpansionInputs {
        let g = GreenTable::for_domain(DomainSpec::disk());
        let w = WeightSpec::uniform();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.0, 0.0)],
            partition: PartitionSpec::voronoi(0.2),
        };
        ExpansionInputs::compute(&cfg, &g, &w).unwrap()
    }

    #[test]
    fn disk_leading_prediction_is_8pi() {
        // ℓ_Ω = 0 for h ≡ 1, so the leading prediction is exactly 8π.
        let inputs = disk_inputs();
        for &lam in &[4.0, 6.0, 9.0] {
            assert_relative_eq!(predict_rho_leading(&inputs, lam), 8.0 * PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn disk_refined_prediction_matches_exact_family() {
        // With D_Ω = -π: 8π + (8 e^{-λ}/π)(-π) = 8π - 8 e^{-λ}, and no
        // δ-dependence since ℓ_Ω = 0.
        let inputs = disk_inputs();
        for &lam in &[4.0, 5.5, 7.0] {
            let p = predict_rho_refined(&inputs, -PI, lam, 0.3);
            assert_relative_eq!(p, 8.0 * PI - 8.0 * (-lam).exp(), epsilon = 1e-12);
            let p2 = predict_rho_refined(&inputs, -PI, lam, 0.6);
            assert_relative_eq!(p, p2, epsilon = 1e-12);
        }
    }

    #[test]
    fn leading_prediction_tends_to_8pi_m() {
        let g = GreenTable::for_domain(DomainSpec::torus());
        let w = WeightSpec::uniform();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.5, 0.5)],
            partition: PartitionSpec::voronoi(0.1),
        };
        let inputs = ExpansionInputs::compute(&cfg, &g, &w).unwrap();
        assert!((predict_rho_leading(&inputs, 40.0) - 8.0 * PI).abs() < 1e-12);
        // Uniform weight: h² e^{G*} factors cancel to c1 = 16π (h = 1).
        assert_relative_eq!(inputs.c1(), 16.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn fit_recovers_synthetic_generator() {
        let inputs = disk_inputs();
        let (c1, c2) = (-3.7, 11.2);
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let lam = 5.0 + 0.5 * i as f64;
                let e = (-lam as f64).exp();
                (lam, 8.0 * PI + c1 * lam * e + c2 * e)
            })
            .collect();
        let fit = fit_samples(&samples, &inputs, -PI, 0.3, FitBasis::Two).unwrap();
        assert_relative_eq!(fit.coefficients[0], c1, max_relative = 1e-10);
        assert_relative_eq!(fit.coefficients[1], c2, max_relative = 1e-10);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn fit_rejects_degenerate_lambda_range() {
        let inputs = disk_inputs();
        // Identical λ values: rank-deficient design matrix.
        let samples = vec![(6.0, 25.0); 5];
        assert!(matches!(
            fit_samples(&samples, &inputs, 0.0, 0.3, FitBasis::Two),
            Err(Error::IllConditionedFit(_))
        ));
    }

    #[test]
    fn disk_exact_branch_fits_minus_eight() {
        // ρ - 8π = -8 e^{-λ} exactly: c₁ ≈ 0, c₂ ≈ -8.
        let inputs = disk_inputs();
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let lam = 4.0 + 0.45 * i as f64;
                (lam, 8.0 * PI - 8.0 * (-lam as f64).exp())
            })
            .collect();
        let fit = fit_samples(&samples, &inputs, -PI, 0.3, FitBasis::Two).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-9);
        assert_relative_eq!(fit.coefficients[1], -8.0, max_relative = 1e-9);
        // Predicted c₂ from D_Ω = -π is also exactly -8.
        assert_relative_eq!(fit.predicted_c2, -8.0, epsilon = 1e-12);
        assert_relative_eq!(fit.c2_ratio, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn local_mass_uniform_torus() {
        // bracket = 8π, prefactor 16π/(8π h) = 2: ρ₁ ≈ 8π + 16π λ e^{-λ}.
        let g = GreenTable::for_domain(DomainSpec::torus());
        let w = WeightSpec::uniform();
        let cfg = BlowupConfiguration {
            q: vec![Point::new(0.5, 0.5)],
            partition: PartitionSpec::voronoi(0.1),
        };
        let inputs = ExpansionInputs::compute(&cfg, &g, &w).unwrap();
        let lam = 7.0;
        assert_relative_eq!(
            predict_local_mass(&inputs, 0, lam),
            8.0 * PI + 16.0 * PI * lam * (-lam).exp(),
            epsilon = 1e-12
        );
        assert_relative_eq!(predict_local_mass(&inputs, 0, 500.0), 8.0 * PI, epsilon = 1e-12);
    }
}
