//! Pipeline stages binding the core modules to files on disk.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;

use bubblekit::asymptotics::{expansion_report, BranchSample, ExpansionInputs, FitBasis};
use bubblekit::diagnostics::fields::{BumpField, Field2, QuadraticField, SampledField, SumField, TrigField};
use bubblekit::diagnostics::kernel::{entire_kernel_residual, KernelFunction};
use bubblekit::diagnostics::pohozaev::{
    divergence_identity_check, pohozaev_identity_1, pohozaev_identity_2, BallQuadrature,
    PohozaevFrame, PohozaevReport,
};
use bubblekit::diagnostics::spectrum::{
    disk_radial_linearized_spectrum, entire_operator_spectrum, torus_linearized_spectrum,
};
use bubblekit::diagnostics::uniqueness::{disk_uniqueness_probe, torus_uniqueness_probe, ClusterReport};
use bubblekit::geometry::{DomainKind, GreenMethod, GreenTable, Point};
use bubblekit::quantities::{
    d_of_q, ell, f_m_eval, find_critical_configuration, g_star, BlowupConfiguration, DQuadrature,
    DReport,
};
use bubblekit::solver::ansatz;
use bubblekit::solver::disk::{disk_exact_solution, disk_radial_solve, RadialProblem, DEFAULT_CLUSTER};
use bubblekit::solver::torus::{continue_branch, TorusProblem};
use bubblekit::solver::{BranchRecord, FieldData};
use bubblekit::weight::WeightSpec;
use bubblekit::Error as CoreError;

use crate::config::{DomainKindConfig, ExperimentConfig};
use crate::output::{branch_header, branch_row, fmt, read_branch_csv, OutputContext};

pub enum StageFailure {
    Config(String),
    Numerical(String),
    Resolution(String),
    Io(String),
}

impl StageFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageFailure::Config(_) => 2,
            StageFailure::Numerical(_) | StageFailure::Io(_) => 3,
            StageFailure::Resolution(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            StageFailure::Config(m)
            | StageFailure::Numerical(m)
            | StageFailure::Resolution(m)
            | StageFailure::Io(m) => m,
        }
    }
}

impl From<CoreError> for StageFailure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_) | CoreError::HypothesisViolation(_) => {
                StageFailure::Config(e.to_string())
            }
            CoreError::UnderResolved(_) => StageFailure::Resolution(e.to_string()),
            _ => StageFailure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for StageFailure {
    fn from(e: std::io::Error) -> Self {
        StageFailure::Io(e.to_string())
    }
}

type StageResult = Result<(), StageFailure>;

fn basis_of(cfg: &ExperimentConfig) -> Result<FitBasis, StageFailure> {
    match cfg.expansion.basis.as_str() {
        "two" => Ok(FitBasis::Two),
        "three" => Ok(FitBasis::Three),
        other => Err(StageFailure::Config(format!("unknown fit basis '{other}'"))),
    }
}

/// Critical configuration refined from the config seed.
fn critical_configuration(
    cfg: &ExperimentConfig,
    g: &GreenTable,
    w: &WeightSpec,
) -> Result<(BlowupConfiguration, CriticalSummary), StageFailure> {
    let seeds = cfg.seed_points();
    let crit = find_critical_configuration(g, w, &seeds, cfg.quantities.critical_tol, cfg.quantities.critical_max_iter)?;
    let blowup = cfg.blowup_configuration(g, w, crit.q.clone())?;
    let hessian: Vec<Vec<f64>> = (0..crit.hess.nrows())
        .map(|i| (0..crit.hess.ncols()).map(|j| crit.hess[(i, j)]).collect())
        .collect();
    let summary = CriticalSummary {
        seed: seeds.iter().map(|p| [p.x, p.y]).collect(),
        q: crit.q.iter().map(|p| [p.x, p.y]).collect(),
        grad_norm: crit.grad_norm,
        hessian,
        det: crit.det,
        nondegenerate: crit.nondegenerate,
        iterations: crit.iterations,
    };
    Ok((blowup, summary))
}

#[derive(Serialize)]
pub struct CriticalSummary {
    seed: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
    grad_norm: f64,
    hessian: Vec<Vec<f64>>,
    det: f64,
    nondegenerate: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct GreenReport {
    method: String,
    pairs_checked: usize,
    ewald_vs_fourier_max: Option<f64>,
    ewald_vs_closed_max: Option<f64>,
    symmetry_max: f64,
    mean_integral: f64,
    robin_at_first_seed: f64,
    boundary_sup: Option<f64>,
    spectral_residuals: Option<Vec<(usize, f64)>>,
}

/// Green-function self checks.
pub fn stage_green_table(cfg: &ExperimentConfig, out: &OutputContext, seed: u64) -> StageResult {
    let g = cfg.green_table()?;
    let domain = g.domain();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sample_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Point {
        match domain.kind {
            DomainKind::Torus => Point::new(rng.random::<f64>(), rng.random::<f64>()),
            DomainKind::Disk => loop {
                let p = Point::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
                if p.norm() < 0.95 {
                    break p;
                }
            },
        }
    };

    let mut symmetry_max = 0.0_f64;
    let mut pairs = Vec::new();
    for _ in 0..cfg.green.check_pairs {
        let a = sample_point(&mut rng);
        let mut b = sample_point(&mut rng);
        while domain.distance(a, b) < 1e-3 {
            b = sample_point(&mut rng);
        }
        symmetry_max = symmetry_max.max((g.green(a, b)? - g.green(b, a)?).abs());
        pairs.push((a, b));
    }

    let (ewald_vs_fourier_max, ewald_vs_closed_max, spectral_residuals) = match domain.kind {
        DomainKind::Torus => {
            let fourier = GreenTable::new(domain, GreenMethod::FourierTruncation {
                k_max: cfg.green.fourier_k_max,
            })?;
            let closed = GreenTable::new(domain, GreenMethod::ClosedForm)?;
            let mut mf = 0.0_f64;
            let mut mc = 0.0_f64;
            for &(a, b) in &pairs {
                mf = mf.max((g.green(a, b)? - fourier.green(a, b)?).abs());
                mc = mc.max((g.green(a, b)? - closed.green(a, b)?).abs());
            }
            (Some(mf), Some(mc), Some(spectral_residual_series(cfg)?))
        }
        DomainKind::Disk => (None, None, None),
    };

    let boundary_sup = match domain.kind {
        DomainKind::Disk => {
            let mut sup = 0.0_f64;
            for k in 0..256 {
                let th = 2.0 * PI * k as f64 / 256.0;
                let x = Point::new(th.cos(), th.sin());
                for &(_, y) in pairs.iter().take(16) {
                    sup = sup.max(g.green(x, y)?.abs());
                }
            }
            Some(sup)
        }
        DomainKind::Torus => None,
    };

    let p0 = cfg.seed_points()[0];
    let report = GreenReport {
        method: format!("{:?}", g.method()),
        pairs_checked: pairs.len(),
        ewald_vs_fourier_max,
        ewald_vs_closed_max,
        symmetry_max,
        mean_integral: green_mean_integral(&g, p0)?,
        robin_at_first_seed: g.robin(p0)?,
        boundary_sup,
        spectral_residuals,
    };
    out.write_json("green_table.json", &report)?;
    Ok(())
}

/// `∫_M G(x, p) dμ(x)` by singularity-split quadrature: smooth-cutoff grid
/// sum outside a small ball plus a polar integral of the log singularity.
pub fn green_mean_integral(g: &GreenTable, p: Point) -> Result<f64, CoreError> {
    let domain = g.domain();
    match domain.kind {
        DomainKind::Torus => {
            let eps = 0.05;
            let n = 256;
            let mut outer = 0.0;
            for iy in 0..n {
                for ix in 0..n {
                    let x = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
                    let s = domain.distance(x, p);
                    let cut = 1.0 - bubblekit::quad::radial_cutoff(s, eps / 2.0, eps);
                    if cut > 0.0 {
                        outer += cut * g.green(x, p)?;
                    }
                }
            }
            outer /= (n * n) as f64;
            let edges = bubblekit::quad::edges_geometric_then_uniform(1e-7, eps / 2.0, eps, 8);
            let inner = bubblekit::quad::integrate_annulus_edges(p, &edges, 128, 12, |x| {
                let s = domain.distance(x, p);
                let cut = bubblekit::quad::radial_cutoff(s, eps / 2.0, eps);
                if cut == 0.0 {
                    0.0
                } else {
                    cut * g.green(x, p).unwrap_or(0.0)
                }
            });
            Ok(outer + inner)
        }
        DomainKind::Disk => {
            // Not normalised to zero mean; report the raw integral.
            let val = bubblekit::quad::integrate_disk(Point::new(0.0, 0.0), 1.0, 32, 128, 8, |x| {
                if domain.distance(x, p) < 1e-9 {
                    0.0
                } else {
                    g.green(x, p).unwrap_or(0.0)
                }
            });
            Ok(val)
        }
    }
}

/// Truncated-Fourier tabulation vs the discrete (spectral) Laplacian: the
/// residual against the discretised `δ_p - 1` shrinks as `k_max` doubles.
fn spectral_residual_series(cfg: &ExperimentConfig) -> Result<Vec<(usize, f64)>, CoreError> {
    let n = 128usize;
    let domain = cfg.domain_spec();
    let spectral = bubblekit::solver::spectral::Spectral2d::new(n);
    let p = Point::new(0.0, 0.0);
    let mut series = Vec::new();
    for &k_max in &[8usize, 16, 32] {
        let table = GreenTable::new(domain, GreenMethod::FourierTruncation { k_max })?;
        let mut gfield = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let x = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
                // The truncated series is finite even at the pole.
                gfield[iy * n + ix] = if domain.distance(x, p) < 1e-12 {
                    truncated_green_at_pole(k_max)
                } else {
                    table.green(x, p)?
                };
            }
        }
        let lap = spectral.laplacian(&gfield);
        // -ΔG should equal δ_p - 1: on the grid, δ_p = N² at p, 0 elsewhere.
        let mut res2 = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let delta = if ix == 0 && iy == 0 { (n * n) as f64 } else { 0.0 };
                let r = -lap[iy * n + ix] - (delta - 1.0);
                res2 += r * r;
            }
        }
        series.push((k_max, (res2 / (n * n) as f64).sqrt()));
    }
    Ok(series)
}

/// Value of the k-truncated transverse-summed series at coincidence.
fn truncated_green_at_pole(k_max: usize) -> f64 {
    // B₂(0)/2 + Σ_{k≤k_max} (1+e^{-2πk})/(2πk(1-e^{-2πk}))
    let mut sum = 1.0 / 24.0;
    for k in 1..=k_max {
        let kk = k as f64;
        let q = (-2.0 * PI * kk).exp();
        sum += (1.0 + q) / (2.0 * PI * kk * (1.0 - q));
    }
    sum
}

pub fn stage_critical_points(cfg: &ExperimentConfig, out: &OutputContext) -> StageResult {
    let g = cfg.green_table()?;
    let w = cfg.weight_spec()?;
    w.validate(&g)?;
    let (_, summary) = critical_configuration(cfg, &g, &w)?;
    out.write_json("critical_points.json", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct QuantitiesReport {
    critical: CriticalSummary,
    f_m: f64,
    grad_norm: f64,
    det: f64,
    ell: f64,
    g_star_at_q: Vec<f64>,
    h_at_q: Vec<f64>,
    d: Option<DReport>,
    d_defined: Option<bool>,
}

pub fn stage_quantities(cfg: &ExperimentConfig, out: &OutputContext) -> StageResult {
    let g = cfg.green_table()?;
    let w = cfg.weight_spec()?;
    w.validate(&g)?;
    let (blowup, summary) = critical_configuration(cfg, &g, &w)?;
    let eval = f_m_eval(&g, &w, &blowup.q)?;
    let l = ell(&blowup, &g, &w)?;
    let mut gs = Vec::new();
    let mut hq = Vec::new();
    for (j, &qj) in blowup.q.iter().enumerate() {
        gs.push(g_star(&blowup, &g, j, qj)?);
        hq.push(w.h_eval(&g, qj)?);
    }
    let d = if cfg.quantities.d_radii.is_empty() {
        None
    } else {
        let quadrature = DQuadrature {
            outer_grid: cfg.quantities.d_outer_grid,
            ..DQuadrature::default()
        };
        Some(d_of_q(&blowup, &g, &w, &cfg.quantities.d_radii, quadrature)?)
    };
    let report = QuantitiesReport {
        f_m: eval.value,
        grad_norm: eval.grad_norm(),
        det: summary.det,
        critical: summary,
        ell: l,
        g_star_at_q: gs,
        h_at_q: hq,
        d_defined: d.as_ref().map(|r| r.defined),
        d,
    };
    out.write_json("quantities.json", &report)?;
    Ok(())
}

pub fn stage_branch(cfg: &ExperimentConfig, out: &OutputContext) -> StageResult {
    let g = cfg.green_table()?;
    let w = cfg.weight_spec()?;
    w.validate(&g)?;
    if cfg.branch.lambda_schedule.is_empty() {
        return Err(StageFailure::Config("branch stage needs a λ schedule".into()));
    }
    let (blowup, _) = critical_configuration(cfg, &g, &w)?;
    let records: Vec<BranchRecord> = match cfg.domain.kind {
        DomainKindConfig::Torus => {
            let problem = TorusProblem::new(&g, &w, cfg.branch.grid)?;
            let outcome = continue_branch(
                &blowup,
                &g,
                &w,
                &problem,
                &cfg.branch.lambda_schedule,
                cfg.branch.delta,
                cfg.branch.newton_tol,
            )?;
            write_branch_csv(cfg, out, &outcome.records)?;
            if let Some(reason) = outcome.aborted {
                return Err(StageFailure::Numerical(format!(
                    "branch aborted after {} records: {reason}",
                    outcome.records.len()
                )));
            }
            outcome.records
        }
        DomainKindConfig::Disk => {
            if blowup.m() != 1 || blowup.q[0].norm() > 1e-8 {
                return Err(StageFailure::Config(
                    "disk branch runs in radial mode: one bubble at the centre".into(),
                ));
            }
            let mut records = Vec::new();
            for &lam in &cfg.branch.lambda_schedule {
                let rec = disk_radial_solve(
                    &g,
                    &w,
                    lam,
                    cfg.branch.grid,
                    cfg.branch.delta,
                    cfg.branch.newton_tol,
                )?;
                records.push(rec);
            }
            write_branch_csv(cfg, out, &records)?;
            records
        }
    };
    if cfg.branch.dump_fields {
        for (i, rec) in records.iter().enumerate() {
            out.write_field(&format!("field_{i:03}"), rec)?;
        }
    }
    Ok(())
}

fn write_branch_csv(
    cfg: &ExperimentConfig,
    out: &OutputContext,
    records: &[BranchRecord],
) -> Result<(), StageFailure> {
    let m = cfg.blowup.q.len();
    let rows: Vec<Vec<String>> = records.iter().map(branch_row).collect();
    out.write_csv("branch.csv", &branch_header(m), &rows)?;
    Ok(())
}

pub fn stage_verify_expansion(cfg: &ExperimentConfig, out: &OutputContext) -> StageResult {
    let g = cfg.green_table()?;
    let w = cfg.weight_spec()?;
    let (blowup, _) = critical_configuration(cfg, &g, &w)?;
    let samples: Vec<BranchSample> = read_branch_csv(&out.path("branch.csv"), blowup.m())
        .map_err(StageFailure::Numerical)?;
    if samples.is_empty() {
        return Err(StageFailure::Numerical("branch CSV holds no records".into()));
    }
    let inputs = ExpansionInputs::compute(&blowup, &g, &w)?;
    let d_report = if cfg.quantities.d_radii.is_empty() {
        None
    } else {
        let quadrature = DQuadrature {
            outer_grid: cfg.quantities.d_outer_grid,
            ..DQuadrature::default()
        };
        Some(d_of_q(&blowup, &g, &w, &cfg.quantities.d_radii, quadrature)?)
    };
    let report = expansion_report(&samples, &inputs, d_report.as_ref(), cfg.branch.delta, basis_of(cfg)?)?;
    out.write_json("expansion.json", &report)?;

    let header: Vec<String> = ["lambda", "rho_measured", "rho_leading", "rho_refined"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.lambda_measured),
                fmt(r.rho_measured),
                fmt(r.rho_leading),
                fmt(r.rho_refined),
            ]
        })
        .collect();
    out.write_csv("expansion_plot.csv", &header, &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticsReport {
    pohozaev: Vec<NamedPohozaev>,
    divergence_polynomial_gap: f64,
    kernel_residuals: Vec<(String, f64)>,
    entire_spectrum: Vec<f64>,
    spectrum_trace: Vec<(f64, f64)>,
    uniqueness: Option<ClusterReport>,
}

#[derive(Serialize)]
struct NamedPohozaev {
    name: String,
    #[serde(flatten)]
    report: PohozaevReport,
}

pub fn stage_diagnostics(cfg: &ExperimentConfig, out: &OutputContext, seed: u64) -> StageResult {
    let g = cfg.green_table()?;
    let w = cfg.weight_spec()?;
    let (blowup, _) = critical_configuration(cfg, &g, &w)?;
    let dc = &cfg.diagnostics;

    // Polynomial divergence identity: exact up to quadrature rounding.
    let pu = QuadraticField { c00: 0.1, c10: -0.7, c01: 0.4, c20: 0.9, c11: -0.3, c02: 0.5 };
    let pv = QuadraticField { c00: 0.2, c10: 0.3, c01: -0.8, c20: -0.2, c11: 0.6, c02: 0.4 };
    let quad_poly = BallQuadrature { n_angle: 128, panels_per_unit: 80.0, nodes_per_panel: 4 };
    let divergence_polynomial_gap =
        divergence_identity_check(&pu, &pv, Point::new(0.4, 0.5), dc.pohozaev_r, &quad_poly).gap;

    // Manufactured frames through the grid-sampled pipeline.
    let v1 = TrigField { terms: vec![(0.3, 1.0, 0.0, 0.3), (0.15, 0.0, 1.0, -0.2)] };
    let bump = BumpField { center: Point::new(0.52, 0.47), width: 0.25, amp: 0.2 };
    let v2 = SumField { parts: vec![(1.0, &v1 as &dyn Field2), (1.0, &bump as &dyn Field2)] };
    let phi = TrigField { terms: vec![(0.15, 1.0, 1.0, 0.5)] };
    let log_h = TrigField { terms: vec![(0.1, 0.0, 1.0, 0.0)] };
    let n = dc.pohozaev_grid;
    let s_v1 = SampledField::sample(&v1, n);
    let s_v2 = SampledField::sample(&v2, n);
    let s_phi = SampledField::sample(&phi, n);
    let s_logh = SampledField::sample(&log_h, n);
    let frame = PohozaevFrame {
        v1: &s_v1,
        v2: &s_v2,
        phi: &s_phi,
        log_h: &s_logh,
        rho: 8.0 * PI,
        center: Point::new(0.5, 0.5),
        manufactured: true,
    };
    let quadrature = BallQuadrature::for_grid(n);
    let mut pohozaev = vec![NamedPohozaev {
        name: "dilation".into(),
        report: pohozaev_identity_1(&frame, dc.pohozaev_r, &quadrature),
    }];
    for (axis, name) in [(0usize, "translation_x"), (1, "translation_y")] {
        pohozaev.push(NamedPohozaev {
            name: name.into(),
            report: pohozaev_identity_2(&frame, dc.pohozaev_r, axis, &quadrature),
        });
    }

    // Kernel residuals at the first bubble's scale.
    let s_scale = PI * blowup.m() as f64 * w.h_eval(&g, blowup.q[0])?;
    let kernel_residuals: Vec<(String, f64)> = [
        ("Y0".to_string(), KernelFunction::Y0),
        ("Y1".to_string(), KernelFunction::Y1),
        ("Y2".to_string(), KernelFunction::Y2),
        ("psi0".to_string(), KernelFunction::Psi0 { s: s_scale }),
        ("psi1".to_string(), KernelFunction::Psi1 { s: s_scale }),
        ("psi2".to_string(), KernelFunction::Psi2 { s: s_scale }),
    ]
    .into_iter()
    .map(|(name, k)| (name, entire_kernel_residual(k, dc.kernel_z_max, dc.kernel_nodes)))
    .collect();

    let mut entire = entire_operator_spectrum(dc.spectrum_theta_nodes, 2);
    entire.truncate(dc.spectrum_count);

    // Linearised spectrum trace and uniqueness probe per domain.
    let (spectrum_trace, uniqueness) = match cfg.domain.kind {
        DomainKindConfig::Disk => {
            let problem = RadialProblem::new(&g, &w, cfg.branch.grid.max(200), DEFAULT_CLUSTER)?;
            let mut trace = Vec::new();
            for &lam in cfg.branch.lambda_schedule.iter().take(6) {
                let rec = disk_radial_solve(&g, &w, lam, cfg.branch.grid.max(200), cfg.branch.delta.max(0.4), 1e-10)?;
                let FieldData::DiskRadial { u, .. } = &rec.field.data else { unreachable!() };
                let vals = disk_radial_linearized_spectrum(&problem, u, rec.rho(), 1)?;
                trace.push((lam, vals[0].abs()));
            }
            let rho = 8.0 * PI - 8.0 * (-dc.uniqueness_lambda).exp();
            let probe = disk_uniqueness_probe(
                &g,
                &w,
                rho,
                dc.uniqueness_starts,
                cfg.branch.grid.max(200),
                dc.uniqueness_perturbation,
                dc.uniqueness_tolerance,
                seed,
            )?;
            (trace, Some(probe))
        }
        DomainKindConfig::Torus => {
            let grid = cfg.branch.grid.clamp(128, 256);
            let problem = TorusProblem::new(&g, &w, grid)?;
            let field = ansatz::bubble_ansatz(&blowup, &g, &w, &problem, dc.uniqueness_lambda)?;
            let rho = field.rho;
            let FieldData::TorusGrid { values, .. } = field.data else { unreachable!() };
            let (u, _, _) = problem.newton_solve(&values, rho, 1e-8, 30)?;
            let vals = torus_linearized_spectrum(&problem, &u, rho, dc.spectrum_count.min(6), 6, seed)?;
            let trace = vals.iter().map(|&v| (dc.uniqueness_lambda, v)).collect();
            let probe = torus_uniqueness_probe(
                &blowup,
                &g,
                &w,
                grid,
                dc.uniqueness_lambda,
                dc.uniqueness_starts,
                dc.uniqueness_perturbation,
                1e-3,
                seed,
            )?;
            (trace, Some(probe))
        }
    };

    let report = DiagnosticsReport {
        pohozaev,
        divergence_polynomial_gap,
        kernel_residuals,
        entire_spectrum: entire,
        spectrum_trace,
        uniqueness,
    };
    out.write_json("diagnostics.json", &report)?;
    Ok(())
}

pub fn stage_disk_exact(cfg: &ExperimentConfig, out: &OutputContext) -> StageResult {
    if cfg.domain.kind != DomainKindConfig::Disk {
        return Err(StageFailure::Config("disk-exact requires the disk domain".into()));
    }
    let schedule = if cfg.branch.lambda_schedule.is_empty() {
        vec![4.0, 5.0, 6.0, 7.0]
    } else {
        cfg.branch.lambda_schedule.clone()
    };
    let header: Vec<String> =
        ["lambda", "mu", "rho", "max_continuum_residual"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for &lam in &schedule {
        let e = disk_exact_solution(lam);
        let res = (0..64)
            .map(|i| e.continuum_residual(i as f64 / 64.0).abs())
            .fold(0.0_f64, f64::max);
        rows.push(vec![fmt(lam), fmt(e.mu), fmt(e.rho), fmt(res)]);
    }
    out.write_csv("disk_exact.csv", &header, &rows)?;
    Ok(())
}

/// Full pipeline in stage order; `only` filters the stages to run.
pub fn stage_run(
    cfg: &ExperimentConfig,
    out: &OutputContext,
    seed: u64,
    only: Option<&[String]>,
) -> StageResult {
    let want = |name: &str| only.is_none_or(|list| list.iter().any(|s| s == name));
    if want("quantities") {
        stage_quantities(cfg, out)?;
    }
    if want("branch") {
        stage_branch(cfg, out)?;
    }
    if want("verify-expansion") {
        stage_verify_expansion(cfg, out)?;
    }
    if want("diagnostics") {
        stage_diagnostics(cfg, out, seed)?;
    }
    Ok(())
}
