use std::time::Instant;
use bubblekit::geometry::{DomainSpec, GreenTable, Point};
use bubblekit::weight::{CosTerm, SmoothPart, WeightSpec};
use bubblekit::quantities::{BlowupConfiguration, PartitionSpec, find_critical_configuration};
use bubblekit::solver::torus::{TorusProblem, continue_branch};

fn main() {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(256);
    let lmax: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(7.0);
    let g = GreenTable::for_domain(DomainSpec::torus());
    let w = WeightSpec::new(
        SmoothPart::ExpCos(vec![
            CosTerm { amp: 0.5, kx: 1.0, ky: 0.0, phase: 0.0 },
            CosTerm { amp: 0.25, kx: 0.0, ky: 1.0, phase: 0.0 },
        ]),
        vec![], 1.0,
    ).unwrap();
    let crit = find_critical_configuration(&g, &w, &[Point::new(0.1, 0.1)], 1e-12, 40).unwrap();
    println!("critical q = {:?}, det = {:.4e}, nondeg = {}", crit.q[0], crit.det, crit.nondegenerate);
    let cfg = BlowupConfiguration { q: crit.q.clone(), partition: PartitionSpec::voronoi(0.1) };
    let t0 = Instant::now();
    let problem = TorusProblem::new(&g, &w, n).unwrap();
    println!("problem setup: {:.2?}", t0.elapsed());
    let schedule: Vec<f64> = {
        let mut v = vec![6.0]; while *v.last().unwrap() < lmax - 1e-9 { let l = v.last().unwrap() + 0.25; v.push(l); } v
    };
    let t0 = Instant::now();
    match continue_branch(&cfg, &g, &w, &problem, &schedule, 0.2, 1e-10) {
        Ok(out) => {
            println!("branch: {} records, aborted: {:?}, time {:.2?}", out.records.len(), out.aborted, t0.elapsed());
            use bubblekit::asymptotics::*;
            let inputs = ExpansionInputs::compute(&cfg, &g, &w).unwrap();
            for r in &out.records {
                let b = &r.descriptors.bubbles[0];
                let lam = b.lambda;
                let lam_id = lam + r.descriptors.mean_u
                    + 2.0 * (r.rho() * {
                        let hx = 0.75_f64.exp(); hx } / 8.0).ln()
                    + {
                        use bubblekit::quantities::g_star;
                        g_star(&cfg, &g, 0, b.x).unwrap()
                    };
                let lm_pred = predict_local_mass(&inputs, 0, lam);
                println!("λ*={:.2} λ={:.6} ρ={:.8} ρ-8π={:+.5e} iters={} res={:.2e} eta/λ²e^-λ={:.4} cells={:.1} lamid/λ²e^-λ={:+.4} ρ₁-pred={:+.3e} w_c1·e^{{λ/2}}={:.3}",
                    r.lambda_target, lam, r.rho(), r.rho() - 8.0*std::f64::consts::PI,
                    r.newton_iters, r.residual_norm,
                    b.eta_sup/(lam*lam*(-lam).exp()), b.core_cells,
                    lam_id/(lam*lam*(-lam).exp()),
                    b.local_mass - lm_pred,
                    r.descriptors.outer_c1*(lam/2.0).exp());
            }
            let refs: Vec<&bubblekit::solver::BranchRecord> = out.records.iter().collect();
            match fit_expansion(&refs, &inputs, 0.0, 0.2, FitBasis::Two) {
                Ok(fit) => println!("fit2: c = {:?}, c1_pred = {:.5}, c1_ratio = {:.4}, cond = {:.2e}", fit.coefficients, fit.predicted_c1, fit.c1_ratio, fit.condition),
                Err(e) => println!("fit2 failed: {e}"),
            }
            match fit_expansion(&refs, &inputs, 0.0, 0.2, FitBasis::Three) {
                Ok(fit) => println!("fit3: c = {:?}, c1_ratio = {:.4}, cond = {:.2e}", fit.coefficients, fit.c1_ratio, fit.condition),
                Err(e) => println!("fit3 failed: {e}"),
            }
        }
        Err(e) => println!("branch failed: {e}"),
    }
}
// appended: fit diagnostics
