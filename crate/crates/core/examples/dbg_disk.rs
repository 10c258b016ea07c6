use bubblekit::geometry::{DomainSpec, GreenTable};
use bubblekit::weight::WeightSpec;
use bubblekit::solver::disk::{RadialProblem, disk_exact_solution};

fn main() {
    let g = GreenTable::for_domain(DomainSpec::disk());
    let w = WeightSpec::uniform();
    for &cluster in &[4.0_f64, 5.0, 6.0] {
        for &m in &[200usize, 400] {
            for &lambda in &[4.0_f64, 6.0, 7.0] {
                let p = RadialProblem::new(&g, &w, m, cluster).unwrap();
                let e = disk_exact_solution(lambda);
                let s0 = disk_exact_solution(lambda - 0.3);
                let u0: Vec<f64> = p.radii.iter().map(|&r| s0.u(r)).collect();
                match p.solve_pinned(lambda, &u0, s0.rho, 1e-11, 60) {
                    Ok((u, rho, iters)) => {
                        let sup = p.radii.iter().zip(&u)
                            .map(|(&r, &ui)| (ui - e.u(r)).abs())
                            .fold(0.0_f64, f64::max);
                        println!("a={cluster} M={m} λ={lambda}: rho_err = {:+.3e}, sup_u = {:.3e}, iters={iters}", rho - e.rho, sup);
                    }
                    Err(err) => println!("a={cluster} M={m} λ={lambda}: FAILED {err}"),
                }
            }
        }
    }
}
