use bubblekit::geometry::{DomainSpec, GreenTable, Point};
use bubblekit::weight::WeightSpec;
use bubblekit::quantities::{BlowupConfiguration, PartitionSpec};
use bubblekit::solver::torus::TorusProblem;
use bubblekit::solver::{ansatz, FieldData};

fn main() {
    let g = GreenTable::for_domain(DomainSpec::torus());
    let w = WeightSpec::uniform();
    let problem = TorusProblem::new(&g, &w, 256).unwrap();
    let centers = [Point::new(0.2, 0.2), Point::new(0.7, 0.3), Point::new(0.4, 0.8)];
    let mut rho_common = None;
    for &c in &centers {
        let cfg = BlowupConfiguration { q: vec![c], partition: PartitionSpec::voronoi(0.1) };
        let field = ansatz::bubble_ansatz(&cfg, &g, &w, &problem, 7.0).unwrap();
        let rho = *rho_common.get_or_insert(field.rho);
        let FieldData::TorusGrid { values, .. } = field.data else { unreachable!() };
        let r0 = problem.l2_norm(&problem.residual_field(&values, rho));
        match problem.newton_solve(&values, rho, 1e-8, 30) {
            Ok((u, iters, res)) => {
                // where did the bubble end up?
                let (idx, _) = u.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
                println!("center {c:?}: start_res={r0:.2e} converged iters={iters} res={res:.2e} peak at ({:.3},{:.3})",
                    (idx % 256) as f64 / 256.0, (idx / 256) as f64 / 256.0);
            }
            Err(e) => println!("center {c:?}: start_res={r0:.2e} FAILED: {e}"),
        }
    }
}
