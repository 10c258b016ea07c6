use bubblekit::geometry::{DomainSpec, GreenTable, Point};
use bubblekit::weight::WeightSpec;
use bubblekit::quantities::{BlowupConfiguration, PartitionSpec};
use bubblekit::solver::torus::TorusProblem;
use bubblekit::solver::{ansatz, FieldData};

fn main() {
    let g = GreenTable::for_domain(DomainSpec::torus());
    let w = WeightSpec::uniform();
    let problem = TorusProblem::new(&g, &w, 256).unwrap();
    let c = Point::new(0.2, 0.2);
    let cfg = BlowupConfiguration { q: vec![c], partition: PartitionSpec::voronoi(0.1) };
    let field = ansatz::bubble_ansatz(&cfg, &g, &w, &problem, 7.0).unwrap();
    let rho = field.rho;
    let FieldData::TorusGrid { values, .. } = field.data else { unreachable!() };
    let mut u = values;
    for it in 0..12 {
        let f = problem.residual_field(&u, rho);
        let norm = problem.l2_norm(&f);
        let wvec: Vec<f64> = problem.h.iter().zip(&u).map(|(&h, &ui)| rho * h * ui.exp()).collect();
        let rhs: Vec<f64> = f.iter().map(|&x| -x).collect();
        match problem.solve_linear(&wvec, &rhs, None) {
            Ok(step) => {
                let smax = step.iter().fold(0.0_f64, |a, &s| a.max(s.abs()));
                let (idx, _) = u.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
                println!("it {it}: |F| = {:.3e}, step_max = {:.3e}, peak=({:.3},{:.3})", norm, smax,
                   (idx % 256) as f64/256.0, (idx/256) as f64/256.0);
                let scale = if smax > 3.0 { 3.0 / smax } else { 1.0 };
                for i in 0..u.len() { u[i] += scale * step[i]; }
            }
            Err(e) => { println!("it {it}: |F| = {:.3e}, solve failed: {e}", norm); break; }
        }
    }
}
