use bubblekit::geometry::{DomainSpec, GreenMethod, GreenTable, Point};
use bubblekit::weight::WeightSpec;
use bubblekit::diagnostics::kernel::{entire_kernel_residual, KernelFunction};
use bubblekit::diagnostics::uniqueness::torus_translation_probe;
use rand::{Rng, SeedableRng};

fn main() {
    let torus = DomainSpec::torus();
    let ew = GreenTable::for_domain(torus);
    let fo = GreenTable::new(torus, GreenMethod::FourierTruncation { k_max: 4000 }).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20260809);
    let mut max_gap = 0.0_f64;
    let mut worst_t = 1.0_f64;
    for _ in 0..100 {
        let a = Point::new(rng.random(), rng.random());
        let mut b = Point::new(rng.random(), rng.random());
        while torus.distance(a, b) < 1e-3 { b = Point::new(rng.random(), rng.random()); }
        let d = torus.displacement(a, b);
        let t = d.y.abs().min(1.0 - d.y.abs()).max(0.0);
        worst_t = worst_t.min(t.abs());
        max_gap = max_gap.max((ew.green(a, b).unwrap() - fo.green(a, b).unwrap()).abs());
    }
    println!("ewald vs fourier(4000) over 100 pairs: max {max_gap:.3e}, min transverse {worst_t:.4}");

    // mean integral accuracy
    use bubblekit::quad;
    for &p in &[Point::new(0.3, 0.4), Point::new(0.0, 0.0)] {
        let eps = 0.05;
        let n = 256;
        let mut outer = 0.0;
        for iy in 0..n { for ix in 0..n {
            let x = Point::new(ix as f64 / n as f64, iy as f64 / n as f64);
            let s = torus.distance(x, p);
            let cut = 1.0 - quad::radial_cutoff(s, eps / 2.0, eps);
            if cut > 0.0 { outer += cut * ew.green(x, p).unwrap(); }
        }}
        outer /= (n * n) as f64;
        let edges = quad::edges_geometric_then_uniform(1e-7, eps / 2.0, eps, 8);
        let inner = quad::integrate_annulus_edges(p, &edges, 128, 12, |x| {
            let s = torus.distance(x, p);
            let cut = quad::radial_cutoff(s, eps / 2.0, eps);
            if cut == 0.0 { 0.0 } else { cut * ew.green(x, p).unwrap_or(0.0) }
        });
        println!("mean integral at {p:?}: {:.3e}", outer + inner);
    }

    // psi residuals at s = pi*m*h(q1) for the torus acceptance weight
    let s_scale = std::f64::consts::PI * 1.0 * (0.75_f64).exp();
    for kind in [KernelFunction::Psi0 { s: s_scale }, KernelFunction::Psi1 { s: s_scale }] {
        println!("{kind:?}: residual {:.3e}", entire_kernel_residual(kind, 20.0, 2000));
    }

    // torus translation control probe
    let w = WeightSpec::uniform();
    let centers = [Point::new(0.2, 0.2), Point::new(0.7, 0.3), Point::new(0.4, 0.8)];
    match torus_translation_probe(&ew, &w, 256, 7.0, &centers, 1e-3) {
        Ok(rep) => println!("translation probe: clusters = {}, failures = {}, dists = {:?}",
            rep.clusters, rep.failures, rep.representative_distances),
        Err(e) => println!("translation probe failed: {e}"),
    }
}
