use bubblekit::diagnostics::fields::*;
use bubblekit::diagnostics::pohozaev::*;
use bubblekit::geometry::Point;
use std::f64::consts::PI;

fn main() {
    for &(bw, ba, pa, la) in &[
        (0.20, 0.15, 0.15, 0.1),
        (0.25, 0.2, 0.15, 0.1),
    ] {
        let v1 = TrigField { terms: vec![(0.3, 1.0, 0.0, 0.3), (0.15, 0.0, 1.0, -0.2)] };
        let bump = BumpField { center: Point::new(0.52, 0.47), width: bw, amp: ba };
        let v2 = SumField { parts: vec![(1.0, &v1 as &dyn Field2), (1.0, &bump as &dyn Field2)] };
        let phi = TrigField { terms: vec![(pa, 1.0, 1.0, 0.5)] };
        let log_h = TrigField { terms: vec![(la, 0.0, 1.0, 0.0)] };
        for n in [256usize, 512] {
            let s_v1 = SampledField::sample(&v1, n);
            let s_v2 = SampledField::sample(&v2, n);
            let s_phi = SampledField::sample(&phi, n);
            let s_logh = SampledField::sample(&log_h, n);
            let frame = PohozaevFrame {
                v1: &s_v1, v2: &s_v2, phi: &s_phi, log_h: &s_logh,
                rho: 8.0 * PI, center: Point::new(0.5, 0.5), manufactured: true,
            };
            let q = BallQuadrature::for_grid(n);
            let r1 = pohozaev_identity_1(&frame, 0.15, &q);
            let r2x = pohozaev_identity_2(&frame, 0.15, 0, &q);
            let r2y = pohozaev_identity_2(&frame, 0.15, 1, &q);
            println!("bw={bw} ba={ba} pa={pa} la={la} N={n}: dil {:.3e} (|lhs|={:.2e}) tx {:.3e} ty {:.3e}",
                r1.normalized_gap, r1.lhs.abs(), r2x.normalized_gap, r2y.normalized_gap);
        }
    }
}
