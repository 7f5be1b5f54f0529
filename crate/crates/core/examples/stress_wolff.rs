//! Scratch: curvature fit quality vs analytic value across p and resolution.
use std::time::Instant;
use wolff_lab_core::geom::PiecewiseLinear;
use wolff_lab_core::wolff::*;

fn main() {
    let tent = PiecewiseLinear::tent(-48.0, 48.0, 1.0, 1.0);
    for (r, h, grading) in [
        (12.0, 0.35, 14.0),
        (12.0, 0.25, 10.0),
        (16.0, 0.3, 12.0),
    ] {
        for p in [3.0, 1.5, 2.0] {
            let spec = GraphDomainSpec {
                theta_hat: tent.clone(),
                epsilon: 0.08,
                r_half: r,
                height: r,
                p,
            };
            let t0 = Instant::now();
            let solver = GraphFamilySolver::new(spec.clone(), h, grading).unwrap();
            let grid = symmetric_grid(0.08);
            match ddi_fd(&solver, &grid) {
                Ok(fit) => {
                    let analytic = spec.analytic_a2();
                    println!(
                        "R={r} h={h:<5} p={p}: a2 {:+.4} (analytic {:+.4}, ratio {:.3}) a3 {:+.3} R2 {:.5}  [{:.1?}]",
                        fit.a2,
                        analytic,
                        if analytic != 0.0 { fit.a2 / analytic } else { f64::NAN },
                        fit.a3,
                        fit.r2,
                        t0.elapsed()
                    );
                }
                Err(e) => println!("R={r} h={h} p={p}: ERROR {e}"),
            }
        }
    }
}
