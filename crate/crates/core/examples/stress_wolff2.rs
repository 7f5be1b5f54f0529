use std::time::Instant;
use wolff_lab_core::geom::PiecewiseLinear;
use wolff_lab_core::wolff::*;
fn main() {
    let tent = PiecewiseLinear::tent(-48.0, 48.0, 1.0, 1.0);
    let base = GraphDomainSpec {
        theta_hat: tent,
        epsilon: 0.08,
        r_half: 16.0,
        height: 16.0,
        p: 3.0,
    };
    let t0 = Instant::now();
    let rows = sign_scan(&base, &[3.0, 1.5, 2.0], 0.08, 0.3, 12.0).unwrap();
    for r in rows {
        println!(
            "p={}: I = {:+.4e} trunc = {:.2e} cubic_ok={} sign={:?} prediction={:?}",
            r.p, r.i_value, r.truncation_error, r.cubic_ok, r.sign, r.prediction
        );
    }
    println!("elapsed {:.1?}", t0.elapsed());
}
