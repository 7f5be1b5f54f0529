//! Scratch: does the generation-4 snowflake show the predicted dimension
//! deficit at p = 3?
use std::time::Instant;
use wolff_lab_core::chain::SubdivisionLimits;
use wolff_lab_core::experiment::*;
use wolff_lab_core::geom::PiecewiseLinear;
use wolff_lab_core::*;

fn main() {
    let theta0 = 0.8;
    let hw = 0.45;
    let phi = PiecewiseLinear::tent(-0.5, 0.5, hw, theta0 * hw * 0.999);
    let template = build_template(phi, theta0, 1, 0.45).unwrap();
    let limits = SubdivisionLimits {
        max_levels: 6,
        min_len: 2e-4,
    };
    let params = WindowParams::default();
    println!(
        "h_graph {:.2e}, r window [{:.3e}, {:.2e}]",
        params.h_graph(),
        params.r_min(),
        params.r_max()
    );
    let t0 = Instant::now();
    let flat = flat_control(&params).unwrap();
    println!(
        "flat control: mean {:.5} std {:.2e} mesh {} tris ({:.1?})",
        flat.spectrum.mu_weighted_mean,
        flat.spectrum.mu_weighted_std,
        flat.mesh.triangles.len(),
        t0.elapsed()
    );
    for gen in [1u32, 2, 3, 4] {
        let t1 = Instant::now();
        let chain = generate_snowflake(&template, gen, limits).unwrap();
        let run = run_window(&chain, &params).unwrap();
        println!(
            "gen {gen}: chain {} verts, mesh {} tris, mean {:.4} std {:.4}, mass {:.4}, clamps {} ({:.1?})",
            chain.vertices.len(),
            run.mesh.triangles.len(),
            run.spectrum.mu_weighted_mean,
            run.spectrum.mu_weighted_std,
            run.measure.total_mass,
            run.measure.clamp_count,
            t1.elapsed()
        );
    }
}
