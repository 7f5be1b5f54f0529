//! Scratch stress run: snowflake window meshing at production scale.
use std::time::Instant;
use wolff_lab_core::chain::SubdivisionLimits;
use wolff_lab_core::mesh::check_mesh;
use wolff_lab_core::*;

fn main() {
    let phi = PiecewiseLinear::tent(-0.5, 0.5, 0.45, 0.25);
    let template = build_template(phi, 0.6, 1, 0.45).unwrap();
    let limits = SubdivisionLimits {
        max_levels: 6,
        min_len: 2e-4,
    };
    for gens in [2u32, 3, 4] {
        let t0 = Instant::now();
        let chain = generate_snowflake(&template, gens, limits).unwrap();
        let t_chain = t0.elapsed();
        let poly = window::window_polygon(&chain, 1.0);
        let t1 = Instant::now();
        let mesh = triangulate(&poly, 0.08, 8.0).unwrap();
        let t_mesh = t1.elapsed();
        check_mesh(&mesh).unwrap();
        let min_angle = (0..mesh.triangles.len())
            .map(|t| mesh.tri_min_angle(t))
            .fold(f64::INFINITY, f64::min);
        println!(
            "gen {gens}: chain {} verts / {} faces ({:.2?}); mesh {} verts {} tris ({:.2?}); min angle {:.1} deg; area err {:.2e}",
            chain.vertices.len(),
            chain.faces.len(),
            t_chain,
            mesh.vertices.len(),
            mesh.triangles.len(),
            t_mesh,
            min_angle.to_degrees(),
            (mesh.total_area() - poly.area()).abs() / poly.area()
        );
    }
}
