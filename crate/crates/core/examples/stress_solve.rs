//! Scratch: annulus radial oracle convergence and timing.
use std::time::Instant;
use wolff_lab_core::mesh::{triangulate, BoundaryMarker, MarkedPolygon};
use wolff_lab_core::plaplace::{solve, DirichletProblem, SolveOptions};
use wolff_lab_core::Point;

fn annulus_polygon(h: f64) -> MarkedPolygon {
    let ring = |r: f64, ccw: bool| -> Vec<Point> {
        let n = ((2.0 * std::f64::consts::PI * r / h).ceil() as usize).max(24);
        let mut pts: Vec<Point> = (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Point::new(r * th.cos(), r * th.sin())
            })
            .collect();
        if !ccw {
            pts.reverse();
        }
        pts
    };
    let outer = ring(1.0, true);
    let inner = ring(0.5, false);
    let m_out = vec![BoundaryMarker::Graph; outer.len()];
    let m_in = vec![BoundaryMarker::Graph; inner.len()];
    MarkedPolygon {
        rings: vec![outer, inner],
        markers: vec![m_out, m_in],
    }
}

fn main() {
    let p = 3.0;
    let exact = |pt: Point| -> f64 { pt.norm().powf((p - 2.0) / (p - 1.0)) };
    let mut prev_err = None;
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let t0 = Instant::now();
        let poly = annulus_polygon(h);
        let mesh = triangulate(&poly, h, 1.0).unwrap();
        let bc: Vec<(usize, f64)> = mesh
            .boundary_vertices()
            .into_iter()
            .map(|v| (v, exact(mesh.vertices[v])))
            .collect();
        let problem = DirichletProblem {
            mesh: &mesh,
            p,
            boundary_data: bc,
            reg_delta: 0.0,
        };
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let err = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(v, pt)| (sol.nodal_values[v] - exact(*pt)).abs())
            .fold(0.0f64, f64::max);
        let ratio = prev_err.map(|pe: f64| err / pe).unwrap_or(f64::NAN);
        println!(
            "h=1/{:<4} verts {:>6} err {:.3e} ratio {:.3} residual {:.2e}  ({:.2?})",
            (1.0 / h) as u32,
            mesh.vertices.len(),
            err,
            ratio,
            sol.residual_norm,
            t0.elapsed()
        );
        prev_err = Some(err);
    }
}
