//! p-Laplace Dirichlet solves by minimizing the regularized p-Dirichlet
//! energy over piecewise linear finite elements.
//!
//! The energy per triangle is `|T| (delta^2 + |grad u|^2)^(p/2) / p`. The
//! regularization keeps the Newton Hessian bounded and positive definite for
//! every p > 1; a continuation loop drives delta down geometrically, warm
//! starting each stage from the previous one.

use crate::geom::{kahan_sum, Point};
use crate::mesh::TriMesh;
use crate::sparse::{pcg, CsrBuilder};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver did not converge: {iterations} iterations, residual {residual}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invalid exponent p = {0}, need p > 1")]
    BadExponent(f64),
    #[error("boundary data refers to vertex {0} beyond mesh size {1}")]
    BadBoundaryData(usize, usize),
    #[error("ball at ({0}, {1}) radius {2} is not inside the domain")]
    BallOutsideDomain(f64, f64, f64),
}

/// A Dirichlet problem for the p-Laplacian on a triangulated domain.
///
/// `boundary_data` lists the constrained vertices with their values; any
/// boundary vertex not listed is left free (natural boundary condition).
#[derive(Clone)]
pub struct DirichletProblem<'a> {
    pub mesh: &'a TriMesh,
    pub p: f64,
    pub boundary_data: Vec<(usize, f64)>,
    /// Target regularization; 0 means the default floor of 1e-8 times the
    /// gradient scale of the problem.
    pub reg_delta: f64,
}

/// A solved problem: nodal values plus per-triangle gradients.
#[derive(Clone, Debug)]
pub struct PSolution {
    pub nodal_values: Vec<f64>,
    pub tri_gradients: Vec<Point>,
    pub residual_norm: f64,
    pub energy: f64,
    pub p: f64,
    pub reg_delta: f64,
}

/// Per-triangle geometry reused across assemblies.
pub struct ElementCache {
    pub area: Vec<f64>,
    /// Hat function gradients for the three local vertices.
    pub grad_phi: Vec<[Point; 3]>,
}

impl ElementCache {
    pub fn build(mesh: &TriMesh) -> Self {
        let nt = mesh.triangles.len();
        let mut area = Vec::with_capacity(nt);
        let mut grad_phi = Vec::with_capacity(nt);
        for t in 0..nt {
            let [a, b, c] = mesh.triangles[t];
            let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            let two_a = pb.sub(pa).cross(pc.sub(pa));
            area.push(0.5 * two_a);
            grad_phi.push([
                pc.sub(pb).perp_left().scale(1.0 / two_a),
                pa.sub(pc).perp_left().scale(1.0 / two_a),
                pb.sub(pa).perp_left().scale(1.0 / two_a),
            ]);
        }
        Self { area, grad_phi }
    }
}

/// Per-triangle gradient of the nodal field.
pub fn tri_gradients(mesh: &TriMesh, cache: &ElementCache, u: &[f64]) -> Vec<Point> {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangles[t];
            let g = cache.grad_phi[t];
            g[0].scale(u[a]).add(g[1].scale(u[b])).add(g[2].scale(u[c]))
        })
        .collect()
}

/// Regularized p-Dirichlet energy of a nodal field.
pub fn energy(mesh: &TriMesh, u: &[f64], p: f64, reg_delta: f64) -> f64 {
    let cache = ElementCache::build(mesh);
    energy_cached(mesh, &cache, u, p, reg_delta)
}

pub fn energy_cached(mesh: &TriMesh, cache: &ElementCache, u: &[f64], p: f64, reg_delta: f64) -> f64 {
    let d2 = reg_delta * reg_delta;
    kahan_sum((0..mesh.triangles.len()).map(|t| {
        let [a, b, c] = mesh.triangles[t];
        let g = cache.grad_phi[t];
        let gu = g[0].scale(u[a]).add(g[1].scale(u[b])).add(g[2].scale(u[c]));
        cache.area[t] * (d2 + gu.dot(gu)).powf(0.5 * p) / p
    }))
}

/// Assemble the energy gradient (the weak residual) at every vertex.
pub fn residual_vector(mesh: &TriMesh, cache: &ElementCache, u: &[f64], p: f64, reg_delta: f64) -> Vec<f64> {
    let d2 = reg_delta * reg_delta;
    let mut r = vec![0.0; mesh.vertices.len()];
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangles[t];
        let g = cache.grad_phi[t];
        let gu = g[0]
            .scale(u[tri[0]])
            .add(g[1].scale(u[tri[1]]))
            .add(g[2].scale(u[tri[2]]));
        let w = (d2 + gu.dot(gu)).powf(0.5 * p - 1.0);
        let coeff = cache.area[t] * w;
        for k in 0..3 {
            r[tri[k]] += coeff * gu.dot(g[k]);
        }
    }
    r
}

/// Weak residual tested against interior (free) hat functions only.
///
/// Returns `(vertex, residual)` pairs for every vertex not constrained by
/// the boundary data.
pub fn weak_residual(solution: &PSolution, mesh: &TriMesh, constrained: &[usize]) -> Vec<(usize, f64)> {
    let cache = ElementCache::build(mesh);
    let r = residual_vector(mesh, &cache, &solution.nodal_values, solution.p, solution.reg_delta);
    let fixed: std::collections::HashSet<usize> = constrained.iter().copied().collect();
    (0..mesh.vertices.len())
        .filter(|v| !fixed.contains(v))
        .map(|v| (v, r[v]))
        .collect()
}

pub struct SolveOptions {
    /// Sup-norm tolerance for the interior weak residual, relative to the
    /// energy scale of the problem.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// Solve the Dirichlet problem by damped Newton with regularization
/// continuation. The initial stage is the linear (p = 2) solve.
pub fn solve(problem: &DirichletProblem, opts: &SolveOptions) -> Result<PSolution, SolveError> {
    let mesh = problem.mesh;
    let p = problem.p;
    if !(p > 1.0) || !p.is_finite() {
        return Err(SolveError::BadExponent(p));
    }
    let n = mesh.vertices.len();
    for &(v, _) in &problem.boundary_data {
        if v >= n {
            return Err(SolveError::BadBoundaryData(v, n));
        }
    }
    let cache = ElementCache::build(mesh);

    // Free-vertex indexing.
    let mut fixed = vec![false; n];
    let mut u = vec![0.0; n];
    for &(v, val) in &problem.boundary_data {
        fixed[v] = true;
        u[v] = val;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    let free_idx: Vec<usize> = {
        let mut m = vec![usize::MAX; n];
        for (k, &v) in free.iter().enumerate() {
            m[v] = k;
        }
        m
    };
    let nf = free.len();

    // Stage 0: linear solve (w = 1), which is exact for p = 2.
    {
        let mut builder = CsrBuilder::new(nf);
        let mut rhs = vec![0.0; nf];
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangles[t];
            let g = cache.grad_phi[t];
            for i in 0..3 {
                let vi = tri[i];
                if fixed[vi] {
                    continue;
                }
                let fi = free_idx[vi];
                for j in 0..3 {
                    let vj = tri[j];
                    let kij = cache.area[t] * g[i].dot(g[j]);
                    if fixed[vj] {
                        rhs[fi] -= kij * u[vj];
                    } else {
                        builder.add(fi, free_idx[vj], kij);
                    }
                }
            }
        }
        let k = builder.build();
        let mut x = vec![0.0; nf];
        let res = pcg(&k, &rhs, &mut x, 1e-13, 40 * nf.max(64));
        if !res.converged && res.residual > 1e-8 {
            return Err(SolveError::NonConvergence {
                iterations: res.iterations,
                residual: res.residual,
            });
        }
        for (k, &v) in free.iter().enumerate() {
            u[v] = x[k];
        }
    }

    // Gradient scale fixes the regularization floor and tolerance scale.
    let grads = tri_gradients(mesh, &cache, &u);
    let g_scale = grads
        .iter()
        .map(|g| g.norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let delta_min = problem.reg_delta.max(1e-8 * g_scale);
    let energy_scale = energy_cached(mesh, &cache, &u, p, 0.0).abs().max(1e-300);
    let tol_abs = opts.tol * energy_scale;

    if (p - 2.0).abs() < 1e-14 {
        // The linear solve is already the minimizer; regularization only
        // shifts the energy by a constant.
        let r = residual_vector(mesh, &cache, &u, p, delta_min);
        let res_norm = free.iter().map(|&v| r[v].abs()).fold(0.0, f64::max);
        let grads = tri_gradients(mesh, &cache, &u);
        let e = energy_cached(mesh, &cache, &u, p, delta_min);
        return Ok(PSolution {
            tri_gradients: grads,
            nodal_values: u,
            residual_norm: res_norm,
            energy: e,
            p,
            reg_delta: delta_min,
        });
    }

    // Continuation: delta_k = delta_0 / 4^k down to delta_min.
    let mut deltas = Vec::new();
    let mut d = 0.5 * g_scale;
    while d > delta_min {
        deltas.push(d);
        d *= 0.25;
    }
    deltas.push(delta_min);

    let mut total_newton = 0usize;
    for (stage, &delta) in deltas.iter().enumerate() {
        let last_stage = stage + 1 == deltas.len();
        // Loose tolerance on intermediate stages.
        let stage_tol = if last_stage { tol_abs } else { tol_abs.max(1e-4 * energy_scale) };
        let mut newton_iters = 0usize;
        loop {
            let r = residual_vector(mesh, &cache, &u, p, delta);
            let res_norm = free.iter().map(|&v| r[v].abs()).fold(0.0, f64::max);
            if res_norm <= stage_tol {
                break;
            }
            newton_iters += 1;
            total_newton += 1;
            if newton_iters > opts.max_iter || total_newton > 4 * opts.max_iter {
                return Err(SolveError::NonConvergence {
                    iterations: total_newton,
                    residual: res_norm,
                });
            }

            // Newton system on free vertices.
            let d2 = delta * delta;
            let mut builder = CsrBuilder::new(nf);
            let mut rhs = vec![0.0; nf];
            for &v in &free {
                rhs[free_idx[v]] = -r[v];
            }
            for t in 0..mesh.triangles.len() {
                let tri = mesh.triangles[t];
                let g = cache.grad_phi[t];
                let gu = g[0]
                    .scale(u[tri[0]])
                    .add(g[1].scale(u[tri[1]]))
                    .add(g[2].scale(u[tri[2]]));
                let q = d2 + gu.dot(gu);
                let w = q.powf(0.5 * p - 1.0);
                let w2 = (p - 2.0) * q.powf(0.5 * p - 2.0);
                for i in 0..3 {
                    let vi = tri[i];
                    if fixed[vi] {
                        continue;
                    }
                    let fi = free_idx[vi];
                    let gi = g[i];
                    let gu_gi = gu.dot(gi);
                    for j in 0..3 {
                        let vj = tri[j];
                        if fixed[vj] {
                            continue;
                        }
                        let hij = cache.area[t] * (w * gi.dot(g[j]) + w2 * gu_gi * gu.dot(g[j]));
                        builder.add(fi, free_idx[vj], hij);
                    }
                }
            }
            let h = builder.build();
            let mut step = vec![0.0; nf];
            let cg = pcg(&h, &rhs, &mut step, 1e-10, 20 * nf.max(64));
            if !cg.converged && cg.residual.is_nan() {
                return Err(SolveError::NonConvergence {
                    iterations: total_newton,
                    residual: f64::NAN,
                });
            }

            // Backtracking line search with sufficient decrease.
            let e0 = energy_cached(mesh, &cache, &u, p, delta);
            let slope: f64 = free.iter().map(|&v| r[v] * step[free_idx[v]]).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut u_try = u.clone();
                for (k, &v) in free.iter().enumerate() {
                    u_try[v] = u[v] + alpha * step[k];
                }
                let e1 = energy_cached(mesh, &cache, &u_try, p, delta);
                if e1 <= e0 + 1e-4 * alpha * slope {
                    u = u_try;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // The step is not a descent direction at any feasible scale;
                // treat the current iterate as converged for this stage if
                // close, otherwise fail.
                if res_norm <= 10.0 * stage_tol && !last_stage {
                    break;
                }
                return Err(SolveError::NonConvergence {
                    iterations: total_newton,
                    residual: res_norm,
                });
            }
        }
    }

    let r = residual_vector(mesh, &cache, &u, p, delta_min);
    let res_norm = free.iter().map(|&v| r[v].abs()).fold(0.0, f64::max);
    let grads = tri_gradients(mesh, &cache, &u);
    let e = energy_cached(mesh, &cache, &u, p, delta_min);
    Ok(PSolution {
        tri_gradients: grads,
        nodal_values: u,
        residual_norm: res_norm,
        energy: e,
        p,
        reg_delta: delta_min,
    })
}

/// Interior regularity diagnostics of a solution over prescribed balls.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    /// Worst of `r^(p-2) int_{B(w,r/2)} |grad u|^p / (max_{B(w,r)} u)^p`
    /// over the balls.
    pub caccioppoli_ratio: f64,
    /// Worst max/min ratio of `u` over the balls.
    pub harnack_ratio: f64,
    /// Fitted oscillation exponent of `u` over nested balls.
    pub holder_fit_beta: f64,
    /// Fitted oscillation exponent of the gradient over nested balls, or 1
    /// when the gradient is constant to machine precision.
    pub holder_fit_sigma: f64,
}

/// Max and min of a piecewise linear field over the part of the mesh inside
/// `B(w, r)`. Exact for each triangle: extrema sit at clipped polygon
/// corners or at the gradient-aligned arc points.
fn minmax_in_ball(mesh: &TriMesh, cache: &ElementCache, u: &[f64], w: Point, r: f64) -> (f64, f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut area = 0.0;
    let r2 = r * r;
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangles[t];
        let pts = [
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        ];
        let a_clip = crate::geom::disk_polygon_area(w, r, &pts);
        if a_clip <= 0.0 {
            continue;
        }
        area += a_clip;
        let g = cache.grad_phi[t];
        let gu = g[0]
            .scale(u[tri[0]])
            .add(g[1].scale(u[tri[1]]))
            .add(g[2].scale(u[tri[2]]));
        let eval = |p: Point| -> f64 {
            // Linear interpolation via any vertex.
            u[tri[0]] + gu.dot(p.sub(pts[0]))
        };
        let mut consider = |p: Point| {
            let v = eval(p);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        // Vertices inside the ball.
        for p in pts {
            if p.sub(w).dot(p.sub(w)) <= r2 {
                consider(p);
            }
        }
        // Edge-circle crossings.
        for i in 0..3 {
            let (a, b) = (pts[i], pts[(i + 1) % 3]);
            if let Some((t0, t1)) = crate::geom::segment_ball_interval(a, b, w, r) {
                consider(a.lerp(b, t0));
                consider(a.lerp(b, t1));
            }
        }
        // Arc extrema along the gradient direction.
        let gn = gu.norm();
        if gn > 0.0 {
            for s in [1.0, -1.0] {
                let p = w.add(gu.scale(s * r / gn));
                let (la, lb, lc) = barycentric(pts, p);
                if la >= -1e-12 && lb >= -1e-12 && lc >= -1e-12 {
                    consider(p);
                }
            }
        }
    }
    (lo, hi, area)
}

fn barycentric(pts: [Point; 3], p: Point) -> (f64, f64, f64) {
    let [a, b, c] = pts;
    let two_a = b.sub(a).cross(c.sub(a));
    let la = b.sub(p).cross(c.sub(p)) / two_a;
    let lb = c.sub(p).cross(a.sub(p)) / two_a;
    (la, lb, 1.0 - la - lb)
}

/// Compute regularity diagnostics over the given balls, which must lie
/// inside the meshed domain.
pub fn regularity_report(
    solution: &PSolution,
    mesh: &TriMesh,
    balls: &[(Point, f64)],
) -> Result<RegularityReport, SolveError> {
    let cache = ElementCache::build(mesh);
    let u = &solution.nodal_values;
    let p = solution.p;
    let mut caccioppoli: f64 = 0.0;
    let mut harnack: f64 = 0.0;
    for &(w, r) in balls {
        // Coverage check: the ball must be tiled by mesh triangles.
        let (_, _, area) = minmax_in_ball(mesh, &cache, u, w, r);
        let disk = std::f64::consts::PI * r * r;
        if (area - disk).abs() > 1e-8 * disk {
            return Err(SolveError::BallOutsideDomain(w.x, w.y, r));
        }
        // Energy over the half ball.
        let mut int_grad = 0.0;
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangles[t];
            let pts = [
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            ];
            let a_clip = crate::geom::disk_polygon_area(w, r / 2.0, &pts);
            if a_clip > 0.0 {
                let g = cache.grad_phi[t];
                let gu = g[0]
                    .scale(u[tri[0]])
                    .add(g[1].scale(u[tri[1]]))
                    .add(g[2].scale(u[tri[2]]));
                int_grad += a_clip * gu.norm().powf(p);
            }
        }
        let (lo, hi, _) = minmax_in_ball(mesh, &cache, u, w, r);
        if hi > 0.0 {
            caccioppoli = caccioppoli.max(r.powf(p - 2.0) * int_grad / hi.powf(p));
        }
        if lo > 0.0 {
            harnack = harnack.max(hi / lo);
        }
    }

    // Oscillation exponents over nested balls of the first ball. Gradient
    // oscillations below solver precision count as constant.
    let g_scale = solution
        .tri_gradients
        .iter()
        .map(|g| g.norm())
        .fold(0.0f64, f64::max);
    let g_floor = 1e-8 * g_scale.max(1e-300);
    let (w, r0) = balls.first().copied().unwrap_or((Point::new(0.0, 0.0), 0.0));
    let mut pts_u = Vec::new();
    let mut pts_g = Vec::new();
    for j in 0..5 {
        let r = r0 * 0.5f64.powi(j);
        if r <= 0.0 {
            break;
        }
        let (lo, hi, _) = minmax_in_ball(mesh, &cache, u, w, r);
        let osc = hi - lo;
        if osc > 0.0 {
            pts_u.push((r.ln(), osc.ln()));
        }
        // Gradient oscillation: spread of per-triangle gradients over the
        // ball.
        let mut gmin = Point::new(f64::INFINITY, f64::INFINITY);
        let mut gmax = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangles[t];
            let pts = [
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            ];
            if crate::geom::disk_polygon_area(w, r, &pts) > 0.0 {
                let g = solution.tri_gradients[t];
                gmin = Point::new(gmin.x.min(g.x), gmin.y.min(g.y));
                gmax = Point::new(gmax.x.max(g.x), gmax.y.max(g.y));
            }
        }
        let osc_g = gmax.sub(gmin).norm();
        if osc_g > g_floor {
            pts_g.push((r.ln(), osc_g.ln()));
        }
    }
    let beta = if pts_u.len() >= 3 {
        crate::dimension::least_squares_slope(&pts_u).0
    } else {
        1.0
    };
    let sigma = if pts_g.len() >= 3 {
        crate::dimension::least_squares_slope(&pts_g).0
    } else {
        1.0
    };
    Ok(RegularityReport {
        caccioppoli_ratio: caccioppoli,
        harnack_ratio: harnack,
        holder_fit_beta: beta,
        holder_fit_sigma: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate, BoundaryMarker, MarkedPolygon};
    use approx::assert_relative_eq;

    fn unit_square_mesh(h: f64) -> TriMesh {
        let poly = MarkedPolygon::single(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![BoundaryMarker::Graph; 4],
        );
        triangulate(&poly, h, 1.0).unwrap()
    }

    fn dirichlet_from(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> Vec<(usize, f64)> {
        mesh.boundary_vertices()
            .into_iter()
            .map(|v| (v, f(mesh.vertices[v])))
            .collect()
    }

    #[test]
    fn energy_basics() {
        let mesh = unit_square_mesh(0.3);
        let zero = vec![0.0; mesh.vertices.len()];
        assert_eq!(energy(&mesh, &zero, 3.0, 0.0), 0.0);
        // u = y has unit gradient: energy = area / p.
        for p in [1.5, 2.0, 3.0, 5.0] {
            let u: Vec<f64> = mesh.vertices.iter().map(|v| v.y).collect();
            assert_relative_eq!(energy(&mesh, &u, p, 0.0), 1.0 / p, max_relative = 1e-12);
        }
    }

    #[test]
    fn energy_matches_stiffness_quadratic_form_at_p2() {
        // Independent oracle: assemble the p = 2 stiffness matrix entry by
        // entry and compare u' K u / 2 with the energy.
        let mesh = unit_square_mesh(0.4);
        let cache = ElementCache::build(&mesh);
        let n = mesh.vertices.len();
        let u: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|v| (3.0 * v.x).sin() + v.y * v.y)
            .collect();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut kij = 0.0;
                for t in 0..mesh.triangles.len() {
                    let tri = mesh.triangles[t];
                    let gi = (0..3).find(|&k| tri[k] == i).map(|k| cache.grad_phi[t][k]);
                    let gj = (0..3).find(|&k| tri[k] == j).map(|k| cache.grad_phi[t][k]);
                    if let (Some(gi), Some(gj)) = (gi, gj) {
                        kij += cache.area[t] * gi.dot(gj);
                    }
                }
                quad += u[i] * kij * u[j];
            }
        }
        assert_relative_eq!(energy(&mesh, &u, 2.0, 0.0), 0.5 * quad, max_relative = 1e-10);
    }

    #[test]
    fn affine_exactness_all_p() {
        let mesh = unit_square_mesh(0.25);
        for p in [1.5, 2.0, 3.0, 5.0] {
            let problem = DirichletProblem {
                mesh: &mesh,
                p,
                boundary_data: dirichlet_from(&mesh, |v| v.y),
                reg_delta: 0.0,
            };
            let sol = solve(&problem, &SolveOptions::default()).unwrap();
            for (v, pt) in mesh.vertices.iter().enumerate() {
                assert!(
                    (sol.nodal_values[v] - pt.y).abs() < 1e-10,
                    "p={p}: vertex {v} error {}",
                    (sol.nodal_values[v] - pt.y).abs()
                );
            }
        }
    }

    #[test]
    fn affine_residual_is_zero() {
        let mesh = unit_square_mesh(0.3);
        let u: Vec<f64> = mesh.vertices.iter().map(|v| 0.3 * v.x - 1.7 * v.y).collect();
        let cache = ElementCache::build(&mesh);
        let r = residual_vector(&mesh, &cache, &u, 3.0, 0.0);
        let bset: std::collections::HashSet<usize> =
            mesh.boundary_vertices().into_iter().collect();
        for v in 0..mesh.vertices.len() {
            if !bset.contains(&v) {
                assert!(r[v].abs() < 1e-12, "residual {} at {v}", r[v]);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = unit_square_mesh(0.35);
        let cache = ElementCache::build(&mesh);
        let n = mesh.vertices.len();
        let u: Vec<f64> = mesh.vertices.iter().map(|v| v.x * v.x - 0.5 * v.y).collect();
        for p in [1.5, 3.0] {
            let delta = 0.1;
            let r = residual_vector(&mesh, &cache, &u, p, delta);
            // Central finite differences of the energy in 20 random
            // directions.
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20 {
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let h = 1e-6;
                let up: Vec<f64> = (0..n).map(|i| u[i] + h * dir[i]).collect();
                let um: Vec<f64> = (0..n).map(|i| u[i] - h * dir[i]).collect();
                let fd = (energy_cached(&mesh, &cache, &up, p, delta)
                    - energy_cached(&mesh, &cache, &um, p, delta))
                    / (2.0 * h);
                let an: f64 = (0..n).map(|i| r[i] * dir[i]).sum();
                assert_relative_eq!(fd, an, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn perturbation_grows_residual() {
        let mesh = unit_square_mesh(0.3);
        let problem = DirichletProblem {
            mesh: &mesh,
            p: 3.0,
            boundary_data: dirichlet_from(&mesh, |v| v.x + 0.2 * v.y),
            reg_delta: 0.0,
        };
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let constrained: Vec<usize> = problem.boundary_data.iter().map(|d| d.0).collect();
        let base = weak_residual(&sol, &mesh, &constrained)
            .iter()
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max);
        let mut bumped = sol.clone();
        let interior = (0..mesh.vertices.len())
            .find(|v| !constrained.contains(v))
            .unwrap();
        bumped.nodal_values[interior] += 1e-3;
        let after = weak_residual(&bumped, &mesh, &constrained)
            .iter()
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max);
        assert!(after > 100.0 * base.max(1e-14), "base {base} after {after}");
    }

    #[test]
    fn comparison_principle() {
        let mesh = unit_square_mesh(0.3);
        for p in [1.5, 3.0] {
            let lo = DirichletProblem {
                mesh: &mesh,
                p,
                boundary_data: dirichlet_from(&mesh, |v| v.y),
                reg_delta: 0.0,
            };
            let hi = DirichletProblem {
                mesh: &mesh,
                p,
                boundary_data: dirichlet_from(&mesh, |v| v.y + 0.3 + 0.1 * v.x),
                reg_delta: 0.0,
            };
            let sol_lo = solve(&lo, &SolveOptions::default()).unwrap();
            let sol_hi = solve(&hi, &SolveOptions::default()).unwrap();
            for v in 0..mesh.vertices.len() {
                assert!(
                    sol_hi.nodal_values[v] >= sol_lo.nodal_values[v] - 1e-10,
                    "comparison fails at {v} for p={p}"
                );
            }
        }
    }

    #[test]
    fn maximum_principle_nonnegative() {
        let mesh = unit_square_mesh(0.25);
        let problem = DirichletProblem {
            mesh: &mesh,
            p: 3.0,
            boundary_data: dirichlet_from(&mesh, |v| (2.0 * v.x).sin().abs() + 0.1),
            reg_delta: 0.0,
        };
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let min = sol.nodal_values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "minimum {min}");
    }

    #[test]
    fn regularity_affine_closed_forms() {
        // Mesh covering [-1, 1] x [0, 2] with u = y.
        let poly = crate::mesh::MarkedPolygon::single(
            vec![
                Point::new(-1.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 2.0),
                Point::new(-1.0, 2.0),
            ],
            vec![BoundaryMarker::Graph; 4],
        );
        let mesh = triangulate(&poly, 0.2, 1.0).unwrap();
        let problem = DirichletProblem {
            mesh: &mesh,
            p: 3.0,
            boundary_data: dirichlet_from(&mesh, |v| v.y),
            reg_delta: 0.0,
        };
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let w = Point::new(0.0, 1.0);
        let r = 0.5;
        let rep = regularity_report(&sol, &mesh, &[(w, r)]).unwrap();
        // max over B = 1.5, min = 0.5.
        assert_relative_eq!(rep.harnack_ratio, 3.0, max_relative = 1e-9);
        // |grad u| = 1: integral over B(w, r/2) is pi (r/2)^2.
        let expected =
            r.powf(1.0) * std::f64::consts::PI * (r / 2.0) * (r / 2.0) / 1.5f64.powi(3);
        assert_relative_eq!(rep.caccioppoli_ratio, expected, max_relative = 1e-9);
        // u oscillates linearly: beta = 1; gradient constant: sigma
        // defaults to 1.
        assert_relative_eq!(rep.holder_fit_beta, 1.0, epsilon = 1e-9);
        assert_relative_eq!(rep.holder_fit_sigma, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn regularity_rejects_outside_ball() {
        let mesh = unit_square_mesh(0.3);
        let problem = DirichletProblem {
            mesh: &mesh,
            p: 2.0,
            boundary_data: dirichlet_from(&mesh, |v| v.y + 1.0),
            reg_delta: 0.0,
        };
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let res = regularity_report(&sol, &mesh, &[(Point::new(0.5, 0.5), 2.0)]);
        assert!(matches!(res, Err(SolveError::BallOutsideDomain(..))));
    }
}
