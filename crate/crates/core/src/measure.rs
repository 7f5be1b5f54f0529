//! Boundary Riesz measures of p-Laplace solutions: extraction from the weak
//! form, density cross-checks, ball masses, doubling ratios, and the
//! measure-solution comparability diagnostic.

use crate::chain::BoundaryChain;
use crate::flatness::{corkscrew_point, FlatnessError};
use crate::geom::{kahan_sum, segment_ball_interval, Point};
use crate::mesh::{BoundaryMarker, MeshLocator, TriMesh};
use crate::plaplace::{residual_vector, ElementCache, PSolution};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("solution is not zero on the graph boundary: |u| reaches {0}")]
    NotZeroBoundary(f64),
    #[error("no graph-marked boundary edges in the mesh")]
    NoGraphBoundary,
    #[error("ball around ({0}, {1}) carries no mass")]
    ZeroMass(f64, f64),
    #[error(transparent)]
    Corkscrew(#[from] FlatnessError),
}

/// A nonnegative weight per boundary node on the zero-set portion of the
/// boundary. Each node's weight is spread uniformly over its support (half
/// of each adjacent graph edge), which makes ball masses exact for piecewise
/// constant densities.
#[derive(Clone, Debug)]
pub struct BoundaryMeasure {
    /// (vertex index, weight), sorted by vertex index.
    pub node_weights: Vec<(usize, f64)>,
    /// Node positions, aligned with `node_weights`.
    pub node_points: Vec<Point>,
    /// Support segments per node (one or two half-edges), aligned.
    pub node_support: Vec<Vec<(Point, Point)>>,
    pub total_mass: f64,
    /// Number of negative weights clamped to zero during extraction.
    pub clamp_count: usize,
}

impl BoundaryMeasure {
    /// Mass inside the open ball `B(x, r)`, splitting node weights by the
    /// exactly clipped fraction of their support.
    pub fn mass_in_ball(&self, x: Point, r: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &(_, w)) in self.node_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let support = &self.node_support[k];
            let total: f64 = support.iter().map(|(a, b)| a.dist(*b)).sum();
            if total == 0.0 {
                // Point mass.
                if self.node_points[k].dist(x) < r {
                    acc += w;
                }
                continue;
            }
            let mut clipped = 0.0;
            for (a, b) in support {
                if let Some((t0, t1)) = segment_ball_interval(*a, *b, x, r) {
                    clipped += a.dist(*b) * (t1 - t0);
                }
            }
            acc += w * clipped / total;
        }
        acc
    }

    /// A synthetic measure from explicit weights at points, supported on the
    /// segments between consecutive points. Used for test fixtures such as
    /// the Cantor measure.
    pub fn from_weighted_polyline(points: &[Point], weights: &[f64]) -> Self {
        assert_eq!(points.len(), weights.len());
        let n = points.len();
        let mut node_support = Vec::with_capacity(n);
        for i in 0..n {
            let mut sup = Vec::new();
            if i > 0 {
                let mid = points[i - 1].lerp(points[i], 0.5);
                sup.push((mid, points[i]));
            }
            if i + 1 < n {
                let mid = points[i].lerp(points[i + 1], 0.5);
                sup.push((points[i], mid));
            }
            node_support.push(sup);
        }
        Self {
            node_weights: weights.iter().copied().enumerate().collect(),
            node_points: points.to_vec(),
            node_support,
            total_mass: kahan_sum(weights.iter().copied()),
            clamp_count: 0,
        }
    }

    /// A single atom.
    pub fn point_mass(at: Point, w: f64) -> Self {
        Self {
            node_weights: vec![(0, w)],
            node_points: vec![at],
            node_support: vec![vec![]],
            total_mass: w,
            clamp_count: 0,
        }
    }
}

/// Extract the boundary Riesz measure of a solution that vanishes on the
/// graph portion of the boundary.
///
/// The weight of the hat function at graph vertex `i` is the negative of the
/// regularized weak form tested against that hat function; with piecewise
/// linear elements the per-triangle quadrature is exact.
pub fn riesz_weights(solution: &PSolution, mesh: &TriMesh) -> Result<BoundaryMeasure, MeasureError> {
    let graph_vertices = mesh.marked_vertices(BoundaryMarker::Graph);
    if graph_vertices.is_empty() {
        return Err(MeasureError::NoGraphBoundary);
    }
    let scale = solution
        .nodal_values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let max_on_graph = graph_vertices
        .iter()
        .map(|&v| solution.nodal_values[v].abs())
        .fold(0.0, f64::max);
    if max_on_graph > 1e-9 * scale {
        return Err(MeasureError::NotZeroBoundary(max_on_graph));
    }

    let cache = ElementCache::build(mesh);
    let r = residual_vector(mesh, &cache, &solution.nodal_values, solution.p, solution.reg_delta);

    // Graph-edge adjacency for node supports.
    let mut adjacent: std::collections::HashMap<usize, Vec<(Point, Point)>> =
        std::collections::HashMap::new();
    for e in &mesh.boundary_edges {
        if e.marker != BoundaryMarker::Graph {
            continue;
        }
        let (a, b) = (mesh.vertices[e.v0], mesh.vertices[e.v1]);
        let mid = a.lerp(b, 0.5);
        adjacent.entry(e.v0).or_default().push((a, mid));
        adjacent.entry(e.v1).or_default().push((mid, b));
    }

    let mut node_weights = Vec::with_capacity(graph_vertices.len());
    let mut node_points = Vec::with_capacity(graph_vertices.len());
    let mut node_support = Vec::with_capacity(graph_vertices.len());
    let mut clamp_count = 0usize;
    for &v in &graph_vertices {
        let mut w = -r[v];
        if w < 0.0 {
            if w < -1e-10 * scale.max(1.0) {
                clamp_count += 1;
            }
            w = 0.0;
        }
        node_weights.push((v, w));
        node_points.push(mesh.vertices[v]);
        node_support.push(adjacent.get(&v).cloned().unwrap_or_default());
    }
    let total_mass = kahan_sum(node_weights.iter().map(|&(_, w)| w));
    Ok(BoundaryMeasure {
        node_weights,
        node_points,
        node_support,
        total_mass,
        clamp_count,
    })
}

/// Boundary density estimate `|grad u|^(p-1)` on the triangle adjacent to
/// each graph edge. Returns `(v0, v1, density)` per graph edge.
pub fn density_estimate(solution: &PSolution, mesh: &TriMesh) -> Vec<(usize, usize, f64)> {
    // Edge -> adjacent triangle map.
    let mut tri_of_edge: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            tri_of_edge.insert((u.min(v), u.max(v)), t);
        }
    }
    let p = solution.p;
    mesh.boundary_edges
        .iter()
        .filter(|e| e.marker == BoundaryMarker::Graph)
        .map(|e| {
            let t = tri_of_edge[&(e.v0.min(e.v1), e.v0.max(e.v1))];
            let g = solution.tri_gradients[t].norm();
            (e.v0, e.v1, g.powf(p - 1.0))
        })
        .collect()
}

/// Mass of the boundary ball `Delta(x, r)`.
pub fn mu_ball(measure: &BoundaryMeasure, x: Point, r: f64) -> f64 {
    measure.mass_in_ball(x, r)
}

/// Doubling ratios `mu(Delta(x, 2r)) / mu(Delta(x, r))` over the given
/// centers and radii. Centers with zero mass at radius `r` are skipped.
pub fn doubling_profile(
    measure: &BoundaryMeasure,
    centers: &[Point],
    radii: &[f64],
) -> Vec<(Point, f64, f64)> {
    let mut out = Vec::new();
    for &x in centers {
        for &r in radii {
            let small = measure.mass_in_ball(x, r);
            if small > 0.0 {
                out.push((x, r, measure.mass_in_ball(x, 2.0 * r) / small));
            }
        }
    }
    out
}

/// One scale of the comparability diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct ComparabilityRow {
    pub r: f64,
    pub r_tilde: f64,
    /// u(a)^(p-1) / (r^(p-2) mu(Delta(w, r_tilde)))
    pub ratio_full: f64,
    /// u(a)^(p-1) / (r^(p-2) mu(Delta(w, r_tilde / 2)))
    pub ratio_half: f64,
}

/// Compare the solution at corkscrew points with the measure of boundary
/// balls across scales, the two-sided ratio diagnostic.
#[allow(clippy::too_many_arguments)]
pub fn lemma_comparability(
    solution: &PSolution,
    measure: &BoundaryMeasure,
    chain: &BoundaryChain,
    mesh: &TriMesh,
    inside: impl Fn(Point) -> bool + Copy,
    w: Point,
    scales: &[f64],
    m: f64,
) -> Result<Vec<ComparabilityRow>, MeasureError> {
    let c0 = 4.0;
    let p = solution.p;
    let locator = MeshLocator::new(mesh);
    let mut out = Vec::new();
    for &r in scales {
        let r_tilde = r / c0;
        let a = corkscrew_point(chain, inside, w, r_tilde, m)?;
        let u_a = locator
            .eval(&solution.nodal_values, a)
            .ok_or(MeasureError::ZeroMass(a.x, a.y))?;
        let m_full = measure.mass_in_ball(w, r_tilde);
        let m_half = measure.mass_in_ball(w, r_tilde / 2.0);
        if m_full <= 0.0 || m_half <= 0.0 {
            return Err(MeasureError::ZeroMass(w.x, w.y));
        }
        let num = u_a.max(0.0).powf(p - 1.0);
        let pow = r.powf(p - 2.0);
        out.push(ComparabilityRow {
            r,
            r_tilde,
            ratio_full: num / (pow * m_full),
            ratio_half: num / (pow * m_half),
        });
    }
    Ok(out)
}

/// Write the measure as CSV rows `node_index,x,y,weight`.
pub fn to_csv(measure: &BoundaryMeasure) -> String {
    let mut s = String::from("node_index,x,y,weight\n");
    for (k, &(v, w)) in measure.node_weights.iter().enumerate() {
        let p = measure.node_points[k];
        s.push_str(&format!("{},{},{},{}\n", v, p.x, p.y, w));
    }
    s
}
