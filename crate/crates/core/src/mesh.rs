//! Conforming graded triangulations of polygonal domains.
//!
//! The triangulator is an incremental constrained Delaunay construction with
//! Ruppert-style quality and size refinement. Boundary edges carry markers so
//! downstream solves can tell the graph portion of the boundary from the
//! artificial truncation.

use crate::geom::{kahan_sum, orient, segments_cross, Point, SegmentGrid};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("refinement produced more than {0} vertices; size field too aggressive")]
    RefinementOverflow(usize),
    #[error("constraint edge ({0}, {1}) could not be recovered")]
    ConstraintRecovery(usize, usize),
}

/// Which part of the domain boundary an edge belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMarker {
    Graph,
    ArtificialTop,
    ArtificialSide,
}

/// Input to the triangulator: one outer ring (counterclockwise) plus optional
/// hole rings, each edge tagged with a marker.
#[derive(Clone, Debug)]
pub struct MarkedPolygon {
    pub rings: Vec<Vec<Point>>,
    pub markers: Vec<Vec<BoundaryMarker>>,
}

impl MarkedPolygon {
    pub fn single(ring: Vec<Point>, markers: Vec<BoundaryMarker>) -> Self {
        Self {
            rings: vec![ring],
            markers: vec![markers],
        }
    }

    /// Total enclosed area (outer minus holes), up to ring orientation.
    pub fn area(&self) -> f64 {
        let mut total = 0.0;
        for ring in &self.rings {
            total += crate::geom::polygon_area(ring);
        }
        total
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v0: usize,
    pub v1: usize,
    pub marker: BoundaryMarker,
}

/// A conforming triangulation with boundary markers.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub h_max: f64,
}

impl TriMesh {
    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * pb.sub(pa).cross(pc.sub(pa))
    }

    pub fn total_area(&self) -> f64 {
        kahan_sum((0..self.triangles.len()).map(|t| self.tri_area(t)))
    }

    pub fn tri_min_angle(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        min_angle(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Vertices lying on any boundary edge.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|e| [e.v0, e.v1])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Vertices on boundary edges with the given marker.
    pub fn marked_vertices(&self, marker: BoundaryMarker) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.marker == marker)
            .flat_map(|e| [e.v0, e.v1])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct MeshJson<'a> {
            format_version: u32,
            vertices: Vec<[f64; 2]>,
            triangles: &'a Vec<[usize; 3]>,
            boundary_edges: &'a Vec<BoundaryEdge>,
            h_max: f64,
        }
        serde_json::to_value(MeshJson {
            format_version: 1,
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            triangles: &self.triangles,
            boundary_edges: &self.boundary_edges,
            h_max: self.h_max,
        })
        .expect("mesh serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct MeshJson {
            #[allow(dead_code)]
            #[serde(default)]
            format_version: u32,
            vertices: Vec<[f64; 2]>,
            triangles: Vec<[usize; 3]>,
            boundary_edges: Vec<BoundaryEdge>,
            #[serde(default)]
            h_max: f64,
        }
        let j: MeshJson = serde_json::from_value(v.clone())?;
        Ok(Self {
            vertices: j.vertices.iter().map(|p| Point::new(p[0], p[1])).collect(),
            triangles: j.triangles,
            boundary_edges: j.boundary_edges,
            h_max: j.h_max,
        })
    }
}

/// Uniform-grid point locator over a fixed mesh.
pub struct MeshLocator<'a> {
    mesh: &'a TriMesh,
    cell: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl<'a> MeshLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
        let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &mesh.vertices {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let nt = mesh.triangles.len().max(1);
        let span_x = (xmax - xmin).max(1e-12);
        let span_y = (ymax - ymin).max(1e-12);
        let target = ((nt as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let (nx, ny) = (target, target);
        let cell = (span_x / nx as f64).max(span_y / ny as f64);
        let mut bins = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let (a, b, c) = (
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            let txmin = a.x.min(b.x).min(c.x);
            let txmax = a.x.max(b.x).max(c.x);
            let tymin = a.y.min(b.y).min(c.y);
            let tymax = a.y.max(b.y).max(c.y);
            let ix0 = (((txmin - xmin) / cell).floor() as isize).clamp(0, nx as isize - 1);
            let ix1 = (((txmax - xmin) / cell).floor() as isize).clamp(0, nx as isize - 1);
            let iy0 = (((tymin - ymin) / cell).floor() as isize).clamp(0, ny as isize - 1);
            let iy1 = (((tymax - ymin) / cell).floor() as isize).clamp(0, ny as isize - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy as usize * nx + ix as usize].push(t as u32);
                }
            }
        }
        Self {
            mesh,
            cell,
            x0: xmin,
            y0: ymin,
            nx,
            ny,
            bins,
        }
    }

    /// Find the triangle containing `p` with its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let ix = (((p.x - self.x0) / self.cell).floor() as isize).clamp(0, self.nx as isize - 1);
        let iy = (((p.y - self.y0) / self.cell).floor() as isize).clamp(0, self.ny as isize - 1);
        for &t in &self.bins[iy as usize * self.nx + ix as usize] {
            let tri = self.mesh.triangles[t as usize];
            let (a, b, c) = (
                self.mesh.vertices[tri[0]],
                self.mesh.vertices[tri[1]],
                self.mesh.vertices[tri[2]],
            );
            let two_a = b.sub(a).cross(c.sub(a));
            let la = b.sub(p).cross(c.sub(p)) / two_a;
            let lb = c.sub(p).cross(a.sub(p)) / two_a;
            let lc = 1.0 - la - lb;
            let eps = -1e-12;
            if la >= eps && lb >= eps && lc >= eps {
                return Some((t as usize, [la, lb, lc]));
            }
        }
        None
    }

    /// Interpolate a nodal field at `p`.
    pub fn eval(&self, nodal: &[f64], p: Point) -> Option<f64> {
        let (t, l) = self.locate(p)?;
        let tri = self.mesh.triangles[t];
        Some(l[0] * nodal[tri[0]] + l[1] * nodal[tri[1]] + l[2] * nodal[tri[2]])
    }
}

fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let la = b.dist(c);
    let lb = a.dist(c);
    let lc = a.dist(b);
    let angle = |opp: f64, s1: f64, s2: f64| -> f64 {
        let cosv = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
        cosv.acos()
    };
    angle(la, lb, lc).min(angle(lb, la, lc)).min(angle(lc, la, lb))
}

fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d == 0.0 {
        return None;
    }
    let a2 = a.x * a.x + a.y * a.y;
    let b2 = b.x * b.x + b.y * b.y;
    let c2 = c.x * c.x + c.y * c.y;
    Some(Point::new(
        (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
        (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d,
    ))
}

#[inline]
fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
        robust::Coord { x: d.x, y: d.y },
    )
}

const NONE: u32 = u32::MAX;
/// The quality floor for refinement, in radians (20 degrees).
pub const MIN_ANGLE_RAD: f64 = 20.0 * std::f64::consts::PI / 180.0;
const MAX_VERTICES: usize = 4_000_000;

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct EdgeKey(u32, u32);

impl EdgeKey {
    fn new(a: u32, b: u32) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

/// Incremental constrained Delaunay triangulation state.
struct Cdt {
    pts: Vec<Point>,
    tris: Vec<[u32; 3]>,
    nbrs: Vec<[u32; 3]>,
    alive: Vec<bool>,
    constrained: HashMap<EdgeKey, BoundaryMarker>,
    /// One alive triangle containing each vertex, kept current on edits.
    vert_tri: Vec<u32>,
    walk_hint: u32,
}

impl Cdt {
    /// Start from a large bounding triangle around all expected points.
    fn new(bbox_min: Point, bbox_max: Point) -> Self {
        let cx = 0.5 * (bbox_min.x + bbox_max.x);
        let cy = 0.5 * (bbox_min.y + bbox_max.y);
        let span = (bbox_max.x - bbox_min.x).max(bbox_max.y - bbox_min.y).max(1e-9);
        let r = 10.0 * span;
        let pts = vec![
            Point::new(cx - 2.0 * r, cy - r),
            Point::new(cx + 2.0 * r, cy - r),
            Point::new(cx, cy + 2.0 * r),
        ];
        Cdt {
            pts,
            tris: vec![[0, 1, 2]],
            nbrs: vec![[NONE, NONE, NONE]],
            alive: vec![true],
            constrained: HashMap::new(),
            vert_tri: vec![0, 0, 0],
            walk_hint: 0,
        }
    }

    fn note_tri(&mut self, t: u32) {
        for v in self.tris[t as usize] {
            self.vert_tri[v as usize] = t;
        }
    }

    fn tri_pts(&self, t: u32) -> (Point, Point, Point) {
        let [a, b, c] = self.tris[t as usize];
        (self.pts[a as usize], self.pts[b as usize], self.pts[c as usize])
    }

    fn index_of_vertex(&self, t: u32, v: u32) -> usize {
        let tv = self.tris[t as usize];
        (0..3).find(|&i| tv[i] == v).expect("vertex must be in triangle")
    }

    fn index_of_neighbor(&self, t: u32, n: u32) -> usize {
        let tn = self.nbrs[t as usize];
        (0..3).find(|&i| tn[i] == n).expect("neighbor must be linked")
    }

    fn set_neighbor(&mut self, t: u32, i: usize, n: u32) {
        self.nbrs[t as usize][i] = n;
    }

    fn replace_neighbor(&mut self, t: u32, old: u32, new: u32) {
        if t == NONE {
            return;
        }
        let i = self.index_of_neighbor(t, old);
        self.nbrs[t as usize][i] = new;
    }

    /// Walk to the triangle containing `p`. Returns `(tri, edge)` where edge
    /// is `Some(i)` when `p` lies on edge `i` (opposite vertex `i`), and the
    /// vertex index when `p` coincides with an existing vertex.
    fn locate(&self, p: Point) -> Locate {
        let mut t = self.walk_hint;
        if !self.alive[t as usize] {
            t = (0..self.tris.len() as u32)
                .rev()
                .find(|&t| self.alive[t as usize])
                .expect("at least one alive triangle");
        }
        let mut steps = 0usize;
        let max_steps = 4 * self.tris.len() + 64;
        loop {
            let [a, b, c] = self.tris[t as usize];
            let (pa, pb, pc) = (self.pts[a as usize], self.pts[b as usize], self.pts[c as usize]);
            for (v, q) in [(a, pa), (b, pb), (c, pc)] {
                if p == q {
                    return Locate::Vertex(v);
                }
            }
            // Edge i is opposite vertex i.
            let o0 = orient(pb, pc, p);
            let o1 = orient(pc, pa, p);
            let o2 = orient(pa, pb, p);
            let mut moved = false;
            for (i, o) in [(0usize, o0), (1, o1), (2, o2)] {
                if o < 0.0 {
                    let n = self.nbrs[t as usize][i];
                    if n != NONE {
                        t = n;
                        moved = true;
                        break;
                    }
                }
            }
            if moved {
                steps += 1;
                if steps > max_steps {
                    // Extremely rare: fall back to exhaustive scan.
                    return self.locate_exhaustive(p);
                }
                continue;
            }
            if o0 == 0.0 {
                return Locate::Edge(t, 0);
            }
            if o1 == 0.0 {
                return Locate::Edge(t, 1);
            }
            if o2 == 0.0 {
                return Locate::Edge(t, 2);
            }
            return Locate::Inside(t);
        }
    }

    fn locate_exhaustive(&self, p: Point) -> Locate {
        for t in 0..self.tris.len() as u32 {
            if !self.alive[t as usize] {
                continue;
            }
            let (pa, pb, pc) = self.tri_pts(t);
            let o0 = orient(pb, pc, p);
            let o1 = orient(pc, pa, p);
            let o2 = orient(pa, pb, p);
            if o0 >= 0.0 && o1 >= 0.0 && o2 >= 0.0 {
                let [a, b, c] = self.tris[t as usize];
                for (v, q) in [(a, pa), (b, pb), (c, pc)] {
                    if p == q {
                        return Locate::Vertex(v);
                    }
                }
                if o0 == 0.0 {
                    return Locate::Edge(t, 0);
                }
                if o1 == 0.0 {
                    return Locate::Edge(t, 1);
                }
                if o2 == 0.0 {
                    return Locate::Edge(t, 2);
                }
                return Locate::Inside(t);
            }
        }
        panic!("point ({}, {}) outside the bounding triangle", p.x, p.y);
    }

    /// Insert a point, returning its vertex index. `on_constraint` collects
    /// the sub-edges when the point lands on a constrained edge.
    fn insert_point(&mut self, p: Point) -> u32 {
        match self.locate(p) {
            Locate::Vertex(v) => v,
            Locate::Inside(t) => self.insert_in_triangle(p, t),
            Locate::Edge(t, i) => self.insert_on_edge(p, t, i),
        }
    }

    fn insert_in_triangle(&mut self, p: Point, t: u32) -> u32 {
        let v = self.pts.len() as u32;
        self.pts.push(p);
        self.vert_tri.push(t);
        let [a, b, c] = self.tris[t as usize];
        let [na, nb, nc] = self.nbrs[t as usize];
        // Replace t by (a, b, v); add (b, c, v) and (c, a, v).
        let t1 = self.tris.len() as u32;
        let t2 = t1 + 1;
        self.tris[t as usize] = [a, b, v];
        self.nbrs[t as usize] = [t1, t2, nc];
        self.tris.push([b, c, v]);
        self.nbrs.push([t2, t, na]);
        self.alive.push(true);
        self.tris.push([c, a, v]);
        self.nbrs.push([t, t1, nb]);
        self.alive.push(true);
        self.replace_neighbor(na, t, t1);
        self.replace_neighbor(nb, t, t2);
        // nc keeps pointing at t.
        self.note_tri(t);
        self.note_tri(t1);
        self.note_tri(t2);
        self.walk_hint = t;
        self.legalize(t, 2);
        self.legalize(t1, 2);
        self.legalize(t2, 2);
        v
    }

    fn insert_on_edge(&mut self, p: Point, t: u32, i: usize) -> u32 {
        let tv = self.tris[t as usize];
        let apex_t = tv[i];
        let x = tv[(i + 1) % 3];
        let y = tv[(i + 2) % 3];
        let u = self.nbrs[t as usize][i];
        let key = EdgeKey::new(x, y);
        let marker = self.constrained.remove(&key);

        let v = self.pts.len() as u32;
        self.pts.push(p);
        self.vert_tri.push(t);

        // Split t into (apex_t, x, v) kept in slot t and (apex_t, v, y) in a
        // new slot t2; same for the neighbor u when present.
        let n_tx = self.nbrs[t as usize][(i + 2) % 3]; // across (apex_t, x)
        let n_ty = self.nbrs[t as usize][(i + 1) % 3]; // across (y, apex_t)
        let t2 = self.tris.len() as u32;

        if u != NONE {
            let j = self.index_of_neighbor(u, t);
            let uv = self.tris[u as usize];
            let apex_u = uv[j]; // u = (apex_u, y, x) seen across the edge
            let n_ux = self.nbrs[u as usize][(j + 1) % 3]; // across (x, apex_u)
            let n_uy = self.nbrs[u as usize][(j + 2) % 3]; // across (apex_u, y)
            let u2 = t2 + 1;

            self.tris[t as usize] = [apex_t, x, v];
            self.nbrs[t as usize] = [u, t2, n_tx];
            self.tris.push([apex_t, v, y]);
            self.nbrs.push([u2, n_ty, t]);
            self.alive.push(true);

            self.tris[u as usize] = [apex_u, v, x];
            self.nbrs[u as usize] = [t, n_ux, u2];
            self.tris.push([apex_u, y, v]);
            self.nbrs.push([t2, u, n_uy]);
            self.alive.push(true);

            self.replace_neighbor(n_ty, t, t2);
            self.replace_neighbor(n_uy, u, u2);
            // n_tx keeps pointing at t, n_ux at u.
            if let Some(m) = marker {
                self.constrained.insert(EdgeKey::new(x, v), m);
                self.constrained.insert(EdgeKey::new(v, y), m);
            }
            self.note_tri(t);
            self.note_tri(t2);
            self.note_tri(u);
            self.note_tri(u2);
            self.walk_hint = t;
            self.legalize(t, 2);
            self.legalize(t2, 1);
            self.legalize(u, 1);
            self.legalize(u2, 2);
        } else {
            self.tris[t as usize] = [apex_t, x, v];
            self.nbrs[t as usize] = [NONE, t2, n_tx];
            self.tris.push([apex_t, v, y]);
            self.nbrs.push([NONE, n_ty, t]);
            self.alive.push(true);

            self.replace_neighbor(n_ty, t, t2);
            if let Some(m) = marker {
                self.constrained.insert(EdgeKey::new(x, v), m);
                self.constrained.insert(EdgeKey::new(v, y), m);
            }
            self.note_tri(t);
            self.note_tri(t2);
            self.walk_hint = t;
            self.legalize(t, 2);
            self.legalize(t2, 1);
        }
        v
    }

    /// Restore the Delaunay property across edge `i` of `t` by flipping.
    fn legalize(&mut self, t: u32, i: usize) {
        let tv = self.tris[t as usize];
        let x = tv[(i + 1) % 3];
        let y = tv[(i + 2) % 3];
        if self.constrained.contains_key(&EdgeKey::new(x, y)) {
            return;
        }
        let u = self.nbrs[t as usize][i];
        if u == NONE {
            return;
        }
        let j = self.index_of_neighbor(u, t);
        let apex_u = self.tris[u as usize][j];
        let (pa, pb, pc) = self.tri_pts(t);
        if incircle(pa, pb, pc, self.pts[apex_u as usize]) > 0.0 {
            let (t_new_edge, u_new_edge) = self.flip(t, i);
            self.legalize(t, t_new_edge);
            self.legalize(u, u_new_edge);
        }
    }

    /// Flip the edge opposite vertex `i` of triangle `t` with its neighbor.
    /// Returns the edge indices in `(t, u)` that became the far edges and may
    /// need further legalization.
    fn flip(&mut self, t: u32, i: usize) -> (usize, usize) {
        let u = self.nbrs[t as usize][i];
        debug_assert_ne!(u, NONE);
        let j = self.index_of_neighbor(u, t);
        let tv = self.tris[t as usize];
        let uv = self.tris[u as usize];
        let apex_t = tv[i];
        let x = tv[(i + 1) % 3];
        let y = tv[(i + 2) % 3];
        let apex_u = uv[j];

        let n_tx = self.nbrs[t as usize][(i + 2) % 3]; // t across (apex_t, x)
        let n_ty = self.nbrs[t as usize][(i + 1) % 3]; // t across (y, apex_t)
        let n_ux = self.nbrs[u as usize][(j + 1) % 3]; // u across (x, apex_u)
        let n_uy = self.nbrs[u as usize][(j + 2) % 3]; // u across (apex_u, y)

        // New triangles: t = (apex_t, x, apex_u), u = (apex_t, apex_u, y).
        self.tris[t as usize] = [apex_t, x, apex_u];
        self.tris[u as usize] = [apex_t, apex_u, y];
        self.nbrs[t as usize] = [n_ux, u, n_tx];
        self.nbrs[u as usize] = [n_uy, n_ty, t];
        self.replace_neighbor(n_ux, u, t);
        self.replace_neighbor(n_ty, t, u);
        // n_tx keeps pointing at t, n_uy at u.
        self.note_tri(t);
        self.note_tri(u);

        // The far edges (x, apex_u) and (apex_u, y) sit opposite index 0 of
        // the new t and u respectively; they are the ones to re-legalize.
        (0, 0)
    }

    /// Recover the constraint edge between vertices `s` and `e` by flipping
    /// crossing edges (Sloan's method), then record it with the marker.
    fn insert_constraint(&mut self, s: u32, e: u32, marker: BoundaryMarker) -> Result<(), MeshError> {
        let key = EdgeKey::new(s, e);
        if self.find_edge_local(s, e).is_some() {
            self.constrained.insert(key, marker);
            return Ok(());
        }
        let ps = self.pts[s as usize];
        let pe = self.pts[e as usize];
        let mut crossing: VecDeque<EdgeKey> = self.edges_crossing(s, e).into();
        let mut guard = 0usize;
        let cap = 64 * (crossing.len() + 8) * (crossing.len() + 8);
        while let Some(ek) = crossing.pop_front() {
            guard += 1;
            if guard > cap {
                return Err(MeshError::ConstraintRecovery(s as usize, e as usize));
            }
            let Some((t, i)) = self.find_edge_local(ek.0, ek.1) else {
                continue; // flipped away already
            };
            let (px, py) = (self.pts[ek.0 as usize], self.pts[ek.1 as usize]);
            if !segments_cross(ps, pe, px, py) {
                continue;
            }
            let u = self.nbrs[t as usize][i];
            if u == NONE {
                return Err(MeshError::ConstraintRecovery(s as usize, e as usize));
            }
            let j = self.index_of_neighbor(u, t);
            let apex_t = self.tris[t as usize][i];
            let apex_u = self.tris[u as usize][j];
            let (pt, pu) = (self.pts[apex_t as usize], self.pts[apex_u as usize]);
            // Flip only when the surrounding quad is strictly convex.
            let convex = orient(pt, px, pu) > 0.0 && orient(pu, py, pt) > 0.0;
            if !convex {
                crossing.push_back(ek);
                continue;
            }
            self.flip(t, i);
            let nk = EdgeKey::new(apex_t, apex_u);
            let (pa, pb) = (self.pts[nk.0 as usize], self.pts[nk.1 as usize]);
            if segments_cross(ps, pe, pa, pb) {
                crossing.push_back(nk);
            }
        }
        if self.find_edge_local(s, e).is_some() {
            self.constrained.insert(key, marker);
            Ok(())
        } else {
            Err(MeshError::ConstraintRecovery(s as usize, e as usize))
        }
    }

    /// Edges currently crossing the open segment (s, e), found by walking
    /// the triangulation from s toward e.
    fn edges_crossing(&self, s: u32, e: u32) -> Vec<EdgeKey> {
        let ps = self.pts[s as usize];
        let pe = self.pts[e as usize];
        let mut out = Vec::new();
        // Starting triangle: the one in the star of s whose opposite edge
        // crosses (s, e).
        let star = self.star(s, self.vert_tri[s as usize]);
        let mut cur = NONE;
        let mut entry = EdgeKey(NONE, NONE);
        for t in star {
            let i = self.index_of_vertex(t, s);
            let tv = self.tris[t as usize];
            let (x, y) = (tv[(i + 1) % 3], tv[(i + 2) % 3]);
            if segments_cross(ps, pe, self.pts[x as usize], self.pts[y as usize]) {
                out.push(EdgeKey::new(x, y));
                entry = EdgeKey::new(x, y);
                cur = self.nbrs[t as usize][i];
                break;
            }
        }
        let mut steps = 0usize;
        while cur != NONE {
            steps += 1;
            if steps > self.tris.len() + 16 {
                break;
            }
            let tv = self.tris[cur as usize];
            if tv.contains(&e) {
                break;
            }
            let mut advanced = false;
            for i in 0..3 {
                let (x, y) = (tv[(i + 1) % 3], tv[(i + 2) % 3]);
                let k = EdgeKey::new(x, y);
                if k == entry {
                    continue;
                }
                if segments_cross(ps, pe, self.pts[x as usize], self.pts[y as usize]) {
                    out.push(k);
                    entry = k;
                    cur = self.nbrs[cur as usize][i];
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        out
    }

    /// Find the triangle/edge pair carrying the undirected edge (s, e),
    /// scanning only the star of s.
    fn find_edge_local(&self, s: u32, e: u32) -> Option<(u32, usize)> {
        for t in self.star(s, self.vert_tri[s as usize]) {
            let tv = self.tris[t as usize];
            for i in 0..3 {
                let x = tv[(i + 1) % 3];
                let y = tv[(i + 2) % 3];
                if (x == s && y == e) || (x == e && y == s) {
                    return Some((t, i));
                }
            }
        }
        None
    }

    /// Constrained segments whose diametral circle contains `p`, searched
    /// over the Bowyer-Watson cavity of `p` seeded at `target` (triangles
    /// whose circumcircle contains `p`), plus their immediate neighbors.
    fn encroached_by(&self, target: u32, p: Point) -> Vec<EdgeKey> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(target);
        seen.insert(target);
        let mut hops = 0usize;
        while let Some(t) = queue.pop_front() {
            hops += 1;
            if hops > 256 {
                break;
            }
            let tv = self.tris[t as usize];
            for i in 0..3 {
                let (x, y) = (tv[(i + 1) % 3], tv[(i + 2) % 3]);
                let key = EdgeKey::new(x, y);
                if self.constrained.contains_key(&key) {
                    let (px, py) = (self.pts[x as usize], self.pts[y as usize]);
                    let mid = px.lerp(py, 0.5);
                    let r2 = 0.25 * px.sub(py).dot(px.sub(py));
                    if mid.sub(p).dot(mid.sub(p)) < r2 * (1.0 - 1e-12) {
                        out.push(key);
                    }
                    continue; // cavity does not extend through constraints
                }
                let n = self.nbrs[t as usize][i];
                if n == NONE || !self.alive[n as usize] || seen.contains(&n) {
                    continue;
                }
                let (a, b, c) = self.tri_pts(n);
                if incircle(a, b, c, p) > 0.0 {
                    seen.insert(n);
                    queue.push_back(n);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// All alive triangles containing vertex `v`, found by BFS from `seed`.
    fn star(&self, v: u32, seed: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(seed);
        seen.insert(seed);
        while let Some(t) = queue.pop_front() {
            if t == NONE || !self.alive[t as usize] {
                continue;
            }
            if !self.tris[t as usize].contains(&v) {
                continue;
            }
            out.push(t);
            for n in self.nbrs[t as usize] {
                if n != NONE && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        out
    }
}

enum Locate {
    Inside(u32),
    Edge(u32, usize),
    Vertex(u32),
}

fn validate_polygon(polygon: &MarkedPolygon) -> Result<(), MeshError> {
    if polygon.rings.is_empty() {
        return Err(MeshError::DegenerateInput("no rings".into()));
    }
    for (ri, ring) in polygon.rings.iter().enumerate() {
        if ring.len() < 3 {
            return Err(MeshError::DegenerateInput(format!(
                "ring {ri} has fewer than 3 vertices"
            )));
        }
        if polygon.markers[ri].len() != ring.len() {
            return Err(MeshError::DegenerateInput(format!(
                "ring {ri}: marker count {} does not match edge count {}",
                polygon.markers[ri].len(),
                ring.len()
            )));
        }
        for i in 0..ring.len() {
            if ring[i] == ring[(i + 1) % ring.len()] {
                return Err(MeshError::DegenerateInput(format!(
                    "ring {ri} has a repeated vertex at position {i}"
                )));
            }
        }
    }
    if polygon.area().abs() < 1e-30 {
        return Err(MeshError::DegenerateInput("zero enclosed area".into()));
    }
    // Ring edges must not cross each other.
    let mut segs = Vec::new();
    for ring in &polygon.rings {
        for i in 0..ring.len() {
            segs.push((ring[i], ring[(i + 1) % ring.len()]));
        }
    }
    let grid = SegmentGrid::build(segs.clone());
    for (i, (a, b)) in segs.iter().enumerate() {
        let mid = a.lerp(*b, 0.5);
        for j in grid.candidates_near(mid, a.dist(*b)) {
            let j = j as usize;
            if j <= i {
                continue;
            }
            let (c, d) = segs[j];
            if segments_cross(*a, *b, c, d) {
                return Err(MeshError::DegenerateInput(format!(
                    "ring edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

/// Triangulate a marked polygon with target edge length `h_max`, grading the
/// mesh so edges on the graph portion of the boundary are at most
/// `h_max / grading`.
pub fn triangulate(polygon: &MarkedPolygon, h_max: f64, grading: f64) -> Result<TriMesh, MeshError> {
    if !(h_max > 0.0) {
        return Err(MeshError::DegenerateInput(format!("h_max must be positive, got {h_max}")));
    }
    let grading = grading.max(1.0);
    validate_polygon(polygon)?;

    // Size field: fine near graph-marked boundary, growing linearly away.
    let h_graph = h_max / grading;
    let graph_segs: Vec<(Point, Point)> = polygon
        .rings
        .iter()
        .zip(polygon.markers.iter())
        .flat_map(|(ring, marks)| {
            (0..ring.len()).filter_map(move |i| {
                if marks[i] == BoundaryMarker::Graph {
                    Some((ring[i], ring[(i + 1) % ring.len()]))
                } else {
                    None
                }
            })
        })
        .collect();
    let graph_grid = if graph_segs.is_empty() {
        None
    } else {
        Some(SegmentGrid::build(graph_segs))
    };
    let size_at = |p: Point| -> f64 {
        match &graph_grid {
            Some(g) => (h_graph + 0.7 * g.dist_to_nearest(p)).min(h_max),
            None => h_max,
        }
    };

    // Pre-split ring edges to the local target length.
    let mut rings2: Vec<Vec<Point>> = Vec::new();
    let mut marks2: Vec<Vec<BoundaryMarker>> = Vec::new();
    for (ring, marks) in polygon.rings.iter().zip(polygon.markers.iter()) {
        let mut r2 = Vec::new();
        let mut m2 = Vec::new();
        for i in 0..ring.len() {
            let a = ring[i];
            let b = ring[(i + 1) % ring.len()];
            let target = size_at(a.lerp(b, 0.5));
            let n = (a.dist(b) / target).ceil().max(1.0) as usize;
            for k in 0..n {
                r2.push(a.lerp(b, k as f64 / n as f64));
                m2.push(marks[i]);
            }
        }
        rings2.push(r2);
        marks2.push(m2);
    }

    // Bounding box over all ring points.
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for ring in &rings2 {
        for p in ring {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }

    let mut cdt = Cdt::new(lo, hi);
    // Insert ring vertices (deduplicated by exact coordinates).
    let mut ring_vids: Vec<Vec<u32>> = Vec::new();
    for ring in &rings2 {
        let mut vids = Vec::with_capacity(ring.len());
        for &p in ring {
            vids.push(cdt.insert_point(p));
        }
        ring_vids.push(vids);
    }
    // Recover constraints.
    for (vids, marks) in ring_vids.iter().zip(marks2.iter()) {
        for i in 0..vids.len() {
            let s = vids[i];
            let e = vids[(i + 1) % vids.len()];
            if s == e {
                return Err(MeshError::DegenerateInput("ring collapsed during insertion".into()));
            }
            cdt.insert_constraint(s, e, marks[i])?;
        }
    }

    remove_exterior(&mut cdt);
    ruppert_refine(&mut cdt, &size_at)?;
    extract_mesh(cdt, h_max)
}

/// Delete every triangle outside the constrained region and cut the
/// neighbor links, so refinement only ever sees the interior.
fn remove_exterior(cdt: &mut Cdt) {
    let inside = classify_parity(cdt);
    for t in 0..cdt.tris.len() {
        if cdt.alive[t] && !inside[t] {
            cdt.alive[t] = false;
        }
    }
    for t in 0..cdt.tris.len() {
        if !cdt.alive[t] {
            continue;
        }
        for i in 0..3 {
            let n = cdt.nbrs[t][i];
            if n != NONE && !cdt.alive[n as usize] {
                cdt.nbrs[t][i] = NONE;
            }
        }
    }
    // Repair vertex hints and the walk hint.
    for t in 0..cdt.tris.len() as u32 {
        if cdt.alive[t as usize] {
            cdt.note_tri(t);
            cdt.walk_hint = t;
        }
    }
}

/// Quality and size refinement. Splits encroached constrained segments at
/// their midpoints and inserts circumcenters of triangles that are skinny
/// (below the 20 degree floor) or larger than the local size target.
///
/// Runs after exterior removal, so every alive triangle is interior and
/// every insertion stays interior: circumcenters are only inserted when
/// reachable without crossing a constrained edge, and segment midpoints lie
/// on the boundary itself.
fn ruppert_refine(cdt: &mut Cdt, size_at: &dyn Fn(Point) -> f64) -> Result<(), MeshError> {
    let seg_encroached = |cdt: &Cdt, x: u32, y: u32| -> bool {
        let (px, py) = (cdt.pts[x as usize], cdt.pts[y as usize]);
        let mid = px.lerp(py, 0.5);
        let r2 = 0.25 * px.sub(py).dot(px.sub(py));
        // Apex check over the (at most two) adjacent triangles.
        if let Some((t, i)) = cdt.find_edge_local(x, y) {
            let apex = cdt.tris[t as usize][i];
            let pa = cdt.pts[apex as usize];
            if mid.sub(pa).dot(mid.sub(pa)) < r2 * (1.0 - 1e-12) {
                return true;
            }
            let u = cdt.nbrs[t as usize][i];
            if u != NONE {
                let j = cdt.index_of_neighbor(u, t);
                let pb = cdt.pts[cdt.tris[u as usize][j] as usize];
                if mid.sub(pb).dot(mid.sub(pb)) < r2 * (1.0 - 1e-12) {
                    return true;
                }
            }
        }
        false
    };

    let tri_bad = |cdt: &Cdt, t: u32| -> bool {
        let (a, b, c) = cdt.tri_pts(t);
        let centroid = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        let target = size_at(centroid);
        let longest = a.dist(b).max(b.dist(c)).max(c.dist(a));
        if longest > target {
            return true;
        }
        let shortest = a.dist(b).min(b.dist(c)).min(c.dist(a));
        // Safety cutoff far below any input feature size, against cascades
        // from pathological inputs.
        if shortest < 1e-3 * target {
            return false;
        }
        min_angle(a, b, c) < MIN_ANGLE_RAD
    };

    // Seed the queues in deterministic order.
    let mut seg_queue: VecDeque<EdgeKey> = {
        let mut keys: Vec<EdgeKey> = cdt.constrained.keys().copied().collect();
        keys.sort();
        keys.into()
    };
    let mut tri_queue: VecDeque<u32> =
        (0..cdt.tris.len() as u32).filter(|&t| cdt.alive[t as usize]).collect();

    fn requeue_star(
        cdt: &Cdt,
        v: u32,
        tri_queue: &mut VecDeque<u32>,
        seg_queue: &mut VecDeque<EdgeKey>,
    ) {
        for t in cdt.star(v, cdt.vert_tri[v as usize]) {
            tri_queue.push_back(t);
            let tv = cdt.tris[t as usize];
            for i in 0..3 {
                let k = EdgeKey::new(tv[(i + 1) % 3], tv[(i + 2) % 3]);
                if cdt.constrained.contains_key(&k) {
                    seg_queue.push_back(k);
                }
            }
        }
    }

    let mut split_seg = |cdt: &mut Cdt,
                         x: u32,
                         y: u32,
                         tri_queue: &mut VecDeque<u32>,
                         seg_queue: &mut VecDeque<EdgeKey>| {
        let Some((t, i)) = cdt.find_edge_local(x, y) else {
            return;
        };
        let mid = cdt.pts[x as usize].lerp(cdt.pts[y as usize], 0.5);
        let v = cdt.insert_on_edge(mid, t, i);
        seg_queue.push_back(EdgeKey::new(x, v));
        seg_queue.push_back(EdgeKey::new(v, y));
        requeue_star(cdt, v, tri_queue, seg_queue);
    };

    let mut spins = 0usize;
    loop {
        spins += 1;
        if cdt.pts.len() > MAX_VERTICES || spins > 64 * MAX_VERTICES {
            return Err(MeshError::RefinementOverflow(MAX_VERTICES));
        }
        if let Some(key) = seg_queue.pop_front() {
            if !cdt.constrained.contains_key(&key) {
                continue; // already split
            }
            if seg_encroached(cdt, key.0, key.1) {
                split_seg(cdt, key.0, key.1, &mut tri_queue, &mut seg_queue);
            }
            continue;
        }
        let Some(t) = tri_queue.pop_front() else {
            break;
        };
        if !cdt.alive[t as usize] || !tri_bad(cdt, t) {
            continue;
        }
        let (a, b, c) = cdt.tri_pts(t);
        let Some(cc) = circumcenter(a, b, c) else {
            continue;
        };
        // Walk from the triangle toward the circumcenter; if a constrained
        // edge blocks the way, split that edge instead.
        match walk_constrained(cdt, t, cc) {
            WalkResult::Reached(target) => {
                let tv = cdt.tris[target as usize];
                if tv.iter().any(|&v| cdt.pts[v as usize] == cc) {
                    continue; // duplicate of an existing vertex
                }
                // A circumcenter that encroaches a constrained segment is
                // never inserted; the segment is split instead.
                let encroached = cdt.encroached_by(target, cc);
                if !encroached.is_empty() {
                    for key in encroached {
                        split_seg(cdt, key.0, key.1, &mut tri_queue, &mut seg_queue);
                    }
                    tri_queue.push_back(t);
                    continue;
                }
                let (pa, pb, pc) = cdt.tri_pts(target);
                let on_edge = [
                    orient(pb, pc, cc) == 0.0,
                    orient(pc, pa, cc) == 0.0,
                    orient(pa, pb, cc) == 0.0,
                ];
                let v = match on_edge.iter().position(|&e| e) {
                    Some(i) => cdt.insert_on_edge(cc, target, i),
                    None => cdt.insert_in_triangle(cc, target),
                };
                requeue_star(cdt, v, &mut tri_queue, &mut seg_queue);
            }
            WalkResult::Blocked(x, y) => {
                let key = EdgeKey::new(x, y);
                if cdt.constrained.contains_key(&key) {
                    split_seg(cdt, x, y, &mut tri_queue, &mut seg_queue);
                    tri_queue.push_back(t);
                }
            }
        }
    }
    Ok(())
}

enum WalkResult {
    Reached(u32),
    Blocked(u32, u32),
}

/// Walk from triangle `t` toward point `p`; stop at the first constrained
/// edge crossed.
fn walk_constrained(cdt: &Cdt, t: u32, p: Point) -> WalkResult {
    let mut cur = t;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > cdt.tris.len() + 16 {
            // Numerical cycling: treat as blocked by nothing; just insert.
            return WalkResult::Reached(cur);
        }
        let [a, b, c] = cdt.tris[cur as usize];
        let (pa, pb, pc) = cdt.tri_pts(cur);
        let o0 = orient(pb, pc, p);
        let o1 = orient(pc, pa, p);
        let o2 = orient(pa, pb, p);
        let mut next = None;
        for (i, o) in [(0usize, o0), (1, o1), (2, o2)] {
            if o < 0.0 {
                let x = [a, b, c][(i + 1) % 3];
                let y = [a, b, c][(i + 2) % 3];
                if cdt.constrained.contains_key(&EdgeKey::new(x, y)) {
                    return WalkResult::Blocked(x, y);
                }
                let n = cdt.nbrs[cur as usize][i];
                if n == NONE {
                    return WalkResult::Blocked(x, y);
                }
                next = Some(n);
                break;
            }
        }
        match next {
            Some(n) => cur = n,
            None => return WalkResult::Reached(cur),
        }
    }
}

/// Parity classification: triangles inside the domain have odd crossing
/// parity with respect to the constrained edges, starting from the outermost
/// triangle (which is outside).
fn classify_parity(cdt: &Cdt) -> Vec<bool> {
    let n = cdt.tris.len();
    let mut parity: Vec<Option<bool>> = vec![None; n];
    // Any triangle using a bounding-box vertex (0, 1, 2) is outside.
    let mut queue = VecDeque::new();
    for t in 0..n {
        if !cdt.alive[t] {
            continue;
        }
        if cdt.tris[t].iter().any(|&v| v < 3) {
            parity[t] = Some(false);
            queue.push_back(t as u32);
        }
    }
    while let Some(t) = queue.pop_front() {
        let cur = parity[t as usize].unwrap();
        let tv = cdt.tris[t as usize];
        for i in 0..3 {
            let nbr = cdt.nbrs[t as usize][i];
            if nbr == NONE || !cdt.alive[nbr as usize] {
                continue;
            }
            let key = EdgeKey::new(tv[(i + 1) % 3], tv[(i + 2) % 3]);
            let flip = cdt.constrained.contains_key(&key);
            let next = if flip { !cur } else { cur };
            if parity[nbr as usize].is_none() {
                parity[nbr as usize] = Some(next);
                queue.push_back(nbr);
            }
        }
    }
    parity.into_iter().map(|p| p.unwrap_or(false)).collect()
}

/// Extract the alive triangles into a standalone mesh.
fn extract_mesh(cdt: Cdt, h_max: f64) -> Result<TriMesh, MeshError> {
    let mut vmap: Vec<usize> = vec![usize::MAX; cdt.pts.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for t in 0..cdt.tris.len() {
        if !cdt.alive[t] {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, &v) in cdt.tris[t].iter().enumerate() {
            let vi = v as usize;
            if vmap[vi] == usize::MAX {
                vmap[vi] = vertices.len();
                vertices.push(cdt.pts[vi]);
            }
            tri[k] = vmap[vi];
        }
        triangles.push(tri);
    }
    let mut boundary_edges = Vec::new();
    for (key, marker) in &cdt.constrained {
        let (a, b) = (vmap[key.0 as usize], vmap[key.1 as usize]);
        if a != usize::MAX && b != usize::MAX {
            boundary_edges.push(BoundaryEdge {
                v0: a.min(b),
                v1: a.max(b),
                marker: *marker,
            });
        }
    }
    boundary_edges.sort_by_key(|e| (e.v0, e.v1));
    if triangles.is_empty() {
        return Err(MeshError::DegenerateInput("no interior triangles".into()));
    }
    Ok(TriMesh {
        vertices,
        triangles,
        boundary_edges,
        h_max,
    })
}

/// Red-green refinement: marked triangles are split into four, and
/// conformity is restored by splitting neighbors with hanging midpoints.
pub fn refine(mesh: &TriMesh, marked: &[usize]) -> TriMesh {
    let n = mesh.triangles.len();
    let mut red = vec![false; n];
    for &t in marked {
        if t < n {
            red[t] = true;
        }
    }
    // Midpoints of edges of red triangles; closure: a triangle with two or
    // more hanging midpoints goes red, with exactly one goes green.
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = mesh.vertices.clone();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));

    loop {
        // Register midpoints of all red triangle edges.
        for t in 0..n {
            if !red[t] {
                continue;
            }
            let [a, b, c] = mesh.triangles[t];
            for (u, v) in [(a, b), (b, c), (c, a)] {
                midpoint.entry(key(u, v)).or_insert_with(|| {
                    vertices.push(mesh.vertices[u].lerp(mesh.vertices[v], 0.5));
                    vertices.len() - 1
                });
            }
        }
        // Promote triangles with 2+ hanging midpoints to red.
        let mut changed = false;
        for t in 0..n {
            if red[t] {
                continue;
            }
            let [a, b, c] = mesh.triangles[t];
            let hanging = [key(a, b), key(b, c), key(c, a)]
                .iter()
                .filter(|k| midpoint.contains_key(*k))
                .count();
            if hanging >= 2 {
                red[t] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 2);
    for t in 0..n {
        let [a, b, c] = mesh.triangles[t];
        let mab = midpoint.get(&key(a, b)).copied();
        let mbc = midpoint.get(&key(b, c)).copied();
        let mca = midpoint.get(&key(c, a)).copied();
        if red[t] {
            let (mab, mbc, mca) = (mab.unwrap(), mbc.unwrap(), mca.unwrap());
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        } else {
            match (mab, mbc, mca) {
                (Some(m), None, None) => {
                    triangles.push([a, m, c]);
                    triangles.push([m, b, c]);
                }
                (None, Some(m), None) => {
                    triangles.push([b, m, a]);
                    triangles.push([m, c, a]);
                }
                (None, None, Some(m)) => {
                    triangles.push([c, m, b]);
                    triangles.push([m, a, b]);
                }
                (None, None, None) => triangles.push([a, b, c]),
                _ => unreachable!("triangles with 2+ midpoints were promoted to red"),
            }
        }
    }

    // Boundary edges: split when a midpoint exists.
    let mut boundary_edges = Vec::new();
    for e in &mesh.boundary_edges {
        match midpoint.get(&key(e.v0, e.v1)) {
            Some(&m) => {
                boundary_edges.push(BoundaryEdge {
                    v0: e.v0,
                    v1: m,
                    marker: e.marker,
                });
                boundary_edges.push(BoundaryEdge {
                    v0: m,
                    v1: e.v1,
                    marker: e.marker,
                });
            }
            None => boundary_edges.push(*e),
        }
    }
    boundary_edges.sort_by_key(|e| (e.v0.min(e.v1), e.v0.max(e.v1)));

    TriMesh {
        vertices,
        triangles,
        boundary_edges,
        h_max: mesh.h_max / 2.0,
    }
}

/// Structural checks used across the test suites: positive orientation,
/// edge-manifoldness, and boundary edges matching triangle boundary.
pub fn check_mesh(mesh: &TriMesh) -> Result<(), String> {
    for t in 0..mesh.triangles.len() {
        if mesh.tri_area(t) <= 0.0 {
            return Err(format!("triangle {t} has non-positive area {}", mesh.tri_area(t)));
        }
    }
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            *edge_count.entry((u.min(v), u.max(v))).or_insert(0) += 1;
        }
    }
    for (&(u, v), &cnt) in &edge_count {
        if cnt > 2 {
            return Err(format!("edge ({u}, {v}) shared by {cnt} triangles"));
        }
    }
    let boundary_set: HashSet<(usize, usize)> = mesh
        .boundary_edges
        .iter()
        .map(|e| (e.v0.min(e.v1), e.v0.max(e.v1)))
        .collect();
    for (&e, &cnt) in &edge_count {
        let on_boundary = boundary_set.contains(&e);
        if cnt == 1 && !on_boundary {
            return Err(format!("edge ({}, {}) is exposed but not marked boundary", e.0, e.1));
        }
        if cnt == 2 && on_boundary {
            return Err(format!("edge ({}, {}) is interior but marked boundary", e.0, e.1));
        }
    }
    for e in &boundary_set {
        if edge_count.get(e).copied().unwrap_or(0) != 1 {
            return Err(format!("boundary edge ({}, {}) not on exactly one triangle", e.0, e.1));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(markers: BoundaryMarker) -> MarkedPolygon {
        MarkedPolygon::single(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![markers; 4],
        )
    }

    #[test]
    fn coarse_square_is_two_triangles() {
        let mesh = triangulate(&square(BoundaryMarker::ArtificialTop), 2.0, 1.0).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.triangles.len(), 2);
        check_mesh(&mesh).unwrap();
        assert_relative_eq!(mesh.total_area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn square_area_partition() {
        let mesh = triangulate(&square(BoundaryMarker::Graph), 0.2, 2.0).unwrap();
        check_mesh(&mesh).unwrap();
        assert_relative_eq!(mesh.total_area(), 1.0, max_relative = 1e-10);
        // Graph grading: boundary edges at most h/grading.
        for e in &mesh.boundary_edges {
            let len = mesh.vertices[e.v0].dist(mesh.vertices[e.v1]);
            assert!(len <= 0.1 + 1e-9, "boundary edge length {len}");
        }
    }

    #[test]
    fn l_shape_quality() {
        let ring = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        let poly = MarkedPolygon::single(ring, vec![BoundaryMarker::Graph; 6]);
        let mesh = triangulate(&poly, 0.1, 1.0).unwrap();
        check_mesh(&mesh).unwrap();
        assert_relative_eq!(mesh.total_area(), 3.0, max_relative = 1e-10);
        // Exhaustive angle oracle.
        let floor = MIN_ANGLE_RAD - 1e-9;
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t];
            assert!(
                mesh.tri_min_angle(t) >= floor,
                "triangle {t} angle {} below floor: {:?} {:?} {:?}",
                mesh.tri_min_angle(t).to_degrees(),
                mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]
            );
        }
    }

    #[test]
    fn annulus_with_hole() {
        let n = 48;
        let circle = |r: f64, ccw: bool| -> Vec<Point> {
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
        let poly = MarkedPolygon {
            rings: vec![circle(1.0, true), circle(0.5, false)],
            markers: vec![vec![BoundaryMarker::Graph; n], vec![BoundaryMarker::Graph; n]],
        };
        let mesh = triangulate(&poly, 0.15, 1.0).unwrap();
        check_mesh(&mesh).unwrap();
        let poly_area = poly.area();
        assert_relative_eq!(mesh.total_area(), poly_area, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let flat = MarkedPolygon::single(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
            vec![BoundaryMarker::Graph; 3],
        );
        assert!(matches!(
            triangulate(&flat, 1.0, 1.0),
            Err(MeshError::DegenerateInput(_))
        ));
        let dup = MarkedPolygon::single(
            vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
            ],
            vec![BoundaryMarker::Graph; 3],
        );
        assert!(matches!(
            triangulate(&dup, 1.0, 1.0),
            Err(MeshError::DegenerateInput(_))
        ));
    }

    #[test]
    fn refine_all_quadruples() {
        let mesh = triangulate(&square(BoundaryMarker::Graph), 0.5, 1.0).unwrap();
        let all: Vec<usize> = (0..mesh.triangles.len()).collect();
        let fine = refine(&mesh, &all);
        assert_eq!(fine.triangles.len(), 4 * mesh.triangles.len());
        check_mesh(&fine).unwrap();
        assert_relative_eq!(fine.total_area(), 1.0, max_relative = 1e-10);
        // Nestedness: original vertices are a prefix of the refined ones.
        for (i, p) in mesh.vertices.iter().enumerate() {
            assert_eq!(fine.vertices[i], *p);
        }
    }

    #[test]
    fn refine_none_is_identity() {
        let mesh = triangulate(&square(BoundaryMarker::Graph), 0.5, 1.0).unwrap();
        let same = refine(&mesh, &[]);
        assert_eq!(same.triangles, mesh.triangles);
        assert_eq!(same.vertices.len(), mesh.vertices.len());
    }

    #[test]
    fn refine_one_keeps_conformity() {
        let mesh = triangulate(&square(BoundaryMarker::Graph), 0.3, 1.0).unwrap();
        let fine = refine(&mesh, &[0]);
        check_mesh(&fine).unwrap();
        assert_relative_eq!(fine.total_area(), 1.0, max_relative = 1e-10);
    }
}
