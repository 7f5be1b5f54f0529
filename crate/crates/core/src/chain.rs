//! Oriented polyline boundaries with face metadata, Whitney subdivision of
//! faces, and the blip iteration that produces snowflake approximants.
//!
//! Chains are oriented so the domain lies on the LEFT of the direction of
//! travel. The outward normal of a face is the travel direction rotated
//! clockwise. Faces are always single polyline segments between consecutive
//! vertices; vertices not covered by faces belong to frozen edge segments
//! that no longer participate in the iteration.

use crate::geom::{segments_cross, point_in_polygon, Point, SegmentGrid};
use crate::template::BlipTemplate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("face index {0} out of range ({1} faces)")]
    FaceIndex(usize, usize),
    #[error("blip would make the chain self-intersect near face {0}")]
    Collision(usize),
    #[error("chain is not simple: segments {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("chain must have at least 2 vertices")]
    TooShort,
}

/// A face of the chain: the segment from vertex `i0` to `i1 = i0 + 1`, with a
/// flag for which end carries the distinguished side (0 for `i0`, 1 for `i1`).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub i0: usize,
    pub i1: usize,
    pub dist_end: u8,
}

/// Controls how far the Whitney subdivision of each face is enumerated.
///
/// Subdivision stops after `max_levels` rounds, or earlier once subsegments
/// would drop below `min_len`. Leftover pieces near face endpoints are frozen
/// as edge segments.
#[derive(Copy, Clone, Debug)]
pub struct SubdivisionLimits {
    pub max_levels: u32,
    pub min_len: f64,
}

impl Default for SubdivisionLimits {
    fn default() -> Self {
        Self {
            max_levels: 3,
            min_len: 0.0,
        }
    }
}

impl SubdivisionLimits {
    pub fn levels_for(&self, face_len: f64) -> u32 {
        let mut k = 0u32;
        let mut len = face_len / 8.0;
        while k < self.max_levels && len >= self.min_len && len > 0.0 {
            k += 1;
            len /= 8.0;
        }
        k
    }
}

/// Whitney subdivision of the unit interval on the 8-adic grid, enumerated
/// down to `levels` rounds.
///
/// Returns `(cubes, stubs)`: the cubes are the maximal 8-adic intervals whose
/// distance to `{0, 1}` is at least their length; the stubs are the two
/// not-yet-subdivided end intervals of length `8^-levels`. Together they tile
/// `[0, 1]` exactly.
pub fn whitney_unit_intervals(levels: u32) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    if levels == 0 {
        return (Vec::new(), vec![(0.0, 1.0)]);
    }
    let mut cubes = Vec::new();
    // Level 1: the six middle intervals.
    let s1 = 1.0 / 8.0;
    for j in 1..7 {
        cubes.push((j as f64 * s1, (j + 1) as f64 * s1));
    }
    // Deeper levels live inside [0, 8^-(d-1)] and its mirror image.
    let mut scale = s1;
    for _ in 2..=levels {
        let s = scale / 8.0;
        for j in 1..8 {
            let lo = j as f64 * s;
            let hi = (j + 1) as f64 * s;
            cubes.push((lo, hi));
            cubes.push((1.0 - hi, 1.0 - lo));
        }
        scale = s;
    }
    cubes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let stubs = vec![(0.0, scale), (1.0 - scale, 1.0)];
    (cubes, stubs)
}

/// A face-shaped piece produced by subdivision, in chain-independent form.
#[derive(Copy, Clone, Debug)]
pub struct FaceSpan {
    pub a: Point,
    pub b: Point,
    pub dist_end: u8,
}

impl FaceSpan {
    pub fn len(&self) -> f64 {
        self.a.dist(self.b)
    }
}

/// Whitney subdivision of the segment `[a, b]` into subsegment faces plus
/// frozen stubs. The distinguished end of each subsegment is the end on the
/// same side as the parent's distinguished end.
pub fn whitney_face_subdivision(
    a: Point,
    b: Point,
    dist_end: u8,
    levels: u32,
) -> (Vec<FaceSpan>, Vec<(Point, Point)>) {
    let (cubes, stubs) = whitney_unit_intervals(levels);
    let map = |t: f64| -> Point {
        if t == 0.0 {
            a
        } else if t == 1.0 {
            b
        } else {
            a.lerp(b, t)
        }
    };
    let faces = cubes
        .iter()
        .map(|&(lo, hi)| FaceSpan {
            a: map(lo),
            b: map(hi),
            dist_end,
        })
        .collect();
    let frozen = stubs.iter().map(|&(lo, hi)| (map(lo), map(hi))).collect();
    (faces, frozen)
}

/// An oriented simple polyline with face metadata.
#[derive(Clone, Debug)]
pub struct BoundaryChain {
    pub vertices: Vec<Point>,
    pub faces: Vec<Face>,
    pub generation: u32,
    /// Accumulated count of blip-graph corner points, the point set left
    /// outside all faces by the construction.
    pub edge_set_measure: usize,
}

impl BoundaryChain {
    /// The generation-0 chain: the flat unit face from (-1/2, 0) to (1/2, 0)
    /// with its distinguished end on the right.
    pub fn unit_face() -> Self {
        Self {
            vertices: vec![Point::new(-0.5, 0.0), Point::new(0.5, 0.0)],
            faces: vec![Face {
                i0: 0,
                i1: 1,
                dist_end: 1,
            }],
            generation: 0,
            edge_set_measure: 0,
        }
    }

    /// A flat chain from `a` to `b` as a single face (domain on the left).
    pub fn flat_segment(a: Point, b: Point) -> Self {
        Self {
            vertices: vec![a, b],
            faces: vec![Face {
                i0: 0,
                i1: 1,
                dist_end: 1,
            }],
            generation: 0,
            edge_set_measure: 0,
        }
    }

    /// Build a chain from a bare polyline with no face metadata.
    pub fn from_polyline(vertices: Vec<Point>) -> Self {
        Self {
            vertices,
            faces: Vec::new(),
            generation: 0,
            edge_set_measure: 0,
        }
    }

    pub fn num_segments(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[i + 1])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        crate::geom::kahan_sum(self.segments().map(|(a, b)| a.dist(b)))
    }

    pub fn face_endpoints(&self, f: &Face) -> (Point, Point) {
        (self.vertices[f.i0], self.vertices[f.i1])
    }

    pub fn face_len(&self, f: &Face) -> f64 {
        let (a, b) = self.face_endpoints(f);
        a.dist(b)
    }

    /// Unit normal of a face pointing away from the domain (the domain lies
    /// on the left of travel).
    pub fn face_outward_normal(&self, f: &Face) -> Point {
        let (a, b) = self.face_endpoints(f);
        b.sub(a).normalized().perp_right()
    }

    /// Total length covered by faces.
    pub fn face_length(&self) -> f64 {
        crate::geom::kahan_sum(self.faces.iter().map(|f| self.face_len(f)))
    }

    /// Total length of frozen (non-face) segments.
    pub fn frozen_length(&self) -> f64 {
        self.length() - self.face_length()
    }

    /// Verify the chain is a simple polyline: consecutive vertices distinct,
    /// no repeated vertices, and no two segments crossing.
    pub fn verify_simple(&self) -> Result<(), ChainError> {
        if self.vertices.len() < 2 {
            return Err(ChainError::TooShort);
        }
        let segs: Vec<(Point, Point)> = self.segments().collect();
        let grid = SegmentGrid::build(segs.clone());
        for (i, (a, b)) in segs.iter().enumerate() {
            if a == b {
                return Err(ChainError::NotSimple(i, i));
            }
            let r = a.dist(*b);
            let mid = a.lerp(*b, 0.5);
            for j in grid.candidates_near(mid, r) {
                let j = j as usize;
                if j <= i {
                    continue;
                }
                let (c, d) = segs[j];
                if segments_cross(*a, *b, c, d) {
                    return Err(ChainError::NotSimple(i, j));
                }
                // Non-adjacent segments must not share vertices either.
                if j > i + 1 && (c == *a || c == *b || d == *a || d == *b) {
                    return Err(ChainError::NotSimple(i, j));
                }
            }
        }
        Ok(())
    }

    /// Replace the given face by the image of the template graph and return
    /// the new chain. The face endpoints stay fixed, the new graph faces are
    /// Whitney-subdivided, and the chain is checked for collisions first.
    pub fn add_blip(
        &self,
        face_idx: usize,
        template: &BlipTemplate,
        limits: SubdivisionLimits,
    ) -> Result<BoundaryChain, ChainError> {
        if face_idx >= self.faces.len() {
            return Err(ChainError::FaceIndex(face_idx, self.faces.len()));
        }
        let grid = SegmentGrid::build(self.segments().collect());
        let face = self.faces[face_idx];
        self.check_blip_collision(face_idx, template, &grid)?;

        let mut out = BoundaryChain {
            vertices: Vec::with_capacity(self.vertices.len() + 16),
            faces: Vec::with_capacity(self.faces.len() + 32),
            generation: self.generation,
            edge_set_measure: self.edge_set_measure,
        };
        let face_of_segment: Vec<Option<usize>> = {
            let mut v = vec![None; self.num_segments()];
            for (k, f) in self.faces.iter().enumerate() {
                v[f.i0] = Some(k);
            }
            v
        };
        for s in 0..self.num_segments() {
            let (a, b) = self.segment(s);
            out.vertices.push(a);
            match face_of_segment[s] {
                Some(k) if k == face_idx => {
                    emit_blip(&mut out, a, b, face.dist_end, template, limits);
                }
                Some(_) => {
                    // Other faces are carried over untouched.
                    out.faces.push(Face {
                        i0: out.vertices.len() - 1,
                        i1: out.vertices.len(),
                        dist_end: self.faces[face_of_segment[s].unwrap()].dist_end,
                    });
                }
                None => {}
            }
        }
        out.vertices.push(*self.vertices.last().unwrap());
        Ok(out)
    }

    fn check_blip_collision(
        &self,
        face_idx: usize,
        template: &BlipTemplate,
        grid: &SegmentGrid,
    ) -> Result<(), ChainError> {
        let face = self.faces[face_idx];
        let (v0, v1) = self.face_endpoints(&face);
        let len = v0.dist(v1);
        let mid = v0.lerp(v1, 0.5);
        let t = v1.sub(v0).normalized();
        let nl = t.perp_left();
        let b = template.cone_height();
        // The double cone attached to the face.
        let quad = [
            v0,
            mid.add(nl.scale(-b * len)),
            v1,
            mid.add(nl.scale(b * len)),
        ];
        let radius = len * (0.5 + b);
        for j in grid.candidates_near(mid, radius) {
            let j = j as usize;
            if j == face.i0 {
                continue;
            }
            let (c, d) = self.segment(j);
            for e in 0..4 {
                if segments_cross(quad[e], quad[(e + 1) % 4], c, d) {
                    return Err(ChainError::Collision(face_idx));
                }
            }
            for p in [c, d] {
                if p != v0 && p != v1 && point_in_polygon(p, &quad) {
                    return Err(ChainError::Collision(face_idx));
                }
            }
        }
        Ok(())
    }

    /// Apply one blip to every face, in face order. Equivalent to folding
    /// `add_blip` over the current face set.
    pub fn blip_all(
        &self,
        template: &BlipTemplate,
        limits: SubdivisionLimits,
    ) -> Result<BoundaryChain, ChainError> {
        let grid = SegmentGrid::build(self.segments().collect());
        for k in 0..self.faces.len() {
            self.check_blip_collision(k, template, &grid)?;
        }
        let mut out = BoundaryChain {
            vertices: Vec::with_capacity(self.vertices.len() * 2),
            faces: Vec::with_capacity(self.faces.len() * 24),
            generation: self.generation + 1,
            edge_set_measure: self.edge_set_measure,
        };
        let face_of_segment: Vec<Option<usize>> = {
            let mut v = vec![None; self.num_segments()];
            for (k, f) in self.faces.iter().enumerate() {
                v[f.i0] = Some(k);
            }
            v
        };
        for s in 0..self.num_segments() {
            let (a, b) = self.segment(s);
            out.vertices.push(a);
            if let Some(k) = face_of_segment[s] {
                emit_blip(&mut out, a, b, self.faces[k].dist_end, template, limits);
            }
        }
        out.vertices.push(*self.vertices.last().unwrap());
        Ok(out)
    }
}

/// Append the blip replacement of the face `[a, b]` to `out`.
///
/// Assumes `a` has already been pushed and `b` will be pushed by the caller
/// (or by the next segment). Interior vertices and face records are appended
/// here.
fn emit_blip(
    out: &mut BoundaryChain,
    a: Point,
    b: Point,
    dist_end: u8,
    template: &BlipTemplate,
    limits: SubdivisionLimits,
) {
    let len = a.dist(b);
    let mid = a.lerp(b, 0.5);
    let t = b.sub(a).normalized();
    let nl = t.perp_left();
    // Similarity taking the unit face onto [a, b]: (x, y) maps to
    // mid + len * (x t + y n_left). Positive bump values point into the
    // domain.
    let map = |x: f64, y: f64| -> Point {
        if y == 0.0 && x == -0.5 {
            return a;
        }
        if y == 0.0 && x == 0.5 {
            return b;
        }
        mid.add(t.scale(len * x)).add(nl.scale(len * y))
    };
    let graph = template.psi().simplified();
    let bps = graph.graph_polyline();
    out.edge_set_measure += bps.len().saturating_sub(2);
    for w in bps.windows(2) {
        let pa = map(w[0].x, w[0].y);
        let pb = map(w[1].x, w[1].y);
        let piece_len = pa.dist(pb);
        let levels = limits.levels_for(piece_len);
        let (cubes, stubs) = whitney_unit_intervals(levels);
        // Walk the tiling of the piece in order, emitting interior vertices
        // and recording cube intervals as faces.
        let mut intervals: Vec<(f64, f64, bool)> =
            cubes.iter().map(|&(lo, hi)| (lo, hi, true)).collect();
        intervals.extend(stubs.iter().map(|&(lo, hi)| (lo, hi, false)));
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for (lo, _hi, is_face) in intervals {
            if lo > 0.0 {
                out.vertices.push(pa.lerp(pb, lo));
            }
            if is_face {
                out.faces.push(Face {
                    i0: out.vertices.len() - 1,
                    i1: out.vertices.len(),
                    dist_end,
                });
            }
        }
        if w[1].x < 0.5 {
            out.vertices.push(pb);
        }
    }
}

/// Generate the generation-`m` snowflake approximant for the template,
/// starting from the flat unit face.
pub fn generate_snowflake(
    template: &BlipTemplate,
    generations: u32,
    limits: SubdivisionLimits,
) -> Result<BoundaryChain, ChainError> {
    let mut chain = BoundaryChain::unit_face();
    for _ in 0..generations {
        chain = chain.blip_all(template, limits)?;
        chain.verify_simple()?;
    }
    Ok(chain)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ChainJson {
    format_version: u32,
    generation: u32,
    vertices: Vec<[f64; 2]>,
    faces: Vec<Face>,
    #[serde(default)]
    edge_set_measure: usize,
}

impl BoundaryChain {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ChainJson {
            format_version: 1,
            generation: self.generation,
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            faces: self.faces.clone(),
            edge_set_measure: self.edge_set_measure,
        })
        .expect("chain serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let j: ChainJson = serde_json::from_value(v.clone())?;
        Ok(Self {
            vertices: j.vertices.iter().map(|p| Point::new(p[0], p[1])).collect(),
            faces: j.faces,
            generation: j.generation,
            edge_set_measure: j.edge_set_measure,
        })
    }
}
