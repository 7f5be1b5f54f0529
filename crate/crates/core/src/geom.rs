//! Planar primitives shared across the crate: points, segments, piecewise
//! linear functions, and a uniform grid for proximity queries over segment
//! soups.

use serde::{Deserialize, Serialize};

/// A point (or vector) in the plane.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product, positive when `o` is
    /// counterclockwise from `self`.
    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    #[inline]
    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            self
        }
    }

    /// Rotate by +90 degrees (counterclockwise).
    #[inline]
    pub fn perp_left(self) -> Point {
        Point::new(-self.y, self.x)
    }

    /// Rotate by -90 degrees (clockwise).
    #[inline]
    pub fn perp_right(self) -> Point {
        Point::new(self.y, -self.x)
    }

    #[inline]
    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }
}

/// Compensated (Kahan) summation, so long sums keep near-full precision.
pub fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// Parameter of the point on `[a, b]` closest to `p`, clamped to `[0, 1]`.
pub fn point_segment_param(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return 0.0;
    }
    (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
}

/// Proper intersection test for open segments `(a, b)` and `(c, d)`.
///
/// Shared endpoints do not count; collinear overlap of positive length does.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    // Collinear configurations: report a crossing only when the overlap has
    // positive length (touching at a single shared endpoint is fine).
    let collinear_on = |p: Point, q: Point, r: Point| -> bool {
        orient(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    let mut touch = 0;
    for (p, q, r) in [(a, b, c), (a, b, d), (c, d, a), (c, d, b)] {
        if collinear_on(p, q, r) && r != p && r != q {
            touch += 1;
        }
    }
    touch > 0 && !(o1 * o2 > 0.0 || o3 * o4 > 0.0)
}

/// Signed orientation of the triple `(a, b, c)` via robust predicates.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

/// Parameter interval of the segment `[a, b]` that lies inside the open ball
/// `B(c, r)`, or `None` when the segment misses the ball.
pub fn segment_ball_interval(a: Point, b: Point, c: Point, r: f64) -> Option<(f64, f64)> {
    let d = b.sub(a);
    let f = a.sub(c);
    let qa = d.dot(d);
    if qa == 0.0 {
        return if f.norm() < r { Some((0.0, 1.0)) } else { None };
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.dot(f) - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    if t0 < t1 {
        Some((t0, t1))
    } else {
        None
    }
}

/// Signed area of the intersection of the disk `B(c, r)` with a simple
/// polygon, by summing per-edge chord and sector contributions about the
/// center. Positive for counterclockwise polygons.
pub fn disk_polygon_area(c: Point, r: f64, poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += disk_chord_contribution(c, r, poly[i], poly[(i + 1) % n]);
    }
    acc
}

fn signed_sector(c: Point, r: f64, from: Point, to: Point) -> f64 {
    // Signed sector area between the directions of (from - c) and (to - c).
    let a = from.sub(c);
    let b = to.sub(c);
    let mut dth = b.y.atan2(b.x) - a.y.atan2(a.x);
    if dth > std::f64::consts::PI {
        dth -= 2.0 * std::f64::consts::PI;
    }
    if dth < -std::f64::consts::PI {
        dth += 2.0 * std::f64::consts::PI;
    }
    0.5 * r * r * dth
}

fn disk_chord_contribution(c: Point, r: f64, p0: Point, p1: Point) -> f64 {
    let r2 = r * r;
    let in0 = p0.sub(c).dot(p0.sub(c)) <= r2;
    let in1 = p1.sub(c).dot(p1.sub(c)) <= r2;
    match segment_ball_interval(p0, p1, c, r) {
        None => {
            // Edge entirely outside: the boundary of the intersection runs
            // along the arc between the two directions.
            signed_sector(c, r, p0, p1)
        }
        Some((t0, t1)) => {
            let q0 = if in0 { p0 } else { p0.lerp(p1, t0) };
            let q1 = if in1 { p1 } else { p0.lerp(p1, t1) };
            let mut acc = 0.5 * q0.sub(c).cross(q1.sub(c));
            if !in0 {
                acc += signed_sector(c, r, p0, q0);
            }
            if !in1 {
                acc += signed_sector(c, r, q1, p1);
            }
            acc
        }
    }
}

/// Winding-number point-in-polygon test for a closed polygon given by its
/// vertex loop (last vertex implicitly joined to the first).
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut winding = 0i32;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= p.y {
            if b.y > p.y && orient(a, b, p) > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && orient(a, b, p) < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Signed area of a polygon loop (positive for counterclockwise).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Dominant direction of a point cloud about the pivot `w`: the top
/// eigenvector of the second-moment matrix of `p - w`.
pub fn principal_direction(points: &[Point], w: Point) -> Point {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p.sub(w);
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // Top eigenvector of [[sxx, sxy], [sxy, syy]].
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let v = if sxy.abs() > 1e-300 {
        Point::new(lam - syy, sxy)
    } else if sxx >= syy {
        Point::new(1.0, 0.0)
    } else {
        Point::new(0.0, 1.0)
    };
    let n = v.norm();
    if n > 0.0 {
        v.scale(1.0 / n)
    } else {
        Point::new(1.0, 0.0)
    }
}

/// A scalar piecewise linear function on an interval, stored as sorted
/// breakpoints with values. Evaluation outside the breakpoint range clamps to
/// the end values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    /// Build from `(x, y)` pairs. Requires at least two points with strictly
    /// increasing `x`.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, String> {
        if points.len() < 2 {
            return Err("piecewise linear function needs at least 2 points".into());
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(format!(
                    "breakpoints must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                ));
            }
        }
        Ok(Self {
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
        })
    }

    /// Identically zero function on `[lo, hi]`.
    pub fn zero(lo: f64, hi: f64) -> Self {
        Self {
            xs: vec![lo, hi],
            ys: vec![0.0, 0.0],
        }
    }

    /// Symmetric tent of the given half-width and height, zero outside,
    /// defined on `[lo, hi]`.
    pub fn tent(lo: f64, hi: f64, half_width: f64, height: f64) -> Self {
        Self {
            xs: vec![lo, -half_width, 0.0, half_width, hi],
            ys: vec![0.0, 0.0, height, 0.0, 0.0],
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.ys.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    pub fn max_slope(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.xs.len() - 1 {
            let s = (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i]);
            m = m.max(s.abs());
        }
        m
    }

    /// Interval outside of which the function vanishes identically, or `None`
    /// for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        let nz: Vec<usize> = (0..self.ys.len()).filter(|&i| self.ys[i] != 0.0).collect();
        let (&first, &last) = (nz.first()?, nz.last()?);
        let lo = if first == 0 { self.xs[0] } else { self.xs[first - 1] };
        let hi = if last == self.ys.len() - 1 {
            *self.xs.last().unwrap()
        } else {
            self.xs[last + 1]
        };
        Some((lo, hi))
    }

    /// Arc length of the graph over the whole domain.
    pub fn graph_arclength(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.xs.len() - 1 {
            let dx = self.xs[i + 1] - self.xs[i];
            let dy = self.ys[i + 1] - self.ys[i];
            acc += dx.hypot(dy);
        }
        acc
    }

    /// Integral of the squared slope over the domain.
    pub fn grad_square_integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.xs.len() - 1 {
            let dx = self.xs[i + 1] - self.xs[i];
            let s = (self.ys[i + 1] - self.ys[i]) / dx;
            acc += s * s * dx;
        }
        acc
    }

    /// The rescaled copy `x -> f(n x) / n`, restricted to the same domain as
    /// `self` (the part of the squeezed graph outside is constant anyway).
    pub fn squeeze(&self, n: u32) -> PiecewiseLinear {
        let n = n as f64;
        let (lo, hi) = self.domain();
        let mut pts: Vec<(f64, f64)> = Vec::new();
        pts.push((lo, self.eval(lo * n) / n));
        for (&x, &y) in self.xs.iter().zip(self.ys.iter()) {
            let xs = x / n;
            if xs > lo && xs < hi {
                pts.push((xs, y / n));
            }
        }
        pts.push((hi, self.eval(hi * n) / n));
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.dedup_by(|a, b| a.0 == b.0);
        PiecewiseLinear::new(&pts).expect("squeeze preserves monotone breakpoints")
    }

    /// Graph as a polyline, one vertex per breakpoint.
    pub fn graph_polyline(&self) -> Vec<Point> {
        self.xs
            .iter()
            .zip(self.ys.iter())
            .map(|(&x, &y)| Point::new(x, y))
            .collect()
    }

    /// Merge consecutive collinear pieces (equal slopes) into single pieces.
    pub fn simplified(&self) -> PiecewiseLinear {
        let mut pts: Vec<(f64, f64)> = vec![(self.xs[0], self.ys[0])];
        for i in 1..self.xs.len() - 1 {
            let s0 = (self.ys[i] - pts.last().unwrap().1) / (self.xs[i] - pts.last().unwrap().0);
            let s1 = (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i]);
            if (s0 - s1).abs() > 1e-14 {
                pts.push((self.xs[i], self.ys[i]));
            }
        }
        pts.push((*self.xs.last().unwrap(), *self.ys.last().unwrap()));
        PiecewiseLinear::new(&pts).expect("simplification keeps order")
    }
}

/// Uniform grid over line segments for nearest-segment and proximity queries.
pub struct SegmentGrid {
    cell: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
    segs: Vec<(Point, Point)>,
}

impl SegmentGrid {
    pub fn build(segs: Vec<(Point, Point)>) -> Self {
        let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
        let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut total = 0.0;
        for (a, b) in &segs {
            xmin = xmin.min(a.x).min(b.x);
            xmax = xmax.max(a.x).max(b.x);
            ymin = ymin.min(a.y).min(b.y);
            ymax = ymax.max(a.y).max(b.y);
            total += a.dist(*b);
        }
        if segs.is_empty() {
            return Self {
                cell: 1.0,
                x0: 0.0,
                y0: 0.0,
                nx: 1,
                ny: 1,
                bins: vec![Vec::new()],
                segs,
            };
        }
        let span = (xmax - xmin).max(ymax - ymin).max(1e-12);
        // Aim for a few segments per cell.
        let mean_len = total / segs.len() as f64;
        let cell = mean_len.max(span / 512.0).max(1e-12);
        let nx = (((xmax - xmin) / cell).ceil() as usize + 1).min(2048);
        let ny = (((ymax - ymin) / cell).ceil() as usize + 1).min(2048);
        let cell_x = ((xmax - xmin) / nx as f64).max(1e-12);
        let cell_y = ((ymax - ymin) / ny as f64).max(1e-12);
        let cell = cell_x.max(cell_y);
        let nx = (((xmax - xmin) / cell).ceil() as usize).max(1);
        let ny = (((ymax - ymin) / cell).ceil() as usize).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        for (idx, (a, b)) in segs.iter().enumerate() {
            let ix0 = (((a.x.min(b.x) - xmin) / cell).floor() as isize).clamp(0, nx as isize - 1);
            let ix1 = (((a.x.max(b.x) - xmin) / cell).floor() as isize).clamp(0, nx as isize - 1);
            let iy0 = (((a.y.min(b.y) - ymin) / cell).floor() as isize).clamp(0, ny as isize - 1);
            let iy1 = (((a.y.max(b.y) - ymin) / cell).floor() as isize).clamp(0, ny as isize - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy as usize * nx + ix as usize].push(idx as u32);
                }
            }
        }
        Self {
            cell,
            x0: xmin,
            y0: ymin,
            nx,
            ny,
            bins,
            segs,
        }
    }

    pub fn segments(&self) -> &[(Point, Point)] {
        &self.segs
    }

    fn cell_of(&self, p: Point) -> (isize, isize) {
        (
            ((p.x - self.x0) / self.cell).floor() as isize,
            ((p.y - self.y0) / self.cell).floor() as isize,
        )
    }

    /// Indices of segments whose cells intersect the disk `B(p, r)`.
    pub fn candidates_near(&self, p: Point, r: f64) -> Vec<u32> {
        let (cx, cy) = self.cell_of(p);
        let reach = (r / self.cell).ceil() as isize + 1;
        let mut out = Vec::new();
        for iy in (cy - reach).max(0)..=(cy + reach).min(self.ny as isize - 1) {
            for ix in (cx - reach).max(0)..=(cx + reach).min(self.nx as isize - 1) {
                out.extend_from_slice(&self.bins[iy as usize * self.nx + ix as usize]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Distance from `p` to the nearest segment, with an expanding search.
    pub fn dist_to_nearest(&self, p: Point) -> f64 {
        if self.segs.is_empty() {
            return f64::INFINITY;
        }
        let mut r = self.cell;
        loop {
            let cand = self.candidates_near(p, r);
            let mut best = f64::INFINITY;
            for i in &cand {
                let (a, b) = self.segs[*i as usize];
                best = best.min(point_segment_dist(p, a, b));
            }
            if best <= r || r > 4.0 * self.span() {
                if best.is_finite() {
                    return best;
                }
                // No segment within any reasonable radius: fall back to brute.
                return self
                    .segs
                    .iter()
                    .map(|(a, b)| point_segment_dist(p, *a, *b))
                    .fold(f64::INFINITY, f64::min);
            }
            r *= 2.0;
        }
    }

    fn span(&self) -> f64 {
        self.cell * self.nx.max(self.ny) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn point_segment_distance_cases() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        assert_relative_eq!(point_segment_dist(Point::new(0.5, 1.0), a, b), 1.0);
        assert_relative_eq!(point_segment_dist(Point::new(-1.0, 0.0), a, b), 1.0);
        assert_relative_eq!(point_segment_dist(Point::new(2.0, 0.0), a, b), 1.0);
    }

    #[test]
    fn crossing_detection() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 1.0);
        let c = Point::new(0.0, 1.0);
        let d = Point::new(1.0, 0.0);
        assert!(segments_cross(a, b, c, d));
        // Shared endpoint does not count as a crossing.
        assert!(!segments_cross(a, b, b, d));
        // Disjoint parallel segments.
        assert!(!segments_cross(
            a,
            Point::new(1.0, 0.0),
            Point::new(0.0, 0.5),
            Point::new(1.0, 0.5)
        ));
    }

    #[test]
    fn ball_clipping() {
        let a = Point::new(-2.0, 0.0);
        let b = Point::new(2.0, 0.0);
        let (t0, t1) = segment_ball_interval(a, b, Point::new(0.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(t0, 0.25, epsilon = 1e-12);
        assert_relative_eq!(t1, 0.75, epsilon = 1e-12);
        assert!(segment_ball_interval(a, b, Point::new(0.0, 5.0), 1.0).is_none());
    }

    #[test]
    fn pl_eval_and_scaling() {
        let tent = PiecewiseLinear::tent(-0.5, 0.5, 0.25, 0.1);
        assert_relative_eq!(tent.eval(0.0), 0.1);
        assert_relative_eq!(tent.eval(0.125), 0.05);
        assert_relative_eq!(tent.eval(0.4), 0.0);
        let sq = tent.squeeze(4);
        assert_relative_eq!(sq.max_abs(), 0.025, epsilon = 1e-15);
        assert_relative_eq!(sq.eval(0.0), 0.025, epsilon = 1e-15);
        assert_relative_eq!(sq.eval(0.25 / 4.0), 0.0, epsilon = 1e-15);
        // Slope is invariant under the squeeze.
        assert_relative_eq!(sq.max_slope(), tent.max_slope(), epsilon = 1e-12);
    }

    #[test]
    fn pl_support() {
        let tent = PiecewiseLinear::tent(-0.5, 0.5, 0.25, 0.1);
        let (lo, hi) = tent.support().unwrap();
        assert_relative_eq!(lo, -0.25);
        assert_relative_eq!(hi, 0.25);
        assert!(PiecewiseLinear::zero(-0.5, 0.5).support().is_none());
    }

    #[test]
    fn polygon_tests() {
        let sq = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(Point::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Point::new(1.5, 0.5), &sq));
        assert_relative_eq!(polygon_area(&sq), 1.0);
    }

    #[test]
    fn disk_polygon_clipping() {
        let sq = vec![
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
        ];
        let pi = std::f64::consts::PI;
        // Disk well inside the square.
        assert_relative_eq!(
            disk_polygon_area(Point::new(0.0, 0.0), 0.5, &sq),
            pi * 0.25,
            max_relative = 1e-12
        );
        // Square well inside the disk.
        assert_relative_eq!(
            disk_polygon_area(Point::new(0.0, 0.0), 10.0, &sq),
            4.0,
            max_relative = 1e-12
        );
        // Disk centered on an edge midpoint: half the disk plus nothing.
        assert_relative_eq!(
            disk_polygon_area(Point::new(1.0, 0.0), 0.5, &sq),
            pi * 0.125,
            max_relative = 1e-10
        );
        // Disk centered at a corner: a quarter disk.
        assert_relative_eq!(
            disk_polygon_area(Point::new(1.0, 1.0), 0.5, &sq),
            pi * 0.0625,
            max_relative = 1e-10
        );
        // Disjoint.
        assert_relative_eq!(disk_polygon_area(Point::new(5.0, 0.0), 0.5, &sq), 0.0);
        // Monte Carlo oracle on a generic overlap.
        let c = Point::new(0.7, 0.4);
        let r = 0.9;
        let exact = disk_polygon_area(c, r, &sq);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 400_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if p.dist(c) <= r {
                hits += 1;
            }
        }
        let mc = 4.0 * hits as f64 / n as f64;
        assert!((exact - mc).abs() < 0.02, "exact {exact} vs mc {mc}");
    }

    #[test]
    fn principal_direction_of_line() {
        let pts: Vec<Point> = (0..50)
            .map(|i| Point::new(i as f64 * 0.1, i as f64 * 0.1 * 2.0))
            .collect();
        let d = principal_direction(&pts, Point::new(0.0, 0.0));
        let expected = Point::new(1.0, 2.0).normalized();
        assert!(d.cross(expected).abs() < 1e-9);
    }
}
