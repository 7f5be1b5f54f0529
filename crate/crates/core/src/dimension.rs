//! Dimension diagnostics for boundary measures: local log-mass slopes, the
//! sampled spectrum of local dimensions, an information-dimension estimator,
//! and greedy Hausdorff content upper bounds.

use crate::geom::Point;
use crate::measure::BoundaryMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DimensionError {
    #[error("ball around ({0}, {1}) carries no mass at the smallest radius")]
    ZeroMass(f64, f64),
    #[error("need at least {need} dyadic radii between {r_min} and {r_max}")]
    TooFewRadii { need: usize, r_min: f64, r_max: f64 },
    #[error("measure carries no mass")]
    EmptyMeasure,
}

/// Least-squares slope of `log mu(Delta(x, r))` against `log r` over dyadic
/// radii `r_max / 2^j` down to `r_min`. Returns `(slope, fit_r2)`.
pub fn local_dimension(
    measure: &BoundaryMeasure,
    x: Point,
    r_min: f64,
    r_max: f64,
) -> Result<(f64, f64), DimensionError> {
    let mut radii = Vec::new();
    let mut r = r_max;
    while r >= r_min * (1.0 - 1e-12) {
        radii.push(r);
        r *= 0.5;
    }
    if radii.len() < 5 {
        return Err(DimensionError::TooFewRadii {
            need: 5,
            r_min,
            r_max,
        });
    }
    if measure.mass_in_ball(x, *radii.last().unwrap()) <= 0.0 {
        return Err(DimensionError::ZeroMass(x.x, x.y));
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r.ln(), measure.mass_in_ball(x, r).ln()))
        .collect();
    Ok(least_squares_slope(&pts))
}

/// Slope and R^2 of a simple linear regression y = a + b x.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// The sampled spectrum of local dimensions.
#[derive(Clone, Debug)]
pub struct DimensionEstimate {
    /// (center, fitted local slope, fit R^2) per sampled node.
    pub samples: Vec<(Point, f64, f64)>,
    pub mu_weighted_mean: f64,
    pub mu_weighted_std: f64,
    pub radii_range: (f64, f64),
    /// Total weight of the sampled nodes.
    pub sampled_mass: f64,
}

/// Sample centers with probability proportional to node weights, estimate
/// the local dimension at each, and report mass-weighted statistics.
///
/// Centers whose `r_max`-ball would leave the measure's support span along
/// the x-axis are excluded, so window clipping does not bias the slopes.
pub fn dimension_spectrum(
    measure: &BoundaryMeasure,
    n_samples: usize,
    seed: u64,
    r_min: f64,
    r_max: f64,
) -> Result<DimensionEstimate, DimensionError> {
    let n_samples = n_samples.max(16);
    if measure.total_mass <= 0.0 {
        return Err(DimensionError::EmptyMeasure);
    }
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, &(_, w)) in measure.node_weights.iter().enumerate() {
        if w > 0.0 {
            xlo = xlo.min(measure.node_points[k].x);
            xhi = xhi.max(measure.node_points[k].x);
        }
    }
    // Candidate nodes away from the support ends.
    let candidates: Vec<usize> = (0..measure.node_weights.len())
        .filter(|&k| {
            let (_, w) = measure.node_weights[k];
            let p = measure.node_points[k];
            w > 0.0 && p.x - xlo >= r_max && xhi - p.x >= r_max
        })
        .collect();
    if candidates.is_empty() {
        return Err(DimensionError::EmptyMeasure);
    }
    let cum: Vec<f64> = {
        let mut acc = 0.0;
        candidates
            .iter()
            .map(|&k| {
                acc += measure.node_weights[k].1;
                acc
            })
            .collect()
    };
    let total = *cum.last().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: std::collections::HashMap<usize, (f64, f64)> = std::collections::HashMap::new();
    let mut samples = Vec::with_capacity(n_samples);
    let mut sum_w = 0.0;
    let mut sum_ws = 0.0;
    let mut sum_ws2 = 0.0;
    for _ in 0..n_samples {
        let u: f64 = rng.gen_range(0.0..total);
        let pos = cum.partition_point(|&c| c <= u);
        let k = candidates[pos.min(candidates.len() - 1)];
        let (slope, r2) = match cache.get(&k) {
            Some(&v) => v,
            None => {
                let v = local_dimension(measure, measure.node_points[k], r_min, r_max)?;
                cache.insert(k, v);
                v
            }
        };
        let w = measure.node_weights[k].1;
        samples.push((measure.node_points[k], slope, r2));
        sum_w += w;
        sum_ws += w * slope;
        sum_ws2 += w * slope * slope;
    }
    let mean = sum_ws / sum_w;
    let var = (sum_ws2 / sum_w - mean * mean).max(0.0);
    Ok(DimensionEstimate {
        samples,
        mu_weighted_mean: mean,
        mu_weighted_std: var.sqrt(),
        radii_range: (r_min, r_max),
        sampled_mass: sum_w,
    })
}

/// Information (entropy) dimension estimate at each partition scale: the
/// normalized measure's entropy over an axis-aligned dyadic partition of the
/// support box, divided by `log l`.
pub fn entropy_dimension(measure: &BoundaryMeasure, scales: &[f64]) -> Vec<(f64, f64)> {
    let mass = measure.total_mass;
    if mass <= 0.0 {
        return Vec::new();
    }
    // Support bounding box.
    let (mut lo, mut hi) = (
        Point::new(f64::INFINITY, f64::INFINITY),
        Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for (k, &(_, w)) in measure.node_weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        for (a, b) in &measure.node_support[k] {
            for p in [a, b] {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let p = measure.node_points[k];
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let mut out = Vec::new();
    for &l in scales {
        let nx = (((hi.x - lo.x) / l).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / l).ceil() as usize).max(1);
        let mut cells: std::collections::HashMap<(usize, usize), f64> =
            std::collections::HashMap::new();
        for (k, &(_, w)) in measure.node_weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let support = &measure.node_support[k];
            let total: f64 = support.iter().map(|(a, b)| a.dist(*b)).sum();
            if total == 0.0 {
                let p = measure.node_points[k];
                let ix = (((p.x - lo.x) / l).floor() as usize).min(nx - 1);
                let iy = (((p.y - lo.y) / l).floor() as usize).min(ny - 1);
                *cells.entry((ix, iy)).or_default() += w;
                continue;
            }
            for (a, b) in support {
                // Sample the support segment at sub-cell resolution; the
                // support pieces are short compared to any useful scale.
                let len = a.dist(*b);
                let n = ((len / l).ceil() as usize * 4).clamp(1, 4096);
                for j in 0..n {
                    let q = a.lerp(*b, (j as f64 + 0.5) / n as f64);
                    let ix = (((q.x - lo.x) / l).floor() as usize).min(nx - 1);
                    let iy = (((q.y - lo.y) / l).floor() as usize).min(ny - 1);
                    *cells.entry((ix, iy)).or_default() += w * len / (total * n as f64);
                }
            }
        }
        let mut h = 0.0;
        for (_, m) in cells {
            let q = m / mass;
            if q > 0.0 {
                h += q * q.ln();
            }
        }
        out.push((l, h / l.ln()));
    }
    out
}

/// Greedy upper bound for the Hausdorff content of a finite point sample:
/// repeatedly place a ball of diameter `delta_cap` covering the most
/// uncovered points, and sum `diameter^alpha`.
pub fn hausdorff_content(points: &[Point], alpha: f64, delta_cap: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let r = 0.5 * delta_cap;
    let r2 = r * r;
    // Uniform hash grid with cell size delta_cap for neighbor queries.
    let cell = delta_cap.max(1e-300);
    let key = |p: Point| -> (i64, i64) { ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64) };
    let mut bins: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, p) in points.iter().enumerate() {
        bins.entry(key(*p)).or_default().push(i);
    }
    let neighbors = |p: Point, covered: &[bool]| -> Vec<usize> {
        let (kx, ky) = key(p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = bins.get(&(kx + dx, ky + dy)) {
                    for &i in list {
                        let d2 = points[i].sub(p).dot(points[i].sub(p));
                        // Tolerance keeps rounding from fragmenting dense
                        // collinear samples.
                        if !covered[i] && d2 <= r2 * (1.0 + 1e-9) {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out
    };

    let mut covered = vec![false; points.len()];
    let mut remaining = points.len();
    let mut balls = 0usize;
    while remaining > 0 {
        // Best center among uncovered points by covered count; ties broken
        // by index for determinism.
        let mut best = (0usize, usize::MAX);
        for i in 0..points.len() {
            if covered[i] {
                continue;
            }
            let gain = neighbors(points[i], &covered).len();
            if gain > best.0 {
                best = (gain, i);
            }
        }
        let center = points[best.1];
        for i in neighbors(center, &covered) {
            covered[i] = true;
            remaining -= 1;
        }
        balls += 1;
    }
    balls as f64 * delta_cap.powf(alpha)
}

/// The middle-thirds Cantor measure truncated at the given depth, supported
/// on `[0, 1] x {0}`: each depth-`d` interval carries mass `2^-d` spread
/// uniformly.
pub fn cantor_measure(depth: u32) -> BoundaryMeasure {
    let mut intervals = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for (a, b) in intervals {
            let third = (b - a) / 3.0;
            next.push((a, a + third));
            next.push((b - third, b));
        }
        intervals = next;
    }
    let w = 0.5f64.powi(depth as i32);
    let node_points: Vec<Point> = intervals
        .iter()
        .map(|&(a, b)| Point::new(0.5 * (a + b), 0.0))
        .collect();
    let node_support: Vec<Vec<(Point, Point)>> = intervals
        .iter()
        .map(|&(a, b)| vec![(Point::new(a, 0.0), Point::new(b, 0.0))])
        .collect();
    BoundaryMeasure {
        node_weights: (0..intervals.len()).map(|k| (k, w)).collect(),
        node_points,
        node_support,
        total_mass: w * intervals.len() as f64,
        clamp_count: 0,
    }
}

/// Uniform unit-mass measure on a segment, as a control fixture.
pub fn uniform_segment_measure(a: Point, b: Point, nodes: usize) -> BoundaryMeasure {
    let n = nodes.max(2);
    let pts: Vec<Point> = (0..n)
        .map(|i| a.lerp(b, i as f64 / (n - 1) as f64))
        .collect();
    let w = 1.0 / (n - 1) as f64;
    let weights: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * w } else { w })
        .collect();
    BoundaryMeasure::from_weighted_polyline(&pts, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LOG2_LOG3: f64 = 0.6309297535714574;

    #[test]
    fn uniform_segment_slope_is_one() {
        let mu = uniform_segment_measure(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 2001);
        let (slope, r2) = local_dimension(&mu, Point::new(0.5, 0.0), 0.01, 0.32).unwrap();
        assert!((slope - 1.0).abs() <= 0.01, "slope {slope}");
        assert!(r2 > 0.999);
    }

    #[test]
    fn point_mass_slope_is_zero() {
        let mut mu = crate::measure::BoundaryMeasure::point_mass(Point::new(0.3, 0.0), 2.0);
        // Give the atom a tiny bit of company so the window restriction in
        // the spectrum has a span; the local slope at the atom stays 0.
        let _ = &mut mu;
        let (slope, _) = local_dimension(&mu, Point::new(0.3, 0.0), 0.01, 0.32).unwrap();
        assert_relative_eq!(slope, 0.0);
    }

    #[test]
    fn cantor_local_dimension() {
        let mu = cantor_measure(8);
        // At the left endpoint of the set (x = 0 is in every generation).
        let (slope, _) = local_dimension(&mu, Point::new(0.0, 0.0), 3f64.powi(-7), 0.3).unwrap();
        assert!(
            (slope - LOG2_LOG3).abs() <= 0.03,
            "slope {slope} vs {LOG2_LOG3}"
        );
    }

    #[test]
    fn spectrum_uniform_control() {
        let mu = uniform_segment_measure(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 4001);
        let est = dimension_spectrum(&mu, 64, 7, 0.004, 0.1).unwrap();
        assert!(
            (est.mu_weighted_mean - 1.0).abs() <= 0.02,
            "mean {}",
            est.mu_weighted_mean
        );
        assert!(est.mu_weighted_std <= 0.02, "std {}", est.mu_weighted_std);
    }

    #[test]
    fn spectrum_cantor() {
        let mu = cantor_measure(8);
        let est = dimension_spectrum(&mu, 64, 11, 3f64.powi(-6), 0.05).unwrap();
        assert!(
            (est.mu_weighted_mean - LOG2_LOG3).abs() <= 0.05,
            "mean {}",
            est.mu_weighted_mean
        );
    }

    #[test]
    fn spectrum_deterministic_per_seed() {
        let mu = cantor_measure(6);
        let a = dimension_spectrum(&mu, 32, 42, 3f64.powi(-5), 0.1).unwrap();
        let b = dimension_spectrum(&mu, 32, 42, 3f64.powi(-5), 0.1).unwrap();
        assert_eq!(a.mu_weighted_mean, b.mu_weighted_mean);
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.1, y.1);
        }
        let c = dimension_spectrum(&mu, 32, 43, 3f64.powi(-5), 0.1).unwrap();
        let _ = c;
    }

    #[test]
    fn slope_invariant_under_mass_scaling() {
        let mu = cantor_measure(6);
        let mut scaled = mu.clone();
        for w in scaled.node_weights.iter_mut() {
            w.1 *= 37.5;
        }
        scaled.total_mass *= 37.5;
        let x = Point::new(0.0, 0.0);
        let (s1, _) = local_dimension(&mu, x, 3f64.powi(-4), 0.25).unwrap();
        let (s2, _) = local_dimension(&scaled, x, 3f64.powi(-4), 0.25).unwrap();
        assert_relative_eq!(s1, s2, epsilon = 1e-12);
    }

    #[test]
    fn entropy_dimension_controls() {
        let mu = uniform_segment_measure(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 2001);
        let rows = entropy_dimension(&mu, &[0.05, 0.01]);
        for (l, d) in rows {
            assert!((d - 1.0).abs() <= 0.05, "scale {l}: entropy dim {d}");
        }
        let atom = crate::measure::BoundaryMeasure::point_mass(Point::new(0.5, 0.0), 1.0);
        let rows = entropy_dimension(&atom, &[0.01]);
        assert_relative_eq!(rows[0].1, 0.0);

        let cantor = cantor_measure(8);
        let l = 3f64.powi(-6);
        let rows = entropy_dimension(&cantor, &[l]);
        assert!(
            (rows[0].1 - LOG2_LOG3).abs() <= 0.05,
            "entropy dim {} at l = 3^-6",
            rows[0].1
        );
    }

    #[test]
    fn content_of_finite_set_vanishes() {
        let pts: Vec<Point> = (0..7).map(|i| Point::new(i as f64, 0.0)).collect();
        for cap in [0.5, 0.1, 0.01] {
            let c = hausdorff_content(&pts, 0.7, cap);
            assert!(c <= 7.0 * cap.powf(0.7) + 1e-12);
        }
    }

    #[test]
    fn content_of_segment_near_length() {
        let n = 4000;
        let pts: Vec<Point> = (0..=n)
            .map(|i| Point::new(2.0 * i as f64 / n as f64, 0.0))
            .collect();
        let c = hausdorff_content(&pts, 1.0, 0.05);
        assert!((c - 2.0).abs() <= 0.2, "content {c} vs length 2");
    }

    #[test]
    fn content_of_cantor_sample() {
        // Depth-8 endpoints sample; at the critical exponent the content of
        // the standard cover is 1 per scale, so the greedy value stays below
        // 2 at the matching cap.
        let mu = cantor_measure(8);
        let pts: Vec<Point> = mu
            .node_support
            .iter()
            .flat_map(|segs| segs.iter().flat_map(|(a, b)| [*a, *b]))
            .collect();
        let cap = 3f64.powi(-8);
        let c = hausdorff_content(&pts, LOG2_LOG3, cap);
        assert!(c <= 2.0 + 1e-9, "content {c}");
        // Oracle: the explicit 2^k-interval cover at scale 3^-k gives
        // exactly (2/3^alpha)^k = 1; greedy with diameter 3^-8 needs at most
        // two balls per depth-8 interval.
        let oracle = 2.0 * 2f64.powi(8) * cap.powf(LOG2_LOG3);
        assert!(c <= oracle + 1e-9);
    }

    #[test]
    fn content_monotone_in_cap() {
        let mu = cantor_measure(6);
        let pts: Vec<Point> = mu.node_points.clone();
        let caps = [0.3, 0.1, 0.03, 0.01];
        let vals: Vec<f64> = caps
            .iter()
            .map(|&cap| hausdorff_content(&pts, LOG2_LOG3, cap))
            .collect();
        for w in vals.windows(2) {
            assert!(
                w[1] <= w[0] * 1.6,
                "content should not explode as the cap shrinks: {vals:?}"
            );
        }
    }
}
