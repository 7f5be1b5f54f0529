//! Blip templates: a compactly supported piecewise linear bump `phi` together
//! with the frequency `N`, slope bound `theta0`, and cone height fraction `b`
//! that control one face-replacement step of the snowflake construction.

use crate::geom::{point_segment_dist, PiecewiseLinear, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("bump support [{0}, {1}] is not strictly inside (-1/2, 1/2)")]
    InvalidSupport(f64, f64),
    #[error("max slope {got} exceeds the bound theta0 = {bound}")]
    SlopeViolation { got: f64, bound: f64 },
    #[error("graph comes within {got} of the cone boundary, need at least b/100 = {need}")]
    ClearanceViolation { got: f64, need: f64 },
    #[error("invalid template parameter: {0}")]
    InvalidParameter(String),
}

/// A validated blip template.
///
/// `phi` is the unscaled bump on `[-1/2, 1/2]`; the realized graph is the
/// squeezed copy `psi(x) = phi(N x) / N` over the same interval. `b` is the
/// height fraction of the two cones attached to the unit face, and the graph
/// must clear their boundary by `b/100`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlipTemplate {
    phi: PiecewiseLinear,
    psi: PiecewiseLinear,
    theta0: f64,
    freq: u32,
    b: f64,
}

impl BlipTemplate {
    pub fn phi(&self) -> &PiecewiseLinear {
        &self.phi
    }

    /// The squeezed bump realized on the unit face.
    pub fn psi(&self) -> &PiecewiseLinear {
        &self.psi
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn freq(&self) -> u32 {
        self.freq
    }

    pub fn cone_height(&self) -> f64 {
        self.b
    }

    /// Graph of `psi` over `[-1/2, 1/2]` as a polyline, one vertex per
    /// breakpoint, collinear pieces merged.
    pub fn graph(&self) -> Vec<Point> {
        self.psi.simplified().graph_polyline()
    }

    /// Arc length of the realized graph; this is the length multiplier of one
    /// blip applied to a unit face.
    pub fn arclength(&self) -> f64 {
        self.psi.graph_arclength()
    }

    /// Boundary of the double cone attached to the unit face: the rhombus
    /// with vertices `(-1/2, 0), (0, -b), (1/2, 0), (0, b)`.
    pub fn cone_boundary(&self) -> [(Point, Point); 4] {
        let l = Point::new(-0.5, 0.0);
        let r = Point::new(0.5, 0.0);
        let dn = Point::new(0.0, -self.b);
        let up = Point::new(0.0, self.b);
        [(l, dn), (dn, r), (r, up), (up, l)]
    }

    /// Region above the realized graph inside the double cone, as a closed
    /// polygon loop (counterclockwise).
    pub fn upper_region_polygon(&self) -> Vec<Point> {
        let mut poly = self.graph();
        poly.push(Point::new(0.0, self.b));
        poly
    }
}

/// Validate a blip template.
///
/// Checks the support of `phi`, the slope bound, and that the squeezed graph
/// keeps distance at least `b/100` from the cone boundary wherever it leaves
/// the flat line.
pub fn build_template(
    phi: PiecewiseLinear,
    theta0: f64,
    freq: u32,
    b: f64,
) -> Result<BlipTemplate, TemplateError> {
    if !(b > 0.0 && b < 1.0) {
        return Err(TemplateError::InvalidParameter(format!(
            "cone height fraction b must lie in (0,1), got {b}"
        )));
    }
    if freq == 0 {
        return Err(TemplateError::InvalidParameter("frequency N must be >= 1".into()));
    }
    let (lo, hi) = phi.domain();
    if lo != -0.5 || hi != 0.5 {
        return Err(TemplateError::InvalidParameter(format!(
            "phi must be defined on [-1/2, 1/2], got [{lo}, {hi}]"
        )));
    }
    if let Some((slo, shi)) = phi.support() {
        if slo <= -0.5 || shi >= 0.5 {
            return Err(TemplateError::InvalidSupport(slo, shi));
        }
    }
    let got = phi.max_slope();
    if got > theta0 * (1.0 + 1e-12) {
        return Err(TemplateError::SlopeViolation { got, bound: theta0 });
    }

    let psi = phi.squeeze(freq);
    let template = BlipTemplate {
        phi,
        psi,
        theta0,
        freq,
        b,
    };

    // Clearance of the perturbed part of the graph from the cone boundary.
    let cone = template.cone_boundary();
    let mut min_d = f64::INFINITY;
    for p in template.graph() {
        if p.y == 0.0 {
            continue;
        }
        for (a, bb) in &cone {
            min_d = min_d.min(point_segment_dist(p, *a, *bb));
        }
    }
    let need = b / 100.0;
    if min_d < need {
        return Err(TemplateError::ClearanceViolation { got: min_d, need });
    }
    Ok(template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tent_phi(half_width: f64, height: f64) -> PiecewiseLinear {
        PiecewiseLinear::tent(-0.5, 0.5, half_width, height)
    }

    #[test]
    fn zero_bump_gives_flat_graph() {
        let t = build_template(PiecewiseLinear::zero(-0.5, 0.5), 0.1, 8, 0.4).unwrap();
        let g = t.graph();
        assert_eq!(g.len(), 2);
        assert_relative_eq!(g[0].x, -0.5);
        assert_relative_eq!(g[1].x, 0.5);
        assert!(g.iter().all(|p| p.y == 0.0));
        assert_relative_eq!(t.arclength(), 1.0);
    }

    #[test]
    fn sup_scaling_identity() {
        for n in [1u32, 2, 4, 8, 16] {
            let phi = tent_phi(0.25, 0.1);
            let t = build_template(phi.clone(), 0.5, n, 0.4).unwrap();
            assert_relative_eq!(t.psi().max_abs(), phi.max_abs() / n as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn tent_vertex_count_matches_breakpoint_enumeration() {
        // Oracle: enumerate the slope changes of psi(x) = phi(N x)/N on
        // [-1/2, 1/2] directly from the definition.
        let n = 8u32;
        let nf = n as f64;
        let phi = tent_phi(0.25, 0.1);
        let psi = |x: f64| phi.eval(nf * x) / nf;
        let mut candidates: Vec<f64> = vec![-0.5, 0.5];
        for &x in phi.breakpoints() {
            let xs = x / nf;
            if xs > -0.5 && xs < 0.5 {
                candidates.push(xs);
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.dedup();
        let h = 1e-7;
        let mut expected = 2; // the two endpoints
        for &x in &candidates[1..candidates.len() - 1] {
            let left = (psi(x) - psi(x - h)) / h;
            let right = (psi(x + h) - psi(x)) / h;
            if (left - right).abs() > 1e-6 {
                expected += 1;
            }
        }
        let t = build_template(phi, 0.5, n, 0.4).unwrap();
        assert_eq!(t.graph().len(), expected);
    }

    #[test]
    fn slope_violation_detected() {
        let phi = tent_phi(0.25, 0.2); // slope 0.8
        match build_template(phi, 0.5, 8, 0.4) {
            Err(TemplateError::SlopeViolation { .. }) => {}
            other => panic!("expected slope violation, got {other:?}"),
        }
    }

    #[test]
    fn clearance_violation_detected() {
        // Tall bump against a shallow cone: the apex pokes within b/100 of
        // the upper cone boundary.
        let phi = tent_phi(0.45, 0.199);
        match build_template(phi, 0.5, 1, 0.2) {
            Err(TemplateError::ClearanceViolation { .. }) => {}
            other => panic!("expected clearance violation, got {other:?}"),
        }
    }

    #[test]
    fn support_violation_detected() {
        let phi = PiecewiseLinear::new(&[(-0.5, 0.0), (0.0, 0.2), (0.5, 0.0)]).unwrap();
        match build_template(phi, 0.5, 8, 0.4) {
            Err(TemplateError::InvalidSupport(..)) => {}
            other => panic!("expected support violation, got {other:?}"),
        }
    }
}
