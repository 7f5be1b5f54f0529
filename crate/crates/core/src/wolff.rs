//! The boundary gradient-entropy integral on perturbed half-plane graph
//! domains: its Taylor structure in the bump amplitude, sign scans across
//! exponents, and the ratio table near p = 2.
//!
//! The half-plane is truncated to a box with Dirichlet data `y` on the
//! artificial boundary. For amplitude sweeps the box is meshed once at zero
//! amplitude and morphed vertically, so integral values vary smoothly in the
//! amplitude and mesh noise cancels in the fits.

use crate::geom::{kahan_sum, PiecewiseLinear, Point};
use crate::mesh::{triangulate, BoundaryMarker, MarkedPolygon, MeshError, TriMesh};
use crate::plaplace::{solve, DirichletProblem, PSolution, SolveError, SolveOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WolffError {
    #[error("invalid graph domain: {0}")]
    SpecViolation(String),
    #[error("quadratic fit too poor: R^2 = {r2}")]
    PoorFit { r2: f64 },
    #[error("mesh folded under morph at amplitude {0}")]
    MorphFold(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A truncated graph domain: the region between the graph of
/// `epsilon * theta_hat` and the lid at height `h`, cut at `|x| <= r_half`.
#[derive(Clone, Debug)]
pub struct GraphDomainSpec {
    pub theta_hat: PiecewiseLinear,
    pub epsilon: f64,
    pub r_half: f64,
    pub height: f64,
    pub p: f64,
}

impl GraphDomainSpec {
    pub fn validate(&self) -> Result<(), WolffError> {
        if !(self.r_half > 0.0 && self.height > 0.0) {
            return Err(WolffError::SpecViolation(format!(
                "truncation box must be positive, got R = {}, H = {}",
                self.r_half, self.height
            )));
        }
        if let Some((lo, hi)) = self.theta_hat.support() {
            if lo <= -self.r_half / 4.0 || hi >= self.r_half / 4.0 {
                return Err(WolffError::SpecViolation(format!(
                    "bump support [{lo}, {hi}] must sit inside (-R/4, R/4) with R = {}",
                    self.r_half
                )));
            }
        }
        if self.epsilon.abs() * self.theta_hat.max_abs() >= self.height / 10.0 {
            return Err(WolffError::SpecViolation(format!(
                "amplitude {} times bump height {} must stay under H/10 = {}",
                self.epsilon,
                self.theta_hat.max_abs(),
                self.height / 10.0
            )));
        }
        if !(self.p > 1.0) {
            return Err(WolffError::SpecViolation(format!("need p > 1, got {}", self.p)));
        }
        Ok(())
    }

    /// The analytic quadratic coefficient of the amplitude expansion:
    /// `a2 = (p-2)/(p-1) * integral of |theta'|^2 / 2`.
    pub fn analytic_a2(&self) -> f64 {
        (self.p - 2.0) / (self.p - 1.0) * self.theta_hat.grad_square_integral() / 2.0
    }
}

/// The boundary polygon of the graph domain at the spec's amplitude, with
/// the bump graph marked `Graph` and the box marked artificial.
pub fn graph_domain(spec: &GraphDomainSpec) -> Result<MarkedPolygon, WolffError> {
    spec.validate()?;
    let (r, h, eps) = (spec.r_half, spec.height, spec.epsilon);
    let mut ring = Vec::new();
    let mut markers = Vec::new();
    ring.push(Point::new(-r, 0.0));
    markers.push(BoundaryMarker::Graph);
    for &x in spec.theta_hat.breakpoints() {
        if x > -r && x < r {
            ring.push(Point::new(x, eps * spec.theta_hat.eval(x)));
            markers.push(BoundaryMarker::Graph);
        }
    }
    ring.push(Point::new(r, 0.0));
    markers.push(BoundaryMarker::ArtificialSide);
    ring.push(Point::new(r, h));
    markers.push(BoundaryMarker::ArtificialTop);
    ring.push(Point::new(-r, h));
    markers.push(BoundaryMarker::ArtificialSide);
    Ok(MarkedPolygon::single(ring, markers))
}

/// The gradient-entropy integral over the graph boundary:
/// `sum of len(e) g^(p-1) log g` with `g` the gradient modulus on the
/// triangle adjacent to each graph edge, floored at `grad_floor`.
/// Returns `(value, clipped_fraction)`.
pub fn wolff_integral(
    solution: &PSolution,
    mesh: &TriMesh,
    grad_floor: f64,
) -> (f64, f64) {
    let mut tri_of_edge: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            tri_of_edge.insert((u.min(v), u.max(v)), t);
        }
    }
    let p = solution.p;
    let mut clipped = 0usize;
    let mut count = 0usize;
    let total = kahan_sum(
        mesh.boundary_edges
            .iter()
            .filter(|e| e.marker == BoundaryMarker::Graph)
            .map(|e| {
                count += 1;
                let t = tri_of_edge[&(e.v0.min(e.v1), e.v0.max(e.v1))];
                let mut g = solution.tri_gradients[t].norm();
                if g < grad_floor {
                    g = grad_floor;
                    clipped += 1;
                }
                let len = mesh.vertices[e.v0].dist(mesh.vertices[e.v1]);
                len * g.powf(p - 1.0) * g.ln()
            }),
    );
    let clipped_fraction = if count == 0 {
        0.0
    } else {
        clipped as f64 / count as f64
    };
    (total, clipped_fraction)
}

/// Default gradient floor for the integrand's logarithm.
pub const GRAD_FLOOR: f64 = 1e-12;

/// First-order far-field of the solution: linearizing the operator at
/// `u = y` gives `v_xx + (p-1) v_yy = 0` with `v = theta` on the line, an
/// anisotropic Poisson extension whose leading term is the monopole
/// `(M / pi) y_s / (x^2 + y_s^2)` with `y_s = y / sqrt(p-1)` and `M` the
/// integral of the bump. Subtracting it from the artificial boundary data
/// removes the `O(eps / R)` truncation artifact that otherwise swamps the
/// quadratic coefficient; for even bumps the next correction is two orders
/// down.
pub fn far_field_data(spec: &GraphDomainSpec, pt: Point) -> f64 {
    let m = bump_mean(&spec.theta_hat);
    let y_s = pt.y / (spec.p - 1.0).sqrt();
    let denom = pt.x * pt.x + y_s * y_s;
    if denom == 0.0 {
        return pt.y;
    }
    pt.y - spec.epsilon * (m / std::f64::consts::PI) * y_s / denom
}

/// Integral of a piecewise linear bump.
pub fn bump_mean(theta: &PiecewiseLinear) -> f64 {
    let xs = theta.breakpoints();
    let ys = theta.values();
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        acc += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
    }
    acc
}

/// Analytic tail of the boundary integral beyond the truncation: to first
/// order the integrand decays like `eps M / (pi sqrt(p-1) x^2)`, so the
/// portion lost outside `|x| <= R` is `-eps 2M / (pi sqrt(p-1) R)` and is
/// added back to every sample.
pub fn integral_tail(spec: &GraphDomainSpec, eps: f64) -> f64 {
    let m = bump_mean(&spec.theta_hat);
    -eps * 2.0 * m / (std::f64::consts::PI * (spec.p - 1.0).sqrt() * spec.r_half)
}

/// Reusable solver for amplitude sweeps over one graph-domain family: the
/// zero-amplitude box is meshed once and morphed vertically per amplitude.
pub struct GraphFamilySolver {
    pub spec: GraphDomainSpec,
    base_mesh: TriMesh,
    h_max: f64,
    grading: f64,
}

impl GraphFamilySolver {
    pub fn new(spec: GraphDomainSpec, h_max: f64, grading: f64) -> Result<Self, WolffError> {
        let flat = GraphDomainSpec {
            epsilon: 0.0,
            ..spec.clone()
        };
        let poly = graph_domain(&flat)?;
        let base_mesh = triangulate(&poly, h_max, grading)?;
        Ok(Self {
            spec,
            base_mesh,
            h_max,
            grading,
        })
    }

    /// Vertical morph of the base mesh: `y += eps theta(x) (1 - y/H)`.
    pub fn morphed_mesh(&self, eps: f64) -> Result<TriMesh, WolffError> {
        let h = self.spec.height;
        let mut mesh = self.base_mesh.clone();
        for v in mesh.vertices.iter_mut() {
            let shift = eps * self.spec.theta_hat.eval(v.x) * (1.0 - v.y / h);
            v.y += shift;
        }
        for t in 0..mesh.triangles.len() {
            if mesh.tri_area(t) <= 0.0 {
                return Err(WolffError::MorphFold(eps));
            }
        }
        Ok(mesh)
    }

    /// Solve at the given amplitude and return the boundary integral sample.
    pub fn integral_at(&self, eps: f64) -> Result<IntegralSample, WolffError> {
        let mesh = self.morphed_mesh(eps)?;
        let spec_eps = GraphDomainSpec {
            epsilon: eps,
            ..self.spec.clone()
        };
        let graph: std::collections::HashSet<usize> = mesh
            .marked_vertices(BoundaryMarker::Graph)
            .into_iter()
            .collect();
        let bc: Vec<(usize, f64)> = mesh
            .boundary_vertices()
            .into_iter()
            .map(|v| {
                if graph.contains(&v) {
                    (v, 0.0)
                } else {
                    (v, far_field_data(&spec_eps, mesh.vertices[v]))
                }
            })
            .collect();
        let solution = solve(
            &DirichletProblem {
                mesh: &mesh,
                p: self.spec.p,
                boundary_data: bc,
                reg_delta: 0.0,
            },
            &SolveOptions::default(),
        )?;
        let (raw, clipped_fraction) = wolff_integral(&solution, &mesh, GRAD_FLOOR);
        Ok(IntegralSample {
            eps,
            value: raw + integral_tail(&self.spec, eps),
            clipped_fraction,
        })
    }

    /// Truncation sensitivity estimate: the change of the integral when the
    /// box is doubled in both directions at the same amplitude.
    pub fn truncation_error(&self, eps: f64) -> Result<f64, WolffError> {
        let here = self.integral_at(eps)?.value;
        let doubled_spec = GraphDomainSpec {
            r_half: 2.0 * self.spec.r_half,
            height: 2.0 * self.spec.height,
            ..self.spec.clone()
        };
        let doubled = GraphFamilySolver::new(doubled_spec, self.h_max, self.grading)?;
        let there = doubled.integral_at(eps)?.value;
        Ok((here - there).abs())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegralSample {
    pub eps: f64,
    pub value: f64,
    pub clipped_fraction: f64,
}

/// Result of the quadratic-cubic fit over a symmetric amplitude grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureFit {
    pub samples: Vec<IntegralSample>,
    /// Coefficient of eps^2; the second derivative at zero is `2 a2`.
    pub a2: f64,
    pub a3: f64,
    pub a2_stderr: f64,
    pub r2: f64,
    pub ddi_zero: f64,
}

/// Fit `I(eps) = a2 eps^2 + a3 eps^3` over the samples (the constant and
/// linear terms vanish identically for the exact problem). Requires at least
/// 5 samples; returns `PoorFit` below R^2 = 0.99.
pub fn fit_curvature(samples: &[IntegralSample]) -> Result<CurvatureFit, WolffError> {
    let fit = fit_curvature_raw(samples)?;
    if fit.r2 < 0.99 {
        return Err(WolffError::PoorFit { r2: fit.r2 });
    }
    Ok(fit)
}

/// The same fit without the R^2 gate. Near p = 2 the true curvature
/// vanishes, the samples are noise-sized, and explained variance stops being
/// informative, but the coefficient magnitudes still are.
pub fn fit_curvature_raw(samples: &[IntegralSample]) -> Result<CurvatureFit, WolffError> {
    if samples.len() < 5 {
        return Err(WolffError::SpecViolation(format!(
            "need at least 5 amplitude samples, got {}",
            samples.len()
        )));
    }
    let (mut s4, mut s5, mut s6) = (0.0, 0.0, 0.0);
    let (mut b2, mut b3) = (0.0, 0.0);
    for s in samples {
        let e2 = s.eps * s.eps;
        let e3 = e2 * s.eps;
        s4 += e2 * e2;
        s5 += e2 * e3;
        s6 += e3 * e3;
        b2 += e2 * s.value;
        b3 += e3 * s.value;
    }
    let det = s4 * s6 - s5 * s5;
    if det.abs() < 1e-300 {
        return Err(WolffError::SpecViolation("degenerate amplitude grid".into()));
    }
    let a2 = (b2 * s6 - b3 * s5) / det;
    let a3 = (s4 * b3 - s5 * b2) / det;
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for s in samples {
        let e2 = s.eps * s.eps;
        let fit = a2 * e2 + a3 * e2 * s.eps;
        ssr += (s.value - fit) * (s.value - fit);
        sst += s.value * s.value;
    }
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let dof = (samples.len() as f64 - 2.0).max(1.0);
    let sigma2 = ssr / dof;
    let a2_var = sigma2 * s6 / det;
    Ok(CurvatureFit {
        samples: samples.to_vec(),
        a2,
        a3,
        a2_stderr: a2_var.max(0.0).sqrt(),
        r2,
        ddi_zero: 2.0 * a2,
    })
}

/// Sweep a symmetric amplitude grid and fit the curvature, with the R^2
/// quality gate.
pub fn ddi_fd(solver: &GraphFamilySolver, eps_grid: &[f64]) -> Result<CurvatureFit, WolffError> {
    let mut samples = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        samples.push(solver.integral_at(eps)?);
    }
    fit_curvature(&samples)
}

/// Sweep without the quality gate (for exponents where the curvature is
/// expected to vanish).
pub fn ddi_fd_raw(solver: &GraphFamilySolver, eps_grid: &[f64]) -> Result<CurvatureFit, WolffError> {
    let mut samples = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        samples.push(solver.integral_at(eps)?);
    }
    fit_curvature_raw(&samples)
}

/// Make a symmetric grid `{±eps, ±3eps/4, ±eps/2}` scaled from a reference
/// amplitude.
pub fn symmetric_grid(eps: f64) -> Vec<f64> {
    let mut g: Vec<f64> = [1.0, 0.75, 0.5]
        .iter()
        .flat_map(|&s| [eps * s, -eps * s])
        .collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignOutcome {
    Positive,
    Negative,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimPrediction {
    /// Dimension below the ambient boundary dimension (I > 0).
    BelowAmbient,
    /// Dimension above the ambient boundary dimension (I < 0).
    AboveAmbient,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignScanRow {
    pub p: f64,
    pub i_value: f64,
    pub truncation_error: f64,
    pub cubic_ok: bool,
    pub sign: SignOutcome,
    pub prediction: DimPrediction,
}

/// Scan the sign of the integral at amplitude `epsilon` across exponents.
///
/// Each row carries the measured integral, the truncation error estimate
/// from box doubling, and the resulting sign call: ambiguous when the value
/// is within three truncation errors of zero, or when the cubic term rivals
/// the quadratic one on the fitted expansion.
pub fn sign_scan(
    base: &GraphDomainSpec,
    p_list: &[f64],
    epsilon: f64,
    h_max: f64,
    grading: f64,
) -> Result<Vec<SignScanRow>, WolffError> {
    let mut rows = Vec::new();
    for &p in p_list {
        let spec = GraphDomainSpec {
            p,
            epsilon,
            ..base.clone()
        };
        let solver = GraphFamilySolver::new(spec, h_max, grading)?;
        let fit = ddi_fd_raw(&solver, &symmetric_grid(epsilon))?;
        let cubic_ok = (fit.a3 * epsilon.powi(3)).abs() < 0.5 * (fit.a2 * epsilon * epsilon).abs();
        let i_value = solver.integral_at(epsilon)?.value;
        let trunc = solver.truncation_error(epsilon)?;
        let sign = if i_value > 3.0 * trunc {
            SignOutcome::Positive
        } else if i_value < -3.0 * trunc {
            SignOutcome::Negative
        } else {
            SignOutcome::Ambiguous
        };
        let sign = if cubic_ok { sign } else { SignOutcome::Ambiguous };
        let prediction = match sign {
            SignOutcome::Positive => DimPrediction::BelowAmbient,
            SignOutcome::Negative => DimPrediction::AboveAmbient,
            SignOutcome::Ambiguous => DimPrediction::Inconclusive,
        };
        rows.push(SignScanRow {
            p,
            i_value,
            truncation_error: trunc,
            cubic_ok,
            sign,
            prediction,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub p: f64,
    pub i_tilde: f64,
    pub ratio_to_p2: Option<f64>,
    pub conclusive: bool,
}

/// Ratio table of the fixed-graph integral across a p-grid against its
/// value at p = 2. Rows are inconclusive when the p = 2 value is not
/// distinguishable from its truncation error bar.
pub fn ratio_in_p(
    base: &GraphDomainSpec,
    p_grid: &[f64],
    h_max: f64,
    grading: f64,
) -> Result<Vec<RatioRow>, WolffError> {
    let spec2 = GraphDomainSpec {
        p: 2.0,
        ..base.clone()
    };
    let solver2 = GraphFamilySolver::new(spec2, h_max, grading)?;
    let i2 = solver2.integral_at(base.epsilon)?.value;
    let err2 = solver2.truncation_error(base.epsilon)?;
    let p2_conclusive = i2.abs() > err2;
    let mut rows = Vec::new();
    for &p in p_grid {
        if (p - 2.0).abs() < 1e-12 {
            rows.push(RatioRow {
                p,
                i_tilde: i2,
                ratio_to_p2: Some(1.0),
                conclusive: p2_conclusive,
            });
            continue;
        }
        let spec = GraphDomainSpec {
            p,
            ..base.clone()
        };
        let solver = GraphFamilySolver::new(spec, h_max, grading)?;
        let i_p = solver.integral_at(base.epsilon)?.value;
        rows.push(RatioRow {
            p,
            i_tilde: i_p,
            ratio_to_p2: if p2_conclusive { Some(i_p / i2) } else { None },
            conclusive: p2_conclusive,
        });
    }
    Ok(rows)
}

/// Full report bundle for the amplitude study at one exponent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WolffReport {
    pub format_version: u32,
    pub p: f64,
    pub fit: CurvatureFit,
    pub analytic_a2: f64,
    pub sign_table: Vec<SignScanRow>,
    pub ratio_table: Vec<RatioRow>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_tent() -> PiecewiseLinear {
        PiecewiseLinear::tent(-6.0, 6.0, 1.0, 1.0)
    }

    fn tent_spec(p: f64, eps: f64) -> GraphDomainSpec {
        GraphDomainSpec {
            theta_hat: unit_tent(),
            epsilon: eps,
            r_half: 6.0,
            height: 6.0,
            p,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(tent_spec(3.0, 0.05).validate().is_ok());
        // Support too wide.
        let bad = GraphDomainSpec {
            theta_hat: PiecewiseLinear::tent(-6.0, 6.0, 2.0, 1.0),
            epsilon: 0.05,
            r_half: 6.0,
            height: 6.0,
            p: 3.0,
        };
        assert!(matches!(bad.validate(), Err(WolffError::SpecViolation(_))));
        // Amplitude too large for the lid.
        let tall = GraphDomainSpec {
            epsilon: 0.7,
            ..tent_spec(3.0, 0.05)
        };
        assert!(matches!(tall.validate(), Err(WolffError::SpecViolation(_))));
    }

    #[test]
    fn analytic_a2_of_unit_tent() {
        // Unit tent on [-1, 1]: integral of slope^2 is 2.
        let spec = tent_spec(3.0, 0.05);
        assert_relative_eq!(spec.theta_hat.grad_square_integral(), 2.0);
        assert_relative_eq!(spec.analytic_a2(), 0.5);
        let spec15 = tent_spec(1.5, 0.05);
        assert_relative_eq!(spec15.analytic_a2(), -1.0);
    }

    #[test]
    fn zero_amplitude_rectangle() {
        let spec = tent_spec(3.0, 0.0);
        let poly = graph_domain(&spec).unwrap();
        // Rectangle [-R, R] x [0, H] up to the inserted breakpoints on the
        // flat bottom.
        assert!(poly.rings[0].iter().all(|p| p.y == 0.0 || p.y == 6.0));
        assert_relative_eq!(poly.area(), 72.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_amplitude_integral_vanishes() {
        // The affine solution is exact, |grad u| = 1 on every triangle, and
        // the integrand log 1 = 0.
        let spec = tent_spec(3.0, 0.0);
        let solver = GraphFamilySolver::new(spec, 1.0, 4.0).unwrap();
        let s = solver.integral_at(0.0).unwrap();
        assert!(s.value.abs() <= 1e-10, "I(0) = {}", s.value);
        assert_eq!(s.clipped_fraction, 0.0);
    }

    #[test]
    fn polygon_simple_for_admissible_amplitudes() {
        for eps in [-0.5, -0.1, 0.1, 0.5] {
            let spec = tent_spec(3.0, eps);
            let poly = graph_domain(&spec).unwrap();
            // Triangulation validates simplicity internally.
            assert!(triangulate(&poly, 1.5, 1.0).is_ok(), "eps = {eps}");
        }
    }

    #[test]
    fn fit_recovers_synthetic_curve() {
        let samples: Vec<IntegralSample> = symmetric_grid(0.08)
            .iter()
            .map(|&e| IntegralSample {
                eps: e,
                value: 0.5 * e * e - 0.3 * e * e * e,
                clipped_fraction: 0.0,
            })
            .collect();
        let fit = fit_curvature(&samples).unwrap();
        assert_relative_eq!(fit.a2, 0.5, max_relative = 1e-10);
        assert_relative_eq!(fit.a3, -0.3, max_relative = 1e-10);
        assert!(fit.a2_stderr < 1e-10);
    }

    #[test]
    fn fit_rejects_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<IntegralSample> = symmetric_grid(0.08)
            .iter()
            .map(|&e| IntegralSample {
                eps: e,
                value: rng.gen_range(-1.0..1.0),
                clipped_fraction: 0.0,
            })
            .collect();
        assert!(matches!(
            fit_curvature(&samples),
            Err(WolffError::PoorFit { .. })
        ));
    }
}
