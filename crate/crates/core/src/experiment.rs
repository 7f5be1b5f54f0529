//! End-to-end pipelines: snowflake window solves, the flat control, and the
//! sign-to-dimension dichotomy experiment.

use crate::chain::{generate_snowflake, BoundaryChain, ChainError, SubdivisionLimits};
use crate::dimension::{dimension_spectrum, DimensionEstimate, DimensionError};
use crate::measure::{riesz_weights, BoundaryMeasure, MeasureError};
use crate::mesh::{triangulate, MeshError, TriMesh};
use crate::plaplace::{solve, DirichletProblem, PSolution, SolveError, SolveOptions};
use crate::template::BlipTemplate;
use crate::window::{window_boundary_data, window_polygon};
use crate::wolff::{sign_scan, DimPrediction, GraphDomainSpec, SignScanRow, WolffError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Wolff(#[from] WolffError),
    #[error("sign scan inconclusive at p = {0}; dichotomy undefined")]
    InconclusiveSign(f64),
}

/// Parameters of one window solve plus spectrum extraction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowParams {
    pub top: f64,
    pub h_max: f64,
    pub grading: f64,
    pub p: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Local-dimension window as multiples of the boundary mesh size and of
    /// the window diameter.
    pub r_min_factor: f64,
    pub r_max_frac: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            top: 1.0,
            h_max: 0.06,
            grading: 40.0,
            p: 3.0,
            n_samples: 64,
            seed: 7,
            r_min_factor: 4.0,
            r_max_frac: 0.1,
        }
    }
}

impl WindowParams {
    pub fn h_graph(&self) -> f64 {
        self.h_max / self.grading.max(1.0)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min_factor * self.h_graph()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max_frac
    }
}

/// Everything produced by one window run.
pub struct WindowRun {
    pub mesh: TriMesh,
    pub solution: PSolution,
    pub measure: BoundaryMeasure,
    pub spectrum: DimensionEstimate,
}

/// Mesh the window over a chain, solve the Dirichlet problem with zero data
/// on the graph and height data on the artificial boundary, extract the
/// boundary measure, and sample its local-dimension spectrum.
pub fn run_window(chain: &BoundaryChain, params: &WindowParams) -> Result<WindowRun, ExperimentError> {
    let poly = window_polygon(chain, params.top);
    let mesh = triangulate(&poly, params.h_max, params.grading)?;
    let bc = window_boundary_data(&mesh);
    let solution = solve(
        &DirichletProblem {
            mesh: &mesh,
            p: params.p,
            boundary_data: bc,
            reg_delta: 0.0,
        },
        &SolveOptions::default(),
    )?;
    let measure = riesz_weights(&solution, &mesh)?;
    let spectrum = dimension_spectrum(
        &measure,
        params.n_samples,
        params.seed,
        params.r_min(),
        params.r_max(),
    )?;
    Ok(WindowRun {
        mesh,
        solution,
        measure,
        spectrum,
    })
}

/// The flat control: the same pipeline over the unperturbed unit face. Its
/// spectrum calibrates the estimator's error bar.
pub fn flat_control(params: &WindowParams) -> Result<WindowRun, ExperimentError> {
    run_window(&BoundaryChain::unit_face(), params)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: u32,
    pub chain_vertices: usize,
    pub mean_local_dim: f64,
    pub std_local_dim: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub p: f64,
    pub sign_row: SignScanRow,
    pub flat_mean: f64,
    pub flat_std: f64,
    pub rows: Vec<GenerationRow>,
    /// Whether the deepest generation deviates from the flat mean on the
    /// side predicted by the sign of the integral, beyond twice the flat
    /// control's spread.
    pub consistent: bool,
}

/// The dichotomy experiment: verify the sign of the integral is conclusive,
/// build snowflake approximants from the template, and track the mass
/// weighted mean local dimension across generations against the flat
/// control band.
#[allow(clippy::too_many_arguments)]
pub fn dichotomy_experiment(
    template: &BlipTemplate,
    spec: &GraphDomainSpec,
    p: f64,
    generations: u32,
    limits: SubdivisionLimits,
    params: &WindowParams,
    scan_h: f64,
    scan_grading: f64,
) -> Result<DichotomyReport, ExperimentError> {
    let rows = sign_scan(spec, &[p], spec.epsilon, scan_h, scan_grading)?;
    let sign_row = rows.into_iter().next().expect("one row per p");
    if sign_row.prediction == DimPrediction::Inconclusive {
        return Err(ExperimentError::InconclusiveSign(p));
    }

    let mut wp = params.clone();
    wp.p = p;
    let flat = flat_control(&wp)?;

    let mut out_rows = Vec::new();
    for gen in 1..=generations {
        let chain = generate_snowflake(template, gen, limits)?;
        let run = run_window(&chain, &wp)?;
        out_rows.push(GenerationRow {
            generation: gen,
            chain_vertices: chain.vertices.len(),
            mean_local_dim: run.spectrum.mu_weighted_mean,
            std_local_dim: run.spectrum.mu_weighted_std,
        });
    }

    let last = out_rows.last().expect("at least one generation");
    let band = 2.0 * flat.spectrum.mu_weighted_std;
    let consistent = match sign_row.prediction {
        DimPrediction::BelowAmbient => last.mean_local_dim < flat.spectrum.mu_weighted_mean - band,
        DimPrediction::AboveAmbient => last.mean_local_dim > flat.spectrum.mu_weighted_mean + band,
        DimPrediction::Inconclusive => false,
    };
    Ok(DichotomyReport {
        p,
        sign_row,
        flat_mean: flat.spectrum.mu_weighted_mean,
        flat_std: flat.spectrum.mu_weighted_std,
        rows: out_rows,
        consistent,
    })
}
