//! Numerical laboratory for planar snowflake domains and the p-Laplace
//! boundary measures they carry.
//!
//! The crate builds snowflake boundary chains by blip iteration, meshes the
//! resulting domains, solves p-Laplace Dirichlet problems by regularized
//! energy minimization, extracts the boundary Riesz measure, and runs
//! dimension and flatness diagnostics on the result.

pub mod chain;
pub mod dimension;
pub mod enlarge;
pub mod experiment;
pub mod measure;
pub mod mesh;
pub mod plaplace;
pub mod sparse;
pub mod flatness;
pub mod geom;
pub mod template;
pub mod window;
pub mod wolff;

pub use chain::{generate_snowflake, BoundaryChain, Face, SubdivisionLimits};
pub use flatness::{adr_ratio, corkscrew_point, hausdorff_distance, reifenberg_delta};
pub use geom::{PiecewiseLinear, Point};
pub use template::{build_template, BlipTemplate};
pub use mesh::{refine, triangulate, BoundaryMarker, MarkedPolygon, TriMesh};
pub use dimension::{dimension_spectrum, local_dimension, DimensionEstimate};
pub use measure::{riesz_weights, BoundaryMeasure};
pub use plaplace::{solve, DirichletProblem, PSolution, SolveOptions};
