//! Numerical workbench for the circle-stability construction of positive
//! scalar curvature metrics.

pub mod config;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod forcing;
pub mod grid;
pub mod metric;
pub mod normal;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use conformal::{Certificate, CertificateSummary, ConformalFactors, SliceGeometry};
pub use curvature::{scalar_curvature, CurvatureBundle};
pub use error::{Error, Result};
pub use grid::{
    build_domain, c1_norm, lp_norm, Backend, DiscreteDomain, DomainSpec, Grid, ScalarField,
    VectorField,
};
pub use metric::{product_extend, AnalyticMetric, AnalyticScalar, Jet, MetricField};
pub use normal::{check_angle_condition, AngleSummary, NormalFrame};
pub use report::emit_report;
pub use scenario::{run_scenario, RunOutcome, RunReport, Stage};
pub use sparse::SolverSettings;
