//! Numerical laboratory for synthetic curvature in metric geometry: concrete
//! model geodesic spaces with exact distances and geodesics, plus verifiers
//! and estimators for concavity/convexity conditions of squared distance
//! functions, two notions of angle with explicit error budgets, strainer
//! coordinate charts, tangent-cone analysis, and dimension/measure
//! estimation.

pub mod chart;
pub mod comparison;
pub mod curvature;
pub mod error;
pub mod measure;
pub mod seed;
pub mod space;
pub mod strainer;
pub mod tangent;

pub use chart::PointChart;
pub use error::{Error, Result};
pub use space::{CurvatureParams, GeodesicSegment, SpaceModel, SpaceSpec};
