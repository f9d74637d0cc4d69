//! Numerical and sampled-symbolic tools for the equation of motion
//! `Dγ̇/dt = F(γ̇) + X` on Riemannian and Lorentzian manifolds, where `F` is
//! a (1,1) tensor field and `X` a vector field, possibly `X = −∇V`.
//!
//! The crate integrates solutions maximally, monitors energy and Killing
//! charge along them, and checks sufficient conditions for completeness on
//! sampled points. Everything numeric is generic over [`Real`] (`f32`, `f64`);
//! the aliases at the crate root fix the scalar to `f64`.

pub mod catalog;
pub mod criteria;
pub mod dynamics;
pub mod exprlang;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod sampling;
pub mod scalar;

use thiserror::Error;

pub use catalog::{builtin, builtin_names, load, save, Scenario};
pub use criteria::{check, check_lorentzian, check_riemannian, CriteriaConfig, CriterionReport, Prediction, Verdict};
pub use dynamics::{
    integrate_maximal, Classification, Dynamics, IntegrationConfig, TrajectoryResult, TrajectoryState,
};
pub use exprlang::{CoordinateFrame, Expression};
pub use fields::FieldPack;
pub use geometry::{ChartDomain, ManifoldSpec, QuotientSpec, Signature};
pub use sampling::{SampleSet, SamplingConfig};
pub use scalar::Real;

pub type State = TrajectoryState<f64>;
pub type State32 = TrajectoryState<f32>;
pub type Trajectory = TrajectoryResult<f64>;
pub type Trajectory32 = TrajectoryResult<f32>;
pub type Metric = linalg::Matrix<f64>;
pub type Christoffel = geometry::Christoffel<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] exprlang::ParseError),
    #[error(transparent)]
    Frame(#[from] exprlang::FrameError),
    #[error(transparent)]
    Eval(#[from] exprlang::EvalError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Fields(#[from] fields::FieldsError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Scenario(#[from] catalog::ScenarioError),
}
