//! Attractor structure of non-autonomous cooperative Lotka–Volterra systems.
//!
//! The crate checks the coefficient conditions that guarantee permanence or
//! extinction, computes the complete bounded trajectories by pullback
//! integration, certifies exponential dichotomies of the linearizations and
//! assembles the graph of heteroclinic connections between those
//! trajectories.

pub mod conditions;
pub mod dichotomy;
pub mod expr;
pub mod json;
pub mod model;
pub mod odeint;
pub mod skeleton;
pub mod specfile;
pub mod trajectories;

pub use conditions::{ConditionKind, ConditionReport, Verdict, Witness};
pub use expr::TimeFn;
pub use model::{SupportSet, SystemSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Condition(#[from] conditions::ConditionError),
    #[error(transparent)]
    Integration(#[from] odeint::IntegrationError),
    #[error(transparent)]
    Trajectory(#[from] trajectories::TrajectoryError),
    #[error(transparent)]
    Dichotomy(#[from] dichotomy::DichotomyError),
    #[error(transparent)]
    Skeleton(#[from] skeleton::SkeletonError),
    #[error(transparent)]
    SpecFile(#[from] specfile::SpecFileError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
