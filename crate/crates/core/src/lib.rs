//! Vine-copula regression for gridded panel data.
//!
//! Numerical modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision used by the pipeline.

pub mod copula;
pub mod dependence;
pub mod dvine;
pub mod error;
pub mod format;
pub mod marginals;
pub mod optimize;
pub mod pipeline;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod scalar;
pub mod special;
pub(crate) mod vine;
pub mod yvine;

pub use copula::{FamilyId, FamilyKind, HFunc, PairCopula, Rotation, UPair};
pub use dvine::{fit_dvine, ConditioningVector, DVineModel};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use yvine::{fit_yvine, BivariateEval, Response, YVineModel};

pub type PairCopulaF64 = PairCopula<f64>;
pub type PairCopulaF32 = PairCopula<f32>;
pub type DVineModelF64 = DVineModel<f64>;
pub type DVineModelF32 = DVineModel<f32>;
pub type YVineModelF64 = YVineModel<f64>;
pub type YVineModelF32 = YVineModel<f32>;
