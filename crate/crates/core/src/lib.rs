//! Sampling-free Bayesian inversion and filtering on polynomial chaos expansions.
//!
//! Random vectors are represented by their coefficients in the multivariate
//! probabilists' Hermite basis of an independent standard-Gaussian germ.
//! Bayesian updates are computed as conditional-expectation maps of
//! selectable polynomial degree acting directly on those coefficients:
//! degree 1 is the Gauss-Markov-Kalman filter, degree 2 the quadratic update,
//! and an arbitrary function dictionary gives a general Galerkin update.
//!
//! All numerics are generic over [`Real`] (implemented for `f32` and `f64`);
//! the `*64` aliases below fix the scalar to `f64`.

pub mod error;
pub mod filter;
pub mod hermite;
pub mod index;
pub mod instances;
pub mod linalg;
pub mod models;
pub mod moments;
pub mod oracle;
pub mod pce;
pub mod quadrature;
pub mod scalar;
pub mod structure;
pub mod update;

pub use error::{Error, Result, Warning};
pub use index::{IndexSet, MultiIndex};
pub use moments::{MomentCache, SymTensor};
pub use pce::PceVector;
pub use scalar::Real;
pub use structure::StructureTable;
pub use update::{BasisDictionary, GeneralMap, GramSystem, PolyMap};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type PceVector64 = pce::PceVector<f64>;
pub type PceVector32 = pce::PceVector<f32>;
pub type SymTensor64 = moments::SymTensor<f64>;
pub type PolyMap64 = update::PolyMap<f64>;
pub type GeneralMap64 = update::GeneralMap<f64>;
pub type GramSystem64 = update::GramSystem<f64>;
pub type TrackingState64 = filter::TrackingState<f64>;
