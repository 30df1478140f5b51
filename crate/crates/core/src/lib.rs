//! Certified reduced-basis methods for affinely parametrized, coercive,
//! compliant elliptic problems.
//!
//! The crate covers the whole offline/online pipeline:
//!
//! * [`assembly`] builds a structured P1 discretization of the unit square
//!   and the parameter-independent operator blocks of the thermal block.
//! * [`problem`] holds the affine problem, its coefficient expressions and
//!   parameter sampling.
//! * [`truth`] solves the full-order system and computes exact discrete
//!   stability constants for validation.
//! * [`pod`] and [`greedy`] compress snapshots into an X-orthonormal basis.
//! * [`reduced`] performs the Galerkin projection and the online solve.
//! * [`certify`] evaluates residual dual norms and the error estimators.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats, persistence and the command line live in the
//! `romkit` crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod assembly;
pub mod basis;
pub mod certify;
mod error;
pub mod fingerprint;
pub mod greedy;
pub mod pod;
pub mod problem;
pub mod reduced;
pub mod sparse;
pub mod theta;
pub mod truth;

pub use error::{Error, Result};

pub use assembly::{build_mesh, DofMap, Mesh};
pub use basis::{BasisProvenance, ReducedBasis};
pub use certify::{Certificate, EffectivityReport, ResidualData, StabilityBounds};
pub use greedy::{GreedyHistory, GreedyOptions, StoppingReason};
pub use pod::{PodSpectrum, SnapshotSet};
pub use problem::{AffineProblem, ParameterDomain, ParameterPoint, Scale};
pub use reduced::{RbSolution, ReducedModel};
pub use sparse::CsrMatrix;
pub use theta::ThetaExpression;
pub use truth::{StabilityConstants, TruthSolution};
