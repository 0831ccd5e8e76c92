//! Marked and conditional determinantal point processes on finite ground
//! sets and quadrature discretizations.
//!
//! Every continuum object is represented by its Nyström discretization: a
//! [`GroundSpace`] carries nodes and positive quadrature weights, and a
//! [`Kernel`] acts on node functions by weighted summation,
//! `(K f)_i = Σ_j K_ij w_j f_j`. On such a space the Palm kernel, the
//! conditional kernels given an observed (mark one) configuration, Janossy
//! densities and Fredholm determinants are finite matrix computations, and
//! [`oracle`] verifies them by exhaustive enumeration on tiny spaces.

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airy;
pub mod conditioning;
pub mod error;
pub mod ground;
pub mod integrable;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod sampler;

pub use conditioning::{ConditionalKernel, PalmContext};
pub use error::{DppError, Result};
pub use ground::{Configuration, DomainTag, GroundSpace, MarkedConfiguration, Marking, Scheme};
pub use integrable::{IntegrableKernel, RationalDressing};
pub use kernels::{Kernel, OpeData, OpeKind};
pub use linalg::{CMat, C64};
pub use oracle::{MarkedTable, TabulatedProcess};
pub use sampler::{SampleBatch, Statistic};
