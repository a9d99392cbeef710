//! Marginal MCMC for mixture models driven by sigma-stable Poisson-Kingman
//! random probability measures, with the exact partition-law machinery
//! (Gibbs-type EPPFs and predictive urns) used to validate the sampler.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// A failed chain hands back its partial trace by value.
#![allow(clippy::result_large_err)]

pub mod categorical;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod likelihoods;
pub mod partitions;
pub mod quadrature;
pub mod sampler;
pub mod slice;
pub mod stable;
pub mod stats;
pub mod tilting;
pub mod trace;

pub use error::{Error, Result};
pub use likelihoods::{ClusterParams, LikelihoodModel};
pub use partitions::Partition;
pub use quadrature::QuadratureConfig;
pub use stable::StableIndex;
pub use tilting::TiltingFunction;
