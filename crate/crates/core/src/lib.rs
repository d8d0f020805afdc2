//! Priors over well-ordered stochastic matrices and the state-space models
//! built on them.
//!
//! The library provides three prior families over row-stochastic matrices —
//! the sorted stick-breaking **OMD**, the row-wise independent Dirichlet
//! **SMD**, and the band-restricted **BMD** — together with:
//!
//! * a hidden Markov model over ordinal actions ([`hmm`]),
//! * a dynamic Poisson Tucker decomposition for dyadic event-count tensors
//!   ([`dpt`]),
//! * an adaptive random-walk Metropolis sampler (HMC optional) operating on
//!   an unconstrained reparameterization of all model parameters
//!   ([`sampler`], [`transforms`], [`targets`]),
//! * synthetic ground-truth generators, train/test splitting, MAE and SPPD
//!   metrics, and experiment orchestration ([`eval`]),
//! * Goldstein-ordered action codebook handling and event-record ingestion
//!   into sparse count tensors ([`events`]).
//!
//! All samplers take explicitly seeded random streams and are reproducible
//! bit-for-bit given the same seed.

pub mod assignment;
pub mod dpt;
pub mod error;
pub mod eval;
pub mod events;
pub mod hmm;
pub mod io;
pub mod matrix;
pub mod numerics;
pub mod priors;
pub mod sampler;
pub mod seeds;
pub mod stats;
pub mod targets;
pub mod transforms;

pub use error::{Error, Result};
pub use matrix::{BandSpec, ConcentrationVector, StickVariates, StochasticMatrix};
pub use priors::{sample_bmd, sample_omd, sample_smd, MatrixPrior, PriorConfig};
