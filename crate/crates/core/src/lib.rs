//! Seeded Ising model of binary iris templates.
//!
//! A template half is a `rows x cols` lattice of `+-1` spins with open
//! vertical and circular horizontal boundaries. Given a seed (spin values
//! pinned on a subset of cells), the model is the Ising Gibbs law restricted
//! to templates that agree with the seed; a Metropolis chain samples it and a
//! majority vote over chain snapshots reconstructs a template from the seed.
//!
//! Modules:
//! - [`lattice`]: geometry, templates, seeds, Hamming matching
//! - [`sampler`]: the model and its Metropolis chain
//! - [`reconstruct`]: seed extraction and majority-vote reconstruction
//! - [`analysis`]: distance statistics, binomial degrees of freedom, grid search
//! - [`oracle`]: exact enumeration on small lattices
//! - [`io`]: template files and CSV output
//! - [`experiments`]: the experiment recipes driven by the command line tool

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod oracle;
pub mod reconstruct;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use lattice::{
    hamming_distance, hamming_distance_min_rotation, DisagreementCounts, FullTemplate,
    LatticeGeometry, Seed, Spin, TemplatePart,
};
pub use reconstruct::{SeedFraction, SeedSpec};
pub use sampler::{Chain, IsingParams, RecordingSchedule};
