//! Avoidability analysis of ball collections for isotropic unimodal Lévy
//! processes.
//!
//! A collection of pairwise disjoint closed balls is *avoidable* for a
//! transient process when the process started at the origin escapes to
//! infinity without hitting any ball with positive probability. This crate
//! decides avoidability through convergence tests on capacity-weighted
//! series and integrals, backed by Green-function envelopes derived from the
//! characteristic exponent, and cross-validates the underlying
//! hitting-probability estimates with a Monte Carlo path engine.
//!
//! Module map:
//! - [`exponents`]: characteristic exponents ψ and their scaling certificates
//! - [`green`]: Green functions, ball capacities, hitting envelopes
//! - [`geometry`]: ball families, separation checks, Whitney cubes
//! - [`criteria`]: the avoidability classifiers (series / integral / Wiener)
//! - [`simulate`]: Monte Carlo hitting, overshoot and escape estimators
//! - [`poisson`]: Poissonian ball collections and the percolation integral
//! - [`scenario`]: declarative experiment configs and run artifacts

pub mod criteria;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod green;
pub mod interval;
pub mod poisson;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod simulate;

pub use criteria::{AvoidabilityVerdict, Classification, RadiusSchedule, SeriesVerdict, Verdict};
pub use error::Error;
pub use exponents::{BernsteinSpec, CharacteristicExponent, GridSpec, ScalingReport};
pub use geometry::{Ball, BallFamily, RegularSpec, WhitneyCube};
pub use green::{CapacityEstimate, GreenMode, GreenModel, HittingEnvelope};
pub use interval::Interval;
pub use poisson::{IntensityModel, PoissonRealization};
pub use simulate::{HittingEstimate, SimConfig, StepRule};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
