//! Random local functions and a search-to-decision reduction for them.
//!
//! A random local function applies a fixed `d`-ary predicate to `d` input
//! bits selected by each hyperedge of a random hypergraph. This crate
//! provides the building blocks (predicates, hypergraphs, planted and null
//! instances), the hybrid/predictor/amplification pipeline that turns a
//! distinguisher into a secret-recovery algorithm, and the statistics needed
//! to check the finite-size behaviour of every step.
//!
//! Numeric routines that have an exact counterpart are generic over
//! [`Scalar`], implemented for `f32`, `f64` and [`Exact`] (arbitrary
//! precision rationals). The aliases below fix the common instantiations.
//!
//! Vertex indices are 0-based throughout; bit index 0 of a secret is the
//! reference bit against which the reduction recovers all other bits.

pub mod cli;
pub mod distinguish;
pub mod error;
pub mod exec;
pub mod hypergraph;
pub mod localfn;
pub mod predicate;
pub mod reduction;
pub mod scalar;
pub mod stats;

pub use distinguish::{AdvantageReport, Distinguisher};
pub use error::{Error, Result};
pub use exec::{Exec, Stream, Streams};
pub use hypergraph::{GraphFamily, Hypergraph, Permutation, SwapVector, Vertex};
pub use localfn::{Instance, InstanceKind, OutputModel, Secret, SecretOracle};
pub use predicate::{CorrelationOrder, NoisyPredicate, Predicate};
pub use reduction::{ReductionConfig, SearchOutcome};
pub use scalar::Scalar;

/// Arbitrary precision rational used for exact probability bookkeeping.
pub type Exact = num_rational::BigRational;

/// Fourier/bias profile in double precision.
pub type Profile = predicate::PredicateProfile<f64>;
/// Fourier/bias profile with exact dyadic coefficients.
pub type ExactProfile = predicate::PredicateProfile<Exact>;

/// L2 deviation trace in double precision.
pub type Trace = hypergraph::DeviationTrace<f64>;
/// L2 deviation trace with exact rational entries.
pub type ExactTrace = hypergraph::DeviationTrace<Exact>;

/// Finite distribution over `K` with `f64` masses.
pub type Distribution<K> = stats::FiniteDistribution<K, f64>;
/// Finite distribution over `K` with exact rational masses.
pub type ExactDistribution<K> = stats::FiniteDistribution<K, Exact>;
