//! Reachability analysis for vector addition systems with states (VASS),
//! specialized to dimension two.
//!
//! The library is organized around *linear path schemes*: regular expressions
//! of the shape `α₀ β₁* α₁ ⋯ βₖ* αₖ` over the transitions of a VASS, where the
//! concatenation is a path and each starred segment is a cycle. Reachability
//! witnesses are schemes plus exponent vectors; exponents may be astronomically
//! large while the scheme itself stays short, so certificates are checked with
//! per-cycle feasibility arithmetic instead of unrolling.
//!
//! Module map:
//! - [`core`]: exact model and operational semantics (systems, regions, paths,
//!   schemes, Parikh images), generic over the counter scalar.
//! - [`dioph`]: linear Diophantine inequality/equation systems over naturals,
//!   with explicit solution bounds and the cycle/scheme system constructions.
//! - [`zreach`]: Parikh folding of paths into schemes and Z-reachability.
//! - [`geometry`]: two-dimensional linear and semilinear sets, quadrant
//!   decomposition, zigzag-free scheme extraction.
//! - [`onedim`]: 1-VASS machinery (unary expansion, short runs, single-cycle
//!   witnesses) and the band/belt constructions for two dimensions.
//! - [`flatten`]: the outside-region procedures and the global factorization
//!   that decides 2-VASS reachability through flattening.
//! - [`solver`]: top-level decision procedures (reachability, coverability,
//!   boundedness) and certificate verification.
//! - [`oracle`]: deliberately naive brute-force references used by the test
//!   suites.
//! - [`gen`]: reductions (bounded one-counter automata, digraphs) and instance
//!   generators, including the doubling family with exponential witnesses.
//! - [`format`]: text formats for instances and certificates.

pub mod core;
pub mod dioph;
pub mod format;
pub mod flatten;
pub mod gen;
pub mod geometry;
pub mod onedim;
pub mod oracle;
pub mod solver;
pub mod zreach;

pub use crate::core::{Configuration, LinearPathScheme, Quadrant, Region, Vass};

/// System with machine-integer counters; the working type of the solvers.
pub type Vass64 = Vass<i64>;
/// System with arbitrary-precision counters; used by certificate verification.
pub type VassBig = Vass<num_bigint::BigInt>;
/// Configuration with machine-integer counters.
pub type Config64 = Configuration<i64>;
/// Configuration with arbitrary-precision counters.
pub type ConfigBig = Configuration<num_bigint::BigInt>;
