//! Interacting-particle kinetic Langevin dynamics on periodic boxes, the
//! canonical Gibbs ensembles they leave invariant, and the estimation and
//! verification machinery around them: certified lattice sums, exact
//! small-system quadrature, Metropolis sampling, correlation functions and
//! their uniform bounds, configuration-space metrics, the K-transform
//! calculus, martingale and quadratic-variation diagnostics, and a growing-
//! box experiment harness.
//!
//! Capabilities are demonstrated one per file in `examples/`; the thin
//! `langebox` binary exposes the same pipelines as subcommands.

pub mod configspace;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod gibbs;
pub mod harness;
pub mod observables;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
