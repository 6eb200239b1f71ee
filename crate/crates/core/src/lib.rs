//! Routing-topology inference from end-to-end path delays.
//!
//! Path delays are modelled as `V = R U`: each monitor path's delay is the
//! sum of independent link delays along it. Common cumulants of path sets
//! (estimated from delay samples) are the superset sums of exact cumulants,
//! whose support is the set of routing-matrix columns. Mobius inversion over
//! the subset lattice recovers the exact cumulants and hence `R`.
//!
//! - [`lattice`]: path sets, multi-indices, Mobius transforms and inversion matrices.
//! - [`cumulants`]: analytic and sample cumulants, resampling and the nonzero test.
//! - [`netmodel`]: topologies, routing, scenario generation and delay sampling.
//! - [`mia`]: full-lattice inference, from exact cumulants or from a sample.
//! - [`sparse`]: bounding topologies and the lasso-based sparse pipeline.
//! - [`solver`]: the generalized-lasso solver used by [`sparse`].
//! - [`eval`]: scoring, grid search and experiment campaigns.

pub mod cumulants;
pub mod eval;
pub mod error;
pub mod io;
pub mod lattice;
pub mod mia;
pub mod netmodel;
pub mod sparse;
pub mod solver;

pub use error::{Error, Result};
pub use lattice::{CumulantVector, MultiIndex, PathSet};
pub use netmodel::{RoutingMatrix, Scenario, Topology};
