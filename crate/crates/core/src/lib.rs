//! Exact finite-order quantum scattering diagrams in rank two, broken lines
//! and theta functions, quantum cluster mutations, and refined DT invariants.
//!
//! All arithmetic is exact: coefficients are Laurent polynomials in `t` (with
//! rational exponents when the skew form is fractional) over the integers or
//! the rationals, and series are truncated at a fixed order in the generators
//! of the cone.

pub mod brokenlines;
pub mod cluster;
pub mod dtwall;
pub mod error;
pub mod laurent;
pub mod lattice;
pub mod qtorus;
pub mod scattering;

pub use brokenlines::{theta, ThetaExpansion};
pub use cluster::{build_cluster_diagram, mutate_diagram, ClusterDiagram, ClusterFlavor, Seed};
pub use dtwall::{extract_dt, kronecker_setup, DTReport};
pub use error::{Error, Result};
pub use laurent::{LaurentPoly, QLaurent};
pub use lattice::{LatticeVec, QLattice};
pub use scattering::QDiagram;
