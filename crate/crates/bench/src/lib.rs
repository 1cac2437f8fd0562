//! Workloads shared by the criterion benches.

use thetaforge::cluster::{build_cluster_diagram, ClusterDiagram, ClusterFlavor, Seed};
use thetaforge::dtwall::kronecker_setup;
use thetaforge::{QDiagram, Result};

/// Initial two-line diagram `EE(-z^{v1})`, `EE(-z^{v2})` with `omega(v1, v2) = n`.
pub fn kronecker_initial(n: i64, k: u32) -> Result<QDiagram> {
    kronecker_setup(n, 0, 0, k)
}

/// The same diagram, completed to order `k`.
pub fn kronecker_complete(n: i64, k: u32) -> Result<QDiagram> {
    kronecker_initial(n, k)?.complete(k)
}

/// A-type cluster diagram of the Kronecker seed with `b12 = n`.
pub fn kronecker_cluster(n: i64, k: u32) -> Result<ClusterDiagram> {
    build_cluster_diagram(&Seed::kronecker(n)?, ClusterFlavor::A, k)
}
