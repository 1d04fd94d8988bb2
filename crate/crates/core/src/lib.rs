//! First-passage percolation on finite boxes of `Z^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: boxes, edge ids and seeded i.i.d. weight fields.
//! * [`passage`]: the label-setting shortest-path engine (`T(x, S)` and geodesics).
//! * [`geostruct`]: geodesic trees, eta fields, coalescence and competition partitions.
//! * [`busemann`]: point, hyperplane and ray Busemann estimators.
//! * [`experiments`]: reproducible Monte Carlo experiments driven by JSON configs.
//! * [`render`]: deterministic SVG pictures of trees, partitions and passage fields.

pub mod busemann;
pub mod error;
pub mod experiments;
pub mod geostruct;
pub mod lattice;
pub mod passage;
pub mod render;
pub mod stats;

pub use error::{GeodesyError, Result};
pub use lattice::{DistributionSpec, EdgeId, LatticeBox, Vertex, WeightField, WeightTable};
pub use passage::{GeodesicPath, PassageEngine, PassageMap, SubgraphMask, TargetSpec};

/// Absolute tolerance for comparisons against exact path identities.
pub const TOL: f64 = 1e-9;
