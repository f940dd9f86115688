//! Exact connected searching of node-weighted trees.
//!
//! * [`tree`]: weighted rooted trees and subtree queries.
//! * [`semantics`]: guard sets, move costs, verification, composition.
//! * [`oracle`]: exhaustive reference answers for small trees.
//! * [`solver`]: the exact frontier-based solver for bounded degree.
//! * [`transform`]: weight normalisation, subdivision and the unrooted gadget.
//! * [`scheduling`]: scheduling with time-dependent processing times and the
//!   reductions tying it to tree searching.

pub mod oracle;
pub mod scheduling;
pub mod semantics;
pub mod solver;
pub mod transform;
pub mod tree;

pub use semantics::{SearchStrategy, VerificationReport};
pub use tree::{EdgeId, VertexId, Weight, WeightedRootedTree};
