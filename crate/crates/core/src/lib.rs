//! Semi-supervised clustering by structural entropy minimization.
//!
//! A feature matrix becomes a sparse similarity graph G, prior knowledge
//! becomes a signed relation graph G', and greedy optimizers search for a
//! flat partition or a hierarchy that minimizes structural entropy plus a
//! constraint penalty.

pub mod constraints;
pub mod error;
pub mod flat;
pub mod graph;
pub mod hier;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod oracle;
pub mod partition;
pub mod tree;

pub use constraints::{ConstraintKind, ConstraintSet, RelationGraph};
pub use error::{Error, Result};
pub use flat::{minimize_2d, FlatResult};
pub use graph::{DataMatrix, Kernel, SimilarityMatrix, WeightedGraph};
pub use hier::{extract_partition, minimize_highd, HierResult};
pub use objective::Hyperparams;
pub use partition::Partition;
pub use tree::{EncodingTree, NestedTree, NodeId};
