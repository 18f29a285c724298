//! Labeled tensor-product Hilbert spaces, sparse state vectors, and the
//! partial trace.

pub mod density;
pub mod layout;
pub mod state;

pub use density::{DensityMatrix, RANK_TOLERANCE};
pub use layout::{SubsetIndexer, Subsystem, SystemLayout, DEFAULT_COMPOSITE_CAP};
pub use state::{StateVector, DEFAULT_PRUNE_THRESHOLD};
