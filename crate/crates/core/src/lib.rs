//! Composite-system state-vector engine.
//!
//! Builds measurement scenarios — a measured system plus detector pointers
//! and observer registers — as labeled tensor-product layouts, evolves them
//! under exact linear unitary pipelines with no collapse anywhere, and
//! decomposes the final states into branches carrying definite, mutually
//! consistent records. The `experiments` module ships the scenario
//! builders; `verify` runs the claim-by-claim invariant battery behind
//! `branchlab verify`.

pub mod branching;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod oracle;
pub mod sampling;
pub mod verify;

pub use branching::{Branch, IsolationReport, SupportReport};
pub use dynamics::{HamiltonianTerm, UnitaryOp};
pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, StateVector, SystemLayout};
