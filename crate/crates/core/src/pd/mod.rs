//! Bond-based peridynamics on a uniform node lattice.

pub mod dynamics;
pub mod grid;

pub use dynamics::{PdModel, PdRun, PdRunResult, Snapshot};
pub use grid::{Edge, EmuGrid};
