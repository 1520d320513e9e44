//! Two-dimensional fracture workbench.
//!
//! The crate combines two solvers for plane-strain linear elasticity with
//! cracks and couples them:
//!
//! * a bond-based peridynamic model with a cohesive (softening) pair force,
//!   discretized on a uniform node lattice and integrated in time with an
//!   explicit central-difference scheme — this is the fracture engine;
//! * a flat-top partition-of-unity method (PUM) on a rectangular cover with
//!   polynomial local spaces that can be enriched with discontinuous and
//!   crack-tip functions — this is the fast global elasticity solver.
//!
//! Crack geometry extracted from peridynamic damage fields feeds the
//! enrichment of the PUM space, which is the basis of the global–local
//! coupling driver in [`coupling`].

pub mod cli;
pub mod coupling;
pub mod crack;
pub mod extract;
pub mod io;
pub mod material;
pub mod math;
pub mod pd;
pub mod pum;
pub mod sparse;

pub use crack::CrackPath;
pub use material::Material;
