//! Enriched partition-of-unity elasticity solver.
//!
//! A uniform cover of rectangular patches carries a flat-top Shepard
//! partition of unity ([`cover`]). Each patch holds a local polynomial
//! space, optionally enriched with crack-aware functions. Galerkin
//! assembly over the cover with crack-conforming quadrature yields the
//! plane-strain stiffness and mass operators; static problems are solved
//! by preconditioned conjugate gradients and dynamic ones by explicit
//! time stepping.

pub mod assemble;
pub mod cover;
pub mod quadrature;
pub mod solve;
pub mod space;

pub use cover::Cover;
pub use space::PumSpace;
