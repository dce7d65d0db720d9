//! Exact symbolic engine for tree-indexed multilinear maps with Laurent
//! singularities over the rationals.
//!
//! The crate is organized around five layers:
//!
//! - [`tree`]: the category of n-leafed trees (grafting, refinement
//!   morphisms, vertex posets and their linear extensions);
//! - [`hopf`]: the divided-power Hopf algebra `R[D0, D1, ...]` and its
//!   truncated Laurent-series coefficient object `K`;
//! - [`series`]: multivariate truncated series whose poles sit in variable
//!   differences, with expansion, per-variable divided-power actions and
//!   invariance checks;
//! - [`multimap`]: tree-parameterized multimaps with composition along
//!   grafting, refinement, symmetry actions and membership verification;
//! - [`algebra`]: algebras generated by a unit and a binary map, axiom
//!   checking and operator-product-expansion extraction.
//!
//! Everything is exact rational arithmetic; truncation is tracked explicitly
//! and equality checks are restricted to windows that truncation provably
//! cannot affect.

pub mod algebra;
pub mod hopf;
pub mod multimap;
pub mod rational;
pub mod series;
pub mod tree;
pub mod verify;

pub use rational::{rat, rint, Rat};
