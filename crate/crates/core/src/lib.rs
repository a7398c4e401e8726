//! Hierarchical Poincaré–Steklov direct solver for variable-coefficient
//! elliptic boundary value problems on rectangles.
//!
//! The pipeline is: a tree of boxes ([`geometry`]), per-leaf spectral
//! collocation and Dirichlet-to-Neumann maps ([`leaf`]), pairwise merges
//! ([`merge`]), and the build / solve driver ([`solver`]).

pub mod cli;
pub mod error;
pub mod geometry;
pub mod leaf;
pub mod linalg;
pub mod merge;
pub mod problem;
pub mod solver;
pub mod spectral;

pub use error::{HpsError, Result};
pub use geometry::{build_tree, BoxTree, GaussGrid, Rect};
pub use problem::{catalogue, Field, ManufacturedCase, Params, Problem};
pub use solver::{build, evaluate_at, solve, BuildOptions, MemoryPolicy, OperatorCache, Solution};
