#[cfg(feature = "cli")]
pub mod cli;
pub mod geometry;
pub mod lobachevsky;
pub mod optimizer;
pub mod polytope;
pub mod triangulation;
