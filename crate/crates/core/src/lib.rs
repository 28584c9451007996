//! Computational companion for mixed systems of diagonal cubic and quadratic
//! equations: auxiliary matrices, exact solution counts, Weyl sums, arc
//! dissections and local densities.

pub mod arcs;
pub mod counting;
pub mod density;
pub mod expsum;
pub mod matrix;
pub mod pipeline;
