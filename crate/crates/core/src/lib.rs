//! Symbolic tensor calculus on a single global chart, fiber and uniform
//! norms over compact exhaustions, and decision procedures for the
//! compact-open, open and global topologies on spaces of Lorentzian metrics.

pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod sampling;
pub mod norms;
pub mod serde_ext;
pub mod topology;
