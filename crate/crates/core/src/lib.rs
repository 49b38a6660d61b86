//! Fisher information non-parametric embedding: density estimation on
//! sample sets, information divergences, geodesic approximation on a
//! neighbor graph, and low-dimensional embedding of the resulting
//! statistical manifold.

pub mod datasets;
pub mod density;
pub mod divergence;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod geodesic;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod synth;
