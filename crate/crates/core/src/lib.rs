//! Approximation scheme for the unit-demand capacitated vehicle routing
//! problem in the Euclidean plane, with the supporting m-paths dynamic
//! program, exact oracles and baselines.

pub mod anchor;
pub mod dissection;
pub mod error;
pub mod model;
pub mod mpaths;
pub mod flowgraph;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod pipeline;
pub mod rings;
pub mod run;
pub mod svg;

pub use error::{Error, Result};
pub use model::*;
