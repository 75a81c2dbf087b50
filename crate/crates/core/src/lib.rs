//! Counting grids, componential counting grids and stacks of them.

pub mod ccg;
pub mod cg;
pub mod corpus;
pub mod eval;
mod error;
pub mod grid;
pub mod hierarchy;
pub mod io;
pub mod math;
pub mod synth;

pub use error::{Error, Result};
