//! Toroidal grid geometry, summed-area tables and window averaging.

mod counting_grid;
mod geometry;
mod sat;
mod smooth;

pub use counting_grid::{compute_h, project_floored, CountingGrid, NORM_TOL, PI_FLOOR};
pub use geometry::{parse_pair, Cell, GridGeometry};
pub use sat::{build_sat, covering_sums, window_sum, window_sums, SummedAreaTable};
pub use smooth::{gaussian_kernel, gaussian_smooth};
