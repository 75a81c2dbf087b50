use super::geometry::{Cell, GridGeometry};
use super::sat::window_sums;
use crate::error::{Error, Result};

/// Lower bound on every microtopic entry of a trained grid.
pub const PI_FLOOR: f64 = 1e-10;

/// Tolerance used when checking that a distribution sums to one.
pub const NORM_TOL: f64 = 1e-9;

/// A grid of microtopics `pi` and their window averages `h`.
///
/// Both arrays are stored word-major (`[z * cells + i]`), so the field of a
/// single word over the grid is contiguous; that is the access pattern of
/// every window sum and of the E-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingGrid {
    geometry: GridGeometry,
    vocab_size: usize,
    pi: Vec<f64>,
    h: Vec<f64>,
    log_h: Vec<f64>,
}

impl CountingGrid {
    /// Builds a grid from word-major `pi` and computes `h`.
    pub fn from_pi(geometry: GridGeometry, vocab_size: usize, pi: Vec<f64>) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if pi.len() != geometry.cells() * vocab_size {
            return Err(Error::DimensionMismatch {
                expected: geometry.cells() * vocab_size,
                actual: pi.len(),
            });
        }
        let mut grid = CountingGrid {
            geometry,
            vocab_size,
            pi,
            h: Vec::new(),
            log_h: Vec::new(),
        };
        grid.compute_h()?;
        Ok(grid)
    }

    /// Builds a grid from per-cell distributions (`cells[i][z]`).
    pub fn from_cell_distributions(geometry: GridGeometry, cells: &[Vec<f64>]) -> Result<Self> {
        if cells.len() != geometry.cells() {
            return Err(Error::DimensionMismatch {
                expected: geometry.cells(),
                actual: cells.len(),
            });
        }
        let z = cells.first().map_or(0, Vec::len);
        let n = geometry.cells();
        let mut pi = vec![0.0; n * z];
        for (i, dist) in cells.iter().enumerate() {
            if dist.len() != z {
                return Err(Error::DimensionMismatch {
                    expected: z,
                    actual: dist.len(),
                });
            }
            for (w, p) in dist.iter().enumerate() {
                pi[w * n + i] = *p;
            }
        }
        Self::from_pi(geometry, z, pi)
    }

    /// Uniform microtopics, `pi_i(z) = 1/Z`.
    pub fn uniform(geometry: GridGeometry, vocab_size: usize) -> Result<Self> {
        let pi = vec![1.0 / vocab_size as f64; geometry.cells() * vocab_size];
        Self::from_pi(geometry, vocab_size, pi)
    }

    /// Recomputes `h_l(z) = (1/|W|) * sum over j in W_l of pi_j(z)`.
    pub fn compute_h(&mut self) -> Result<()> {
        let n = self.geometry.cells();
        let mut sums = vec![0.0; n];
        for field in self.pi.chunks_exact(n) {
            for (i, p) in field.iter().enumerate() {
                if !(*p >= 0.0) || !p.is_finite() {
                    return Err(Error::NotNormalized {
                        cell: i,
                        sum: f64::NAN,
                    });
                }
                sums[i] += p;
            }
        }
        if let Some((cell, sum)) = sums
            .iter()
            .enumerate()
            .find(|(_, s)| (**s - 1.0).abs() > NORM_TOL)
        {
            return Err(Error::NotNormalized { cell, sum: *sum });
        }
        let area = self.geometry.window_area() as f64;
        let mut h = Vec::with_capacity(self.pi.len());
        for field in self.pi.chunks_exact(n) {
            h.extend(window_sums(field, &self.geometry)?.into_iter().map(|s| s / area));
        }
        self.log_h = h.iter().map(|v| v.ln()).collect();
        self.h = h;
        Ok(())
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn cells(&self) -> usize {
        self.geometry.cells()
    }

    #[inline]
    pub fn pi(&self, cell: usize, word: usize) -> f64 {
        self.pi[word * self.geometry.cells() + cell]
    }

    #[inline]
    pub fn h(&self, location: usize, word: usize) -> f64 {
        self.h[word * self.geometry.cells() + location]
    }

    /// `pi_i(word)` for every cell `i`.
    #[inline]
    pub fn pi_field(&self, word: usize) -> &[f64] {
        let n = self.geometry.cells();
        &self.pi[word * n..(word + 1) * n]
    }

    /// `h_l(word)` for every location `l`.
    #[inline]
    pub fn h_field(&self, word: usize) -> &[f64] {
        let n = self.geometry.cells();
        &self.h[word * n..(word + 1) * n]
    }

    #[inline]
    pub fn log_h_field(&self, word: usize) -> &[f64] {
        let n = self.geometry.cells();
        &self.log_h[word * n..(word + 1) * n]
    }

    /// Word-major microtopic table.
    pub fn pi_table(&self) -> &[f64] {
        &self.pi
    }

    /// Word-major window-average table.
    pub fn h_table(&self) -> &[f64] {
        &self.h
    }

    pub fn into_pi(self) -> Vec<f64> {
        self.pi
    }

    /// The distribution `pi_i(.)` of one cell.
    pub fn pi_at(&self, cell: usize) -> Vec<f64> {
        (0..self.vocab_size).map(|z| self.pi(cell, z)).collect()
    }

    /// The distribution `h_l(.)` of one window.
    pub fn h_at(&self, location: usize) -> Vec<f64> {
        (0..self.vocab_size).map(|z| self.h(location, z)).collect()
    }

    /// Average of `pi` over an `s x s` block anchored at `cell`.
    pub fn block_average(&self, cell: Cell, size: usize) -> Vec<f64> {
        let g = &self.geometry;
        let mut out = vec![0.0; self.vocab_size];
        for dx in 0..size {
            for dy in 0..size {
                let c = g.index(g.wrap((cell.x + dx) as isize, (cell.y + dy) as isize));
                for (z, o) in out.iter_mut().enumerate() {
                    *o += self.pi(c, z);
                }
            }
        }
        let area = (size * size) as f64;
        out.iter_mut().for_each(|v| *v /= area);
        out
    }

    /// Smallest microtopic entry.
    pub fn min_pi(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation of any cell's `pi` or `h` sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        let n = self.geometry.cells();
        let mut pi_sums = vec![0.0; n];
        let mut h_sums = vec![0.0; n];
        for (pf, hf) in self.pi.chunks_exact(n).zip(self.h.chunks_exact(n)) {
            for i in 0..n {
                pi_sums[i] += pf[i];
                h_sums[i] += hf[i];
            }
        }
        pi_sums
            .iter()
            .chain(h_sums.iter())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Free-standing form of [`CountingGrid::compute_h`].
pub fn compute_h(mut grid: CountingGrid) -> Result<CountingGrid> {
    grid.compute_h()?;
    Ok(grid)
}

/// Maximizes `sum_z weights[z] * ln p[z]` over distributions with
/// `p[z] >= floor`, writing the result into `weights`.
///
/// Entries whose unconstrained share would fall under the floor are pinned to
/// it and the remaining mass is shared in proportion to the weights. Returns
/// `false` (leaving `weights` untouched) when every weight is zero.
pub fn project_floored(weights: &mut [f64], floor: f64) -> bool {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return false;
    }
    debug_assert!(floor * (weights.len() as f64) < 1.0);
    let mut pinned = vec![false; weights.len()];
    let mut n_pinned = 0usize;
    let mut free_total = total;
    loop {
        let scale = free_total / (1.0 - n_pinned as f64 * floor);
        let mut changed = false;
        for (w, p) in weights.iter().zip(pinned.iter_mut()) {
            if !*p && *w < floor * scale {
                *p = true;
                n_pinned += 1;
                free_total -= *w;
                changed = true;
            }
        }
        if !changed {
            for (w, p) in weights.iter_mut().zip(pinned.iter()) {
                *w = if *p { floor } else { *w / scale };
            }
            return true;
        }
    }
}
