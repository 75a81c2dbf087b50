//! Toroidal summed-area tables.
//!
//! The field is unrolled by appending its first `wx - 1` rows and `wy - 1`
//! columns, so every window on the torus is an axis-aligned rectangle of the
//! padded field. Prefix sums are kept in double-double precision: a window
//! sum is a difference of four large prefix sums and plain `f64` would lose
//! the low-order digits of small windows.

use super::geometry::{Cell, GridGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl DoubleDouble {
    #[inline]
    fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let hi = s + e;
        DoubleDouble { hi, lo: e - (hi - s) }
    }

    #[inline]
    fn sub(self, other: DoubleDouble) -> DoubleDouble {
        self.add(DoubleDouble {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    fn add_f64(self, v: f64) -> DoubleDouble {
        self.add(DoubleDouble { hi: v, lo: 0.0 })
    }
}

/// Prefix sums of a padded toroidal field, `(ex + wx) x (ey + wy)` entries.
#[derive(Debug, Clone)]
pub struct SummedAreaTable {
    geometry: GridGeometry,
    rows: usize,
    cols: usize,
    table: Vec<DoubleDouble>,
}

impl SummedAreaTable {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Table extents including the zero border.
    pub fn extents(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Sum of the field over the window anchored at `location`.
    pub fn window_sum(&self, location: Cell) -> Result<f64> {
        self.geometry.check(location)?;
        Ok(self.sum_at(location.x, location.y))
    }

    /// Sum of the field over all locations whose window contains `cell`.
    pub fn covering_sum(&self, cell: Cell) -> Result<f64> {
        self.geometry.check(cell)?;
        let a = self.geometry.covering_anchor(cell);
        Ok(self.sum_at(a.x, a.y))
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> DoubleDouble {
        self.table[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn sum_at(&self, x: usize, y: usize) -> f64 {
        let (wx, wy) = self.geometry.window();
        let upper = self.at(x + wx, y + wy).sub(self.at(x, y + wy));
        let lower = self.at(x + wx, y).sub(self.at(x, y));
        let r = upper.sub(lower);
        r.hi + r.lo
    }
}

/// Builds the summed-area table of a cell-indexed field.
pub fn build_sat(field: &[f64], geometry: &GridGeometry) -> Result<SummedAreaTable> {
    if field.len() != geometry.cells() {
        return Err(Error::DimensionMismatch {
            expected: geometry.cells(),
            actual: field.len(),
        });
    }
    let (ex, ey) = geometry.extents();
    let (wx, wy) = geometry.window();
    let rows = ex + wx;
    let cols = ey + wy;
    let mut table = vec![DoubleDouble::default(); rows * cols];
    for r in 1..rows {
        let src = ((r - 1) % ex) * ey;
        let mut running = DoubleDouble::default();
        for c in 1..cols {
            running = running.add_f64(field[src + (c - 1) % ey]);
            table[r * cols + c] = table[(r - 1) * cols + c].add(running);
        }
    }
    Ok(SummedAreaTable {
        geometry: *geometry,
        rows,
        cols,
        table,
    })
}

/// Sum of the field over the window anchored at `location`.
pub fn window_sum(sat: &SummedAreaTable, location: Cell) -> Result<f64> {
    sat.window_sum(location)
}

/// Window sums at every location, in cell order.
pub fn window_sums(field: &[f64], geometry: &GridGeometry) -> Result<Vec<f64>> {
    let sat = build_sat(field, geometry)?;
    let ey = geometry.extents().1;
    Ok((0..geometry.cells())
        .map(|i| sat.sum_at(i / ey, i % ey))
        .collect())
}

/// For every cell `i`, the sum of `field[l]` over the locations `l` whose
/// window contains `i`.
pub fn covering_sums(field: &[f64], geometry: &GridGeometry) -> Result<Vec<f64>> {
    let sat = build_sat(field, geometry)?;
    Ok((0..geometry.cells())
        .map(|i| {
            let a = geometry.covering_anchor(geometry.cell(i));
            sat.sum_at(a.x, a.y)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_window_sum(field: &[f64], g: &GridGeometry, loc: Cell) -> f64 {
        g.window_cells(loc)
            .unwrap()
            .into_iter()
            .map(|c| field[g.index(c)])
            .sum()
    }

    #[test]
    fn constant_field_gives_window_area() {
        let g = GridGeometry::square(9, 5).unwrap();
        let sat = build_sat(&vec![1.0; g.cells()], &g).unwrap();
        for i in 0..g.cells() {
            assert_eq!(window_sum(&sat, g.cell(i)).unwrap(), 25.0);
        }
        assert_eq!(sat.extents(), (14, 14));
    }

    #[test]
    fn delta_field_hits_covering_windows_only() {
        let g = GridGeometry::new((6, 5), (3, 2)).unwrap();
        let hot = Cell::new(0, 4);
        let mut field = vec![0.0; g.cells()];
        field[g.index(hot)] = 1.0;
        let sums = window_sums(&field, &g).unwrap();
        let mut hits = 0;
        for (l, s) in sums.iter().enumerate() {
            let expected = if g.window_contains(g.cell(l), hot) { 1.0 } else { 0.0 };
            assert_eq!(*s, expected);
            hits += (*s == 1.0) as usize;
        }
        assert_eq!(hits, 6);
    }

    #[test]
    fn random_integers_match_naive_sum() {
        let g = GridGeometry::new((7, 9), (3, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let field: Vec<f64> = (0..g.cells()).map(|_| rng.gen_range(0..1000) as f64).collect();
        let sat = build_sat(&field, &g).unwrap();
        for i in 0..g.cells() {
            let loc = g.cell(i);
            assert_eq!(sat.window_sum(loc).unwrap(), naive_window_sum(&field, &g, loc));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = GridGeometry::square(4, 2).unwrap();
        assert!(matches!(
            build_sat(&[1.0; 15], &g),
            Err(Error::DimensionMismatch { expected: 16, actual: 15 })
        ));
    }

    #[test]
    fn covering_sum_matches_membership() {
        let g = GridGeometry::new((5, 6), (2, 3)).unwrap();
        let field: Vec<f64> = (0..g.cells()).map(|i| (i * i % 7) as f64 + 0.25).collect();
        let cov = covering_sums(&field, &g).unwrap();
        for (i, s) in cov.iter().enumerate() {
            let cell = g.cell(i);
            let direct: f64 = (0..g.cells())
                .filter(|&l| g.window_contains(g.cell(l), cell))
                .map(|l| field[l])
                .sum();
            assert!((s - direct).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn shift_equivariance(ex in 1usize..9, ey in 1usize..9, sx in -10isize..10, sy in -10isize..10, seed in 0u64..1000) {
            let wx = 1 + (seed as usize) % ex;
            let wy = 1 + (seed as usize / 7) % ey;
            let g = GridGeometry::new((ex, ey), (wx, wy)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let field: Vec<f64> = (0..g.cells()).map(|_| rng.gen_range(0..50) as f64).collect();
            let shifted = g.shift_field(&field, (sx, sy));
            let a = window_sums(&field, &g).unwrap();
            let b = window_sums(&shifted, &g).unwrap();
            for l in 0..g.cells() {
                let c = g.cell(l);
                let t = g.wrap(c.x as isize + sx, c.y as isize + sy);
                prop_assert_eq!(a[l], b[g.index(t)]);
            }
        }
    }
}
