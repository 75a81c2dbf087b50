use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location on the two-dimensional torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Grid extents and window size of a counting grid.
///
/// Cells are stored row-major: cell `(x, y)` lives at flat index
/// `x * ey + y`. A window "at" location `l` is the `wx x wy` block whose
/// top-left corner is `l`, wrapping around both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    extents: (usize, usize),
    window: (usize, usize),
}

impl GridGeometry {
    pub fn new(extents: (usize, usize), window: (usize, usize)) -> Result<Self> {
        let (ex, ey) = extents;
        let (wx, wy) = window;
        if ex == 0 || ey == 0 {
            return Err(Error::InvalidGeometry(format!("empty grid {ex}x{ey}")));
        }
        if wx == 0 || wy == 0 || wx > ex || wy > ey {
            return Err(Error::InvalidGeometry(format!(
                "window {wx}x{wy} does not fit a {ex}x{ey} grid"
            )));
        }
        Ok(GridGeometry { extents, window })
    }

    /// Square grid with a square window.
    pub fn square(extent: usize, window: usize) -> Result<Self> {
        Self::new((extent, extent), (window, window))
    }

    pub fn extents(&self) -> (usize, usize) {
        self.extents
    }

    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    /// Number of cells; also the number of distinct windows.
    pub fn cells(&self) -> usize {
        self.extents.0 * self.extents.1
    }

    pub fn window_area(&self) -> usize {
        self.window.0 * self.window.1
    }

    /// Grid area over window area.
    pub fn capacity(&self) -> f64 {
        self.cells() as f64 / self.window_area() as f64
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.extents.0 && cell.y < self.extents.1
    }

    pub fn check(&self, cell: Cell) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                x: cell.x,
                y: cell.y,
                ex: self.extents.0,
                ey: self.extents.1,
            })
        }
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.x * self.extents.1 + cell.y
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.extents.1, index % self.extents.1)
    }

    /// Wraps signed coordinates onto the torus.
    #[inline]
    pub fn wrap(&self, x: isize, y: isize) -> Cell {
        let (ex, ey) = (self.extents.0 as isize, self.extents.1 as isize);
        Cell::new(x.rem_euclid(ex) as usize, y.rem_euclid(ey) as usize)
    }

    /// The `wx * wy` cells of the window anchored at `location`.
    pub fn window_cells(&self, location: Cell) -> Result<Vec<Cell>> {
        self.check(location)?;
        Ok(self.window_cells_unchecked(location))
    }

    pub(crate) fn window_cells_unchecked(&self, location: Cell) -> Vec<Cell> {
        let (ex, ey) = self.extents;
        let (wx, wy) = self.window;
        let mut out = Vec::with_capacity(wx * wy);
        for dx in 0..wx {
            for dy in 0..wy {
                out.push(Cell::new((location.x + dx) % ex, (location.y + dy) % ey));
            }
        }
        out
    }

    /// True when `cell` lies inside the window anchored at `location`.
    pub fn window_contains(&self, location: Cell, cell: Cell) -> bool {
        let (ex, ey) = self.extents;
        let dx = (cell.x + ex - location.x) % ex;
        let dy = (cell.y + ey - location.y) % ey;
        dx < self.window.0 && dy < self.window.1
    }

    /// Anchor of the window that covers exactly the locations whose windows
    /// contain `cell`. Summing a field over that window gives
    /// `sum over { l : cell in W_l } f(l)`.
    #[inline]
    pub fn covering_anchor(&self, cell: Cell) -> Cell {
        self.wrap(
            cell.x as isize - self.window.0 as isize + 1,
            cell.y as isize - self.window.1 as isize + 1,
        )
    }

    /// Euclidean distance on the torus, using the shorter wrap along each axis.
    pub fn toroidal_distance(&self, a: Cell, b: Cell) -> f64 {
        let (ex, ey) = self.extents;
        let dx = a.x.abs_diff(b.x);
        let dy = a.y.abs_diff(b.y);
        let dx = dx.min(ex - dx) as f64;
        let dy = dy.min(ey - dy) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Cyclically shifts a cell-indexed field so that `out[c + shift] = field[c]`.
    pub fn shift_field(&self, field: &[f64], shift: (isize, isize)) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (i, v) in field.iter().enumerate() {
            let c = self.cell(i);
            let t = self.wrap(c.x as isize + shift.0, c.y as isize + shift.1);
            out[self.index(t)] = *v;
        }
        out
    }
}

impl fmt::Display for GridGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} grid, {}x{} window",
            self.extents.0, self.extents.1, self.window.0, self.window.1
        )
    }
}

/// Parses `"AxB"` into a pair of positive integers.
pub fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidGeometry(format!("expected AxB, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn window_wraps_at_corner() {
        let g = GridGeometry::square(4, 2).unwrap();
        let cells: BTreeSet<_> = g.window_cells(Cell::new(3, 3)).unwrap().into_iter().collect();
        let expected: BTreeSet<_> = [(3, 3), (3, 0), (0, 3), (0, 0)]
            .into_iter()
            .map(|(x, y)| Cell::new(x, y))
            .collect();
        assert_eq!(cells, expected);
    }

    #[test]
    fn window_sizes() {
        let g = GridGeometry::square(32, 8).unwrap();
        for i in [0, 17, 1023] {
            assert_eq!(g.window_cells(g.cell(i)).unwrap().len(), 64);
        }
        let g = GridGeometry::square(5, 5).unwrap();
        let cells: BTreeSet<_> = g.window_cells(Cell::new(0, 0)).unwrap().into_iter().collect();
        assert_eq!(cells.len(), 25);
        assert_eq!(g.capacity(), 1.0);
        assert_eq!(GridGeometry::square(32, 8).unwrap().capacity(), 16.0);
    }

    #[test]
    fn out_of_range_location() {
        let g = GridGeometry::square(4, 2).unwrap();
        assert!(matches!(
            g.window_cells(Cell::new(4, 0)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(GridGeometry::new((4, 4), (5, 1)).is_err());
        assert!(GridGeometry::new((4, 4), (0, 1)).is_err());
        assert!(GridGeometry::new((0, 4), (1, 1)).is_err());
    }

    #[test]
    fn covering_anchor_inverts_membership() {
        let g = GridGeometry::new((5, 7), (2, 3)).unwrap();
        for i in 0..g.cells() {
            let cell = g.cell(i);
            let anchor = g.covering_anchor(cell);
            let covering: BTreeSet<_> = g.window_cells(anchor).unwrap().into_iter().collect();
            let direct: BTreeSet<_> = (0..g.cells())
                .map(|l| g.cell(l))
                .filter(|&l| g.window_contains(l, cell))
                .collect();
            assert_eq!(covering, direct);
        }
    }

    #[test]
    fn distance_uses_shorter_wrap() {
        let g = GridGeometry::square(10, 2).unwrap();
        assert_eq!(g.toroidal_distance(Cell::new(0, 0), Cell::new(9, 0)), 1.0);
        assert_eq!(g.toroidal_distance(Cell::new(1, 1), Cell::new(4, 5)), 5.0);
    }

    #[test]
    fn parses_pairs() {
        assert_eq!(parse_pair("32x16").unwrap(), (32, 16));
        assert!(parse_pair("32").is_err());
    }
}
