use serde::{Deserialize, Serialize};

/// A ground-plane coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn in_square(self, side: f64) -> bool {
        (0.0..=side).contains(&self.x) && (0.0..=side).contains(&self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Index of a grid cell: `i` runs along x, `j` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Cell { i, j }
    }
}

/// Square cell grid over `[0, n * size]²`. Cell `(i, j)` covers
/// `[i * size, (i + 1) * size) x [j * size, (j + 1) * size)`; the far edge
/// belongs to the last cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub n: usize,
    pub cell_size: f64,
}

impl GridGeometry {
    pub fn new(n: usize, cell_size: f64) -> Self {
        GridGeometry { n, cell_size }
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.cell_size
    }

    /// Center of the lowest cell, the grid's reference corner `u_R`.
    pub fn origin(&self) -> Point {
        Point::new(self.cell_size / 2.0, self.cell_size / 2.0)
    }

    pub fn center(&self, c: Cell) -> Point {
        let o = self.origin();
        Point::new(
            o.x + c.i as f64 * self.cell_size,
            o.y + c.j as f64 * self.cell_size,
        )
    }

    /// Cell containing `p`, clamped onto the grid.
    pub fn cell_of(&self, p: Point) -> Cell {
        let clamp = |v: f64| -> usize {
            let k = (v / self.cell_size).floor();
            if k < 0.0 {
                0
            } else {
                (k as usize).min(self.n - 1)
            }
        };
        Cell::new(clamp(p.x), clamp(p.y))
    }

    /// Cell containing `p`, or `None` when `p` lies outside the grid.
    pub fn try_cell_of(&self, p: Point) -> Option<Cell> {
        if p.in_square(self.side()) {
            Some(self.cell_of(p))
        } else {
            None
        }
    }

    pub fn index(&self, c: Cell) -> usize {
        c.i * self.n + c.j
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.n, index % self.n)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).map(move |j| Cell::new(i, j)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers_follow_reference_corner() {
        let g = GridGeometry::new(20, 100.0);
        assert_eq!(g.origin(), Point::new(50.0, 50.0));
        assert_eq!(g.center(Cell::new(3, 7)), Point::new(350.0, 750.0));
        assert_eq!(g.cell_of(Point::new(350.0, 750.0)), Cell::new(3, 7));
    }

    #[test]
    fn far_edge_belongs_to_last_cell() {
        let g = GridGeometry::new(20, 100.0);
        assert_eq!(g.cell_of(Point::new(2000.0, 0.0)), Cell::new(19, 0));
        assert!(g.try_cell_of(Point::new(2000.1, 0.0)).is_none());
    }

    #[test]
    fn index_round_trips() {
        let g = GridGeometry::new(7, 1.0);
        for c in g.cells() {
            assert_eq!(g.cell_at(g.index(c)), c);
        }
    }
}
