use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

/// A length on the 8-connected cell graph, `axis + diag·√2` cells, compared
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OctileCost {
    pub axis: u32,
    pub diag: u32,
}

impl OctileCost {
    pub const ZERO: OctileCost = OctileCost { axis: 0, diag: 0 };
    pub const AXIS: OctileCost = OctileCost { axis: 1, diag: 0 };
    pub const DIAG: OctileCost = OctileCost { axis: 0, diag: 1 };

    pub fn new(axis: u32, diag: u32) -> Self {
        OctileCost { axis, diag }
    }

    /// Length in cells.
    pub fn cells(self) -> f64 {
        self.axis as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(self, cell_size: f64) -> f64 {
        self.cells() * cell_size
    }
}

impl Ord for OctileCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of a + b·√2 with integer a, b
        let a = self.axis as i128 - other.axis as i128;
        let b = self.diag as i128 - other.diag as i128;
        match (a.cmp(&0), b.cmp(&0)) {
            (Ordering::Equal, o) | (o, Ordering::Equal) => o,
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (Ordering::Greater, Ordering::Less) => (a * a).cmp(&(2 * b * b)),
            (Ordering::Less, Ordering::Greater) => (2 * b * b).cmp(&(a * a)),
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for OctileCost {
    type Output = OctileCost;
    fn add(self, rhs: Self) -> Self {
        OctileCost {
            axis: self.axis + rhs.axis,
            diag: self.diag + rhs.diag,
        }
    }
}

impl fmt::Display for OctileCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}√2", self.axis, self.diag)
    }
}

/// Euclidean length in meters, totally ordered.
#[derive(Debug, Clone, Copy, Default)]
pub struct Meters(pub f64);

impl PartialEq for Meters {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Meters {}

impl Ord for Meters {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Meters {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Meters {
    type Output = Meters;
    fn add(self, rhs: Self) -> Self {
        Meters(self.0 + rhs.0)
    }
}

/// Additive, totally ordered path cost.
pub trait Cost: Copy + Ord + Add<Output = Self> + Default + fmt::Debug {}

impl Cost for OctileCost {}
impl Cost for Meters {}
