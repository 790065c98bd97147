use crate::geom::{Cell, GridGeometry, Point};
use crate::scenario::{BuildingRaster, Gbs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Los,
    Nlos,
}

/// Samples the 3-D segment from the base-station antenna to the receiver at
/// ground spacing of at most half a cell. The link is blocked when any
/// interior sample sits at or below the roof of the building under it.
pub fn classify_los(
    gbs: &Gbs,
    receiver: Point,
    altitude: f64,
    buildings: &BuildingRaster,
    grid: GridGeometry,
) -> Visibility {
    let ground = gbs.position.distance(receiver);
    let spacing = grid.cell_size / 2.0;
    let samples = (ground / spacing).ceil().max(1.0) as usize;
    for k in 1..samples {
        let t = k as f64 / samples as f64;
        let p = gbs.position.lerp(receiver, t);
        let Some(Cell { i, j }) = grid.try_cell_of(p) else {
            continue;
        };
        let z = gbs.height + (altitude - gbs.height) * t;
        if z <= buildings.height(i, j) {
            return Visibility::Nlos;
        }
    }
    Visibility::Los
}
