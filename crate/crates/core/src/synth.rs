//! Synthetic desk-scale instances: hand-made radio maps and scenarios of the
//! same structure as the city experiments.

use crate::geom::{Cell, GridGeometry, Point};
use crate::radio::RadioMap;
use crate::scenario::{BuildingRaster, Gbs, PassengerRequest, Scenario};

/// Radio map with the same SINR in every cell, served by station 0.
pub fn uniform_map(grid: GridGeometry, sinr_db: f64) -> RadioMap {
    map_from_fn(grid, |_| sinr_db)
}

pub fn map_from_fn(grid: GridGeometry, f: impl Fn(Cell) -> f64) -> RadioMap {
    RadioMap {
        grid,
        sinr_db: grid.cells().map(f).collect(),
        serving: vec![0; grid.len()],
    }
}

pub fn station(x: f64, y: f64) -> Gbs {
    Gbs {
        position: Point::new(x, y),
        height: 15.0,
        tx_power_dbm: 30.0,
        load_factor: 1.0,
        gain_db: 0.0,
        carrier_ghz: 2.0,
    }
}

/// An `n x n` scenario with 100 m cells, 100 m steps (120 km/h, 3 s slots),
/// two seats, a station at each corner and no buildings.
pub fn open_scenario(n: usize, passengers: Vec<PassengerRequest>) -> Scenario {
    let cell = 100.0;
    let side = n as f64 * cell;
    Scenario {
        area_side: side,
        cell_size: cell,
        altitude: 100.0,
        speed: 120_000.0 / 3600.0,
        slot_duration: 3.0,
        seats: 2,
        sinr_threshold_db: -5.0,
        start_position: Point::new(cell / 2.0, cell / 2.0),
        gbs: vec![
            station(0.0, 0.0),
            station(side, 0.0),
            station(0.0, side),
            station(side, side),
        ],
        buildings: BuildingRaster::flat(n),
        passengers,
        max_steps: 200,
        action_count: 15,
        rng_seed: 0,
    }
}

pub fn request(id: usize, origin: Point, destination: Point, arrival_slot: usize) -> PassengerRequest {
    PassengerRequest {
        id,
        origin,
        destination,
        arrival_slot,
    }
}

/// The 20 x 20 ride-sharing instance: three passengers, the third arriving
/// late next to the route, and a low-SINR pocket in the middle of the map
/// produced by a tower block shadowing the four corner stations.
///
/// With `sinr_threshold_db` at [`DESK_THRESHOLD_DB`] the pocket cells are
/// infeasible.
pub fn desk_scenario() -> Scenario {
    let n = 20;
    let grid = GridGeometry::new(n, 100.0);
    let c = |i: usize, j: usize| grid.center(Cell::new(i, j));
    let passengers = vec![
        request(0, c(3, 5), c(16, 6), 0),
        request(1, c(5, 3), c(15, 4), 0),
        request(2, c(9, 4), c(12, 15), 12),
    ];
    let mut s = open_scenario(n, passengers);
    s.start_position = c(1, 1);
    s.max_steps = 100;
    let mut b = BuildingRaster::flat(n);
    for i in 8..12 {
        for j in 8..12 {
            b.set(i, j, 120.0);
        }
    }
    s.buildings = b;
    s.sinr_threshold_db = DESK_THRESHOLD_DB;
    s
}

pub const DESK_THRESHOLD_DB: f64 = -5.0;
