use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::cost::OctileCost;
use crate::error::{Error, Result};
use crate::geom::{Cell, GridGeometry, Point};
use crate::radio::RadioMap;
use crate::trace::Event;

/// A routed trajectory through cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub points: Vec<Point>,
    pub total_length: f64,
    /// Events attached to the waypoint with the given index.
    pub annotations: Vec<(usize, Event)>,
}

impl Path {
    pub fn single(p: Point) -> Self {
        Path {
            points: vec![p],
            total_length: 0.0,
            annotations: Vec::new(),
        }
    }

    /// Waypoints whose cell is below `threshold_db`.
    pub fn violations(&self, map: &RadioMap, threshold_db: f64) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| map.sinr_at(**p) < threshold_db)
            .map(|(k, _)| k)
            .collect()
    }
}

/// The 8 neighbors of `c` with their step cost, in ascending `(i, j)`.
pub fn neighbors(grid: GridGeometry, c: Cell) -> impl Iterator<Item = (Cell, OctileCost)> {
    let n = grid.n as isize;
    (-1isize..=1)
        .flat_map(|di| (-1isize..=1).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| di != 0 || dj != 0)
        .filter_map(move |(di, dj)| {
            let i = c.i as isize + di;
            let j = c.j as isize + dj;
            if (0..n).contains(&i) && (0..n).contains(&j) {
                let w = if di != 0 && dj != 0 {
                    OctileCost::DIAG
                } else {
                    OctileCost::AXIS
                };
                Some((Cell::new(i as usize, j as usize), w))
            } else {
                None
            }
        })
}

/// Shortest-path tree over feasible cells.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub grid: GridGeometry,
    pub source: Cell,
    pub dist: Vec<Option<OctileCost>>,
    pred: Vec<Option<Cell>>,
}

impl ShortestPaths {
    pub fn cost_to(&self, c: Cell) -> Option<OctileCost> {
        self.dist[self.grid.index(c)]
    }

    /// Cells from the source to `target`, inclusive.
    pub fn cells_to(&self, target: Cell) -> Option<Vec<Cell>> {
        self.cost_to(target)?;
        let mut cells = vec![target];
        let mut cur = target;
        while cur != self.source {
            cur = self.pred[self.grid.index(cur)].expect("reached cells have predecessors");
            cells.push(cur);
        }
        cells.reverse();
        Some(cells)
    }
}

/// Single-source shortest paths over the cells with SINR at or above the
/// threshold. Among equal-cost predecessors the lowest `(i, j)` wins.
pub fn shortest_paths(map: &RadioMap, source: Cell, threshold_db: f64) -> ShortestPaths {
    let grid = map.grid;
    let mut dist: Vec<Option<OctileCost>> = vec![None; grid.len()];
    let mut pred: Vec<Option<Cell>> = vec![None; grid.len()];
    let mut done = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    if map.feasible(source, threshold_db) {
        dist[grid.index(source)] = Some(OctileCost::ZERO);
        heap.push(Reverse((OctileCost::ZERO, source)));
    }
    while let Some(Reverse((d, u))) = heap.pop() {
        let ui = grid.index(u);
        if done[ui] {
            continue;
        }
        done[ui] = true;
        for (v, w) in neighbors(grid, u) {
            let vi = grid.index(v);
            if done[vi] || !map.feasible(v, threshold_db) {
                continue;
            }
            let nd = d + w;
            match dist[vi] {
                Some(old) if nd > old => {}
                Some(old) if nd == old => {
                    if pred[vi].is_some_and(|p| u < p) {
                        pred[vi] = Some(u);
                    }
                }
                _ => {
                    dist[vi] = Some(nd);
                    pred[vi] = Some(u);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
    }
    ShortestPaths {
        grid,
        source,
        dist,
        pred,
    }
}

fn check_endpoint(map: &RadioMap, c: Cell, threshold_db: f64, which: &'static str) -> Result<()> {
    if map.feasible(c, threshold_db) {
        Ok(())
    } else {
        Err(Error::InfeasibleEndpoint { which, i: c.i, j: c.j })
    }
}

/// Exact cost and cell sequence of the constrained shortest route between
/// the cells containing `from` and `to`.
pub fn route_cells(
    map: &RadioMap,
    from: Point,
    to: Point,
    threshold_db: f64,
) -> Result<(OctileCost, Vec<Cell>)> {
    let a = map.grid.cell_of(from);
    let b = map.grid.cell_of(to);
    check_endpoint(map, a, threshold_db, "from")?;
    check_endpoint(map, b, threshold_db, "to")?;
    let sp = shortest_paths(map, a, threshold_db);
    let cells = sp.cells_to(b).ok_or_else(|| Error::Unreachable {
        leg: format!("({}, {}) -> ({}, {})", a.i, a.j, b.i, b.j),
    })?;
    Ok((sp.cost_to(b).unwrap(), cells))
}

/// Shortest 8-connected route over SINR-feasible cells.
pub fn dijkstra_leg(map: &RadioMap, from: Point, to: Point, threshold_db: f64) -> Result<Path> {
    let (cost, cells) = route_cells(map, from, to, threshold_db)?;
    Ok(Path {
        points: cells.iter().map(|&c| map.grid.center(c)).collect(),
        total_length: cost.meters(map.grid.cell_size),
        annotations: Vec::new(),
    })
}
