//! Offline baselines: SINR-constrained Dijkstra leg routing, sequential
//! (CPTSP) and capacity-constrained ride-sharing (PDPCC) ordering, and the
//! straight-line reference, plus an executor that flies them slot by slot.

mod cost;
mod dijkstra;
mod execute;
mod ordering;

pub use cost::{Cost, Meters, OctileCost};
pub use dijkstra::{dijkstra_leg, neighbors, route_cells, shortest_paths, Path, ShortestPaths};
pub use execute::{replan_on_arrival, run_classical, straight_line_path, ClassicalRun, Method};
pub use ordering::{
    cptsp_order, pdpcc_order, solve_interleaved, solve_sequential, EventKind, EventSequence, LegTable, Plan,
    Request, ServiceEvent, CPTSP_MAX_REQUESTS, PDPCC_MAX_REQUESTS,
};

#[cfg(test)]
mod tests;
