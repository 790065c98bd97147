use std::fmt;

use serde::{Deserialize, Serialize};

use super::cost::{Cost, Meters, OctileCost};
use super::dijkstra::shortest_paths;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::radio::RadioMap;

/// Largest request count the CPTSP permutation search accepts.
pub const CPTSP_MAX_REQUESTS: usize = 7;
/// Largest request count the PDPCC branch-and-bound accepts.
pub const PDPCC_MAX_REQUESTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub kind: EventKind,
    pub passenger: usize,
    pub point: Point,
}

impl fmt::Display for ServiceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            EventKind::Pickup => 'S',
            EventKind::Dropoff => 'D',
        };
        write!(f, "{tag}{}", self.passenger)
    }
}

/// An ordered service plan.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventSequence {
    pub events: Vec<ServiceEvent>,
}

impl EventSequence {
    /// Checks precedence and capacity, given the passengers already onboard
    /// when the sequence starts.
    pub fn validate(&self, seats: usize, onboard: &[usize]) -> Result<()> {
        let mut inside: Vec<usize> = onboard.to_vec();
        let mut seen = Vec::new();
        for e in &self.events {
            match e.kind {
                EventKind::Pickup => {
                    if inside.contains(&e.passenger) || seen.contains(&e.passenger) {
                        return Err(Error::Contract(format!("passenger {} picked up twice", e.passenger)));
                    }
                    inside.push(e.passenger);
                    seen.push(e.passenger);
                    if inside.len() > seats {
                        return Err(Error::Contract(format!("capacity {seats} exceeded at {e}")));
                    }
                }
                EventKind::Dropoff => {
                    let Some(k) = inside.iter().position(|&p| p == e.passenger) else {
                        return Err(Error::Contract(format!("{e} before its pickup")));
                    };
                    inside.remove(k);
                }
            }
        }
        if let Some(p) = inside.first() {
            return Err(Error::Contract(format!("passenger {p} never dropped off")));
        }
        Ok(())
    }
}

impl fmt::Display for EventSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("start")?;
        for e in &self.events {
            write!(f, "-{e}")?;
        }
        Ok(())
    }
}

/// An unserved request as seen by the ordering solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    pub origin: Point,
    pub destination: Point,
    /// Already picked up; only the drop-off remains.
    pub onboard: bool,
}

impl Request {
    pub fn waiting(id: usize, origin: Point, destination: Point) -> Self {
        Request {
            id,
            origin,
            destination,
            onboard: false,
        }
    }
}

/// Optimal ordering together with its routed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<C> {
    pub sequence: EventSequence,
    pub cost: C,
}

/// Pairwise leg costs between the start (node 0), origins (node `1 + 2r`)
/// and destinations (node `2 + 2r`).
#[derive(Debug, Clone)]
pub struct LegTable<C> {
    costs: Vec<Vec<C>>,
}

impl<C: Cost> LegTable<C> {
    fn node_count(requests: &[Request]) -> usize {
        1 + 2 * requests.len()
    }

    pub fn cost(&self, a: usize, b: usize) -> C {
        self.costs[a][b]
    }
}

fn node_point(from: Point, requests: &[Request], node: usize) -> Point {
    if node == 0 {
        return from;
    }
    let r = &requests[(node - 1) / 2];
    if node % 2 == 1 {
        r.origin
    } else {
        r.destination
    }
}

fn node_label(requests: &[Request], node: usize) -> String {
    if node == 0 {
        return "start".into();
    }
    let r = &requests[(node - 1) / 2];
    if node % 2 == 1 {
        format!("S{}", r.id)
    } else {
        format!("D{}", r.id)
    }
}

/// Whether a node must be visited: origins of onboard requests are skipped.
fn node_used(requests: &[Request], node: usize) -> bool {
    node == 0 || node.is_multiple_of(2) || !requests[(node - 1) / 2].onboard
}

impl LegTable<OctileCost> {
    /// Constrained shortest-route costs on the radio map.
    pub fn routed(map: &RadioMap, from: Point, requests: &[Request], threshold_db: f64) -> Result<Self> {
        let n = Self::node_count(requests);
        let grid = map.grid;
        for node in (0..n).filter(|&k| node_used(requests, k)) {
            let c = grid.cell_of(node_point(from, requests, node));
            if !map.feasible(c, threshold_db) {
                let which = if node == 0 { "from" } else if node % 2 == 1 { "origin" } else { "destination" };
                return Err(Error::InfeasibleEndpoint { which, i: c.i, j: c.j });
            }
        }
        let mut costs = vec![vec![OctileCost::ZERO; n]; n];
        for a in (0..n).filter(|&k| node_used(requests, k)) {
            let sp = shortest_paths(map, grid.cell_of(node_point(from, requests, a)), threshold_db);
            for b in (0..n).filter(|&k| node_used(requests, k)) {
                let cb = grid.cell_of(node_point(from, requests, b));
                costs[a][b] = sp.cost_to(cb).ok_or_else(|| Error::Unreachable {
                    leg: format!("{} -> {}", node_label(requests, a), node_label(requests, b)),
                })?;
            }
        }
        Ok(LegTable { costs })
    }
}

impl LegTable<Meters> {
    /// Straight-line distances, ignoring the radio map.
    pub fn euclidean(from: Point, requests: &[Request]) -> Self {
        let n = Self::node_count(requests);
        let costs = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| Meters(node_point(from, requests, a).distance(node_point(from, requests, b))))
                    .collect()
            })
            .collect();
        LegTable { costs }
    }
}

fn event(requests: &[Request], r: usize, kind: EventKind) -> ServiceEvent {
    let q = &requests[r];
    ServiceEvent {
        kind,
        passenger: q.id,
        point: match kind {
            EventKind::Pickup => q.origin,
            EventKind::Dropoff => q.destination,
        },
    }
}

fn event_node(r: usize, kind: EventKind) -> usize {
    match kind {
        EventKind::Pickup => 1 + 2 * r,
        EventKind::Dropoff => 2 + 2 * r,
    }
}

fn check_onboard(requests: &[Request], seats: usize) -> Result<()> {
    let onboard = requests.iter().filter(|r| r.onboard).count();
    if onboard > seats {
        return Err(Error::State(format!("{onboard} passengers onboard with {seats} seats")));
    }
    Ok(())
}

struct Search<'a, C> {
    table: &'a LegTable<C>,
    requests: &'a [Request],
    best: Option<(C, Vec<(usize, EventKind)>)>,
    trail: Vec<(usize, EventKind)>,
}

impl<C: Cost> Search<'_, C> {
    fn bounded(&self, cost: C) -> bool {
        matches!(&self.best, Some((b, _)) if cost >= *b)
    }

    fn offer(&mut self, cost: C) {
        if !self.bounded(cost) {
            self.best = Some((cost, self.trail.clone()));
        }
    }

    fn finish(self) -> Plan<C> {
        let (cost, trail) = self.best.unwrap_or_default();
        Plan {
            sequence: EventSequence {
                events: trail.iter().map(|&(r, k)| event(self.requests, r, k)).collect(),
            },
            cost,
        }
    }

    /// Whole requests one after another, onboard ones first.
    fn sequential(&mut self, node: usize, cost: C, used: &mut [bool]) {
        if self.bounded(cost) {
            return;
        }
        if used.iter().all(|&u| u) {
            self.offer(cost);
            return;
        }
        let onboard_left = (0..used.len()).any(|r| !used[r] && self.requests[r].onboard);
        for r in 0..used.len() {
            if used[r] || (onboard_left && !self.requests[r].onboard) {
                continue;
            }
            used[r] = true;
            let (d, c) = if self.requests[r].onboard {
                (event_node(r, EventKind::Dropoff), cost + self.table.cost(node, 2 + 2 * r))
            } else {
                self.trail.push((r, EventKind::Pickup));
                let c = cost + self.table.cost(node, 1 + 2 * r) + self.table.cost(1 + 2 * r, 2 + 2 * r);
                (event_node(r, EventKind::Dropoff), c)
            };
            self.trail.push((r, EventKind::Dropoff));
            self.sequential(d, c, used);
            self.trail.pop();
            if !self.requests[r].onboard {
                self.trail.pop();
            }
            used[r] = false;
        }
    }

    /// Any interleaving of pickups and drop-offs within capacity.
    fn interleaved(&mut self, node: usize, cost: C, state: &mut [u8], onboard: usize, seats: usize) {
        if self.bounded(cost) {
            return;
        }
        if state.iter().all(|&s| s == 2) {
            self.offer(cost);
            return;
        }
        for r in 0..state.len() {
            let kind = match state[r] {
                0 if onboard < seats => EventKind::Pickup,
                1 => EventKind::Dropoff,
                _ => continue,
            };
            let next = event_node(r, kind);
            let c = cost + self.table.cost(node, next);
            state[r] += 1;
            self.trail.push((r, kind));
            let load = if kind == EventKind::Pickup { onboard + 1 } else { onboard - 1 };
            self.interleaved(next, c, state, load, seats);
            self.trail.pop();
            state[r] -= 1;
        }
    }
}

/// Optimal sequential (one request at a time) order for a cost table.
pub fn solve_sequential<C: Cost>(table: &LegTable<C>, requests: &[Request]) -> Result<Plan<C>> {
    if requests.len() > CPTSP_MAX_REQUESTS {
        return Err(Error::Config(format!(
            "CPTSP search supports at most {CPTSP_MAX_REQUESTS} requests, got {}",
            requests.len()
        )));
    }
    let mut s = Search {
        table,
        requests,
        best: None,
        trail: Vec::new(),
    };
    s.sequential(0, C::default(), &mut vec![false; requests.len()]);
    Ok(s.finish())
}

/// Optimal capacity-constrained interleaving for a cost table.
pub fn solve_interleaved<C: Cost>(table: &LegTable<C>, requests: &[Request], seats: usize) -> Result<Plan<C>> {
    if requests.len() > PDPCC_MAX_REQUESTS {
        return Err(Error::Config(format!(
            "PDPCC search supports at most {PDPCC_MAX_REQUESTS} requests, got {}",
            requests.len()
        )));
    }
    check_onboard(requests, seats)?;
    let mut state: Vec<u8> = requests.iter().map(|r| u8::from(r.onboard)).collect();
    let onboard = requests.iter().filter(|r| r.onboard).count();
    let mut s = Search {
        table,
        requests,
        best: None,
        trail: Vec::new(),
    };
    s.interleaved(0, C::default(), &mut state, onboard, seats);
    Ok(s.finish())
}

/// Sequential service: each passenger is picked up and dropped off before
/// the next one. Onboard passengers are delivered first.
pub fn cptsp_order(requests: &[Request], from: Point, map: &RadioMap, threshold_db: f64) -> Result<Plan<OctileCost>> {
    let table = LegTable::routed(map, from, requests, threshold_db)?;
    solve_sequential(&table, requests)
}

/// Ride-sharing service with at most `seats` passengers onboard.
pub fn pdpcc_order(
    requests: &[Request],
    from: Point,
    seats: usize,
    map: &RadioMap,
    threshold_db: f64,
) -> Result<Plan<OctileCost>> {
    let table = LegTable::routed(map, from, requests, threshold_db)?;
    solve_interleaved(&table, requests, seats)
}
