use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cost::{Meters, OctileCost};
use super::dijkstra::{route_cells, Path};
use super::ordering::{
    cptsp_order, pdpcc_order, solve_interleaved, EventKind, EventSequence, LegTable, Request, ServiceEvent,
};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::radio::RadioMap;
use crate::scenario::Scenario;
use crate::trace::{EpisodeTrace, Event, PassengerTimeline, TraceStep};

/// Classical baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One passenger at a time, routed on SINR-feasible cells.
    Cptsp,
    /// Capacity-constrained ride-sharing, routed on SINR-feasible cells.
    Pdpcc,
    /// Ride-sharing order flown in straight lines, ignoring SINR.
    Straight,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cptsp, Method::Pdpcc, Method::Straight];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cptsp => "cptsp",
            Method::Pdpcc => "pdpcc",
            Method::Straight => "straight",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected cptsp, pdpcc or straight)")))
    }
}

/// Re-solves the ordering over every unserved known request from the
/// vehicle's current position. Onboard requests only need their drop-off.
pub fn replan_on_arrival(
    method: Method,
    position: Point,
    requests: &[Request],
    seats: usize,
    map: &RadioMap,
    threshold_db: f64,
) -> Result<EventSequence> {
    Ok(match method {
        Method::Cptsp => cptsp_order(requests, position, map, threshold_db)?.sequence,
        Method::Pdpcc => pdpcc_order(requests, position, seats, map, threshold_db)?.sequence,
        Method::Straight => solve_interleaved(&LegTable::<Meters>::euclidean(position, requests), requests, seats)?.sequence,
    })
}

/// Straight segments through the event points, sampled so that no sample
/// is more than `step_length` from the previous one.
pub fn straight_line_path(seq: &EventSequence, from: Point, step_length: f64) -> Path {
    let mut path = Path::single(from);
    let mut cur = from;
    for e in &seq.events {
        let d = cur.distance(e.point);
        let n = (d / step_length).ceil().max(1.0) as usize;
        if d > 0.0 {
            for k in 1..=n {
                path.points.push(cur.lerp(e.point, k as f64 / n as f64));
            }
        }
        path.total_length += d;
        path.annotations.push((path.points.len() - 1, service_to_event(e)));
        cur = e.point;
    }
    path
}

fn service_to_event(e: &ServiceEvent) -> Event {
    match e.kind {
        EventKind::Pickup => Event::Board(e.passenger),
        EventKind::Dropoff => Event::Serve(e.passenger),
    }
}

#[derive(Debug, Clone)]
struct Waypoint {
    point: Point,
    edge: OctileCost,
    events: Vec<ServiceEvent>,
}

/// Waypoints flying `seq` from `from`, which must be a cell center for the
/// routed methods.
fn waypoints(
    method: Method,
    seq: &EventSequence,
    from: Point,
    map: &RadioMap,
    threshold_db: f64,
    step_length: f64,
) -> Result<VecDeque<Waypoint>> {
    let mut out: VecDeque<Waypoint> = VecDeque::new();
    let mut cur = from;
    for e in &seq.events {
        let target = match method {
            Method::Straight => {
                let d = cur.distance(e.point);
                let n = (d / step_length).ceil().max(1.0) as usize;
                for k in 1..=n {
                    out.push_back(Waypoint {
                        point: cur.lerp(e.point, k as f64 / n as f64),
                        edge: OctileCost::ZERO,
                        events: Vec::new(),
                    });
                }
                e.point
            }
            _ => {
                let (_, cells) = route_cells(map, cur, e.point, threshold_db)?;
                let mut prev = cells[0];
                if cells.len() == 1 {
                    out.push_back(Waypoint {
                        point: map.grid.center(prev),
                        edge: OctileCost::ZERO,
                        events: Vec::new(),
                    });
                }
                for &c in &cells[1..] {
                    let diagonal = c.i != prev.i && c.j != prev.j;
                    out.push_back(Waypoint {
                        point: map.grid.center(c),
                        edge: if diagonal { OctileCost::DIAG } else { OctileCost::AXIS },
                        events: Vec::new(),
                    });
                    prev = c;
                }
                map.grid.center(prev)
            }
        };
        out.back_mut().expect("every event adds a waypoint").events.push(*e);
        cur = target;
    }
    Ok(out)
}

/// A classical method flown slot by slot with arrival-driven replanning.
#[derive(Debug, Clone)]
pub struct ClassicalRun {
    pub method: Method,
    pub threshold_db: f64,
    pub trace: EpisodeTrace,
    /// Every waypoint reached, with the events served there.
    pub route: Path,
    /// Exact routed length on the cell graph; `None` for straight flight.
    pub route_cost: Option<OctileCost>,
    /// Each (re)plan with the slot it was made in.
    pub plans: Vec<(usize, EventSequence)>,
    /// Events in the order they happened.
    pub executed: EventSequence,
}

const ARRIVE_EPS: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Rider {
    known: bool,
    onboard: bool,
    served: bool,
    board: Option<usize>,
    serve: Option<usize>,
}

/// Flies `method` on the scenario. The vehicle advances `step_length` per
/// slot along its route; requests revealed mid-flight trigger a re-solve at
/// the next waypoint, or immediately when the vehicle is idle.
pub fn run_classical(s: &Scenario, map: &RadioMap, method: Method, threshold_db: f64) -> Result<ClassicalRun> {
    let step = s.step_length();
    let mut riders: Vec<Rider> = s
        .passengers
        .iter()
        .map(|p| Rider {
            known: p.arrival_slot == 0,
            onboard: false,
            served: false,
            board: None,
            serve: None,
        })
        .collect();
    let routed = method != Method::Straight;
    let mut pos = s.start_position;
    if routed {
        let c = map.grid.cell_of(pos);
        if !map.feasible(c, threshold_db) {
            return Err(Error::InfeasibleEndpoint { which: "from", i: c.i, j: c.j });
        }
    }
    let mut route = Path::single(pos);
    let mut cost = OctileCost::ZERO;
    let mut plans = Vec::new();
    let mut executed = EventSequence::default();
    let mut seats = s.seats;
    let mut trace = EpisodeTrace::default();
    trace.steps.push(TraceStep {
        t: 0,
        position: pos,
        travelled: 0.0,
        action: None,
        reward: 0.0,
        sinr_db: map.sinr_at(pos),
        seats_remaining: seats,
        onboard: 0,
        events: Vec::new(),
    });

    let plan = |pos: Point, riders: &[Rider], t: usize, plans: &mut Vec<(usize, EventSequence)>| {
        let requests: Vec<Request> = s
            .passengers
            .iter()
            .zip(riders)
            .filter(|(_, r)| r.known && !r.served)
            .map(|(p, r)| Request {
                id: p.id,
                origin: p.origin,
                destination: p.destination,
                onboard: r.onboard,
            })
            .collect();
        let seq = replan_on_arrival(method, pos, &requests, s.seats, map, threshold_db)?;
        let wps = waypoints(method, &seq, pos, map, threshold_db, step)?;
        plans.push((t, seq));
        Ok::<_, Error>(wps)
    };

    let mut queue = if riders.iter().any(|r| r.known) {
        plan(pos, &riders, 0, &mut plans)?
    } else {
        VecDeque::new()
    };
    let mut replan_pending = false;
    let mut at_waypoint = true;
    let mut success = riders.is_empty();
    let mut t = 0;
    while !success && t < s.max_steps {
        let mut remaining = step;
        let mut travelled = 0.0;
        let mut events = Vec::new();
        while let Some(w) = queue.front() {
            let d = pos.distance(w.point);
            if d > remaining + ARRIVE_EPS {
                if remaining == 0.0 {
                    break;
                }
                pos = pos.lerp(w.point, remaining / d);
                travelled += remaining;
                at_waypoint = false;
                break;
            }
            let w = queue.pop_front().unwrap();
            remaining = (remaining - d).max(0.0);
            travelled += d;
            pos = w.point;
            at_waypoint = true;
            cost = cost + w.edge;
            if d > 0.0 {
                route.points.push(pos);
                route.total_length += d;
            }
            for e in &w.events {
                let r = &mut riders[e.passenger];
                match e.kind {
                    EventKind::Pickup => {
                        r.onboard = true;
                        r.board = Some(t + 1);
                        seats -= 1;
                    }
                    EventKind::Dropoff => {
                        r.onboard = false;
                        r.served = true;
                        r.serve = Some(t + 1);
                        seats += 1;
                    }
                }
                let ev = service_to_event(e);
                events.push(ev);
                route.annotations.push((route.points.len() - 1, ev));
                executed.events.push(*e);
            }
            if replan_pending {
                replan_pending = false;
                queue = plan(pos, &riders, t + 1, &mut plans)?;
            }
        }
        t += 1;
        let mut revealed = false;
        for (p, r) in s.passengers.iter().zip(riders.iter_mut()) {
            if !r.known && p.arrival_slot <= t {
                r.known = true;
                revealed = true;
            }
        }
        if revealed {
            if queue.is_empty() || at_waypoint {
                queue = plan(pos, &riders, t, &mut plans)?;
            } else {
                replan_pending = true;
            }
        }
        success = riders.iter().all(|r| r.served);
        trace.steps.push(TraceStep {
            t,
            position: pos,
            travelled,
            action: None,
            reward: 0.0,
            sinr_db: map.sinr_at(pos),
            seats_remaining: seats,
            onboard: riders.iter().filter(|r| r.onboard).count(),
            events,
        });
    }
    trace.passengers = s
        .passengers
        .iter()
        .zip(&riders)
        .map(|(p, r)| PassengerTimeline {
            id: p.id,
            arrival_slot: p.arrival_slot,
            board_time: r.board,
            serve_time: r.serve,
        })
        .collect();
    trace.complete = true;
    Ok(ClassicalRun {
        method,
        threshold_db,
        trace,
        route,
        route_cost: routed.then_some(cost),
        plans,
        executed,
    })
}
