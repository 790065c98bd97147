use super::*;
use crate::error::Error;
use crate::geom::{Cell, GridGeometry, Point};
use crate::synth::{map_from_fn, open_scenario, request, uniform_map};

fn grid(n: usize) -> GridGeometry {
    GridGeometry::new(n, 100.0)
}

fn c(i: usize, j: usize) -> Point {
    grid(10).center(Cell::new(i, j))
}

fn leg(map: &crate::RadioMap, a: Point, b: Point) -> OctileCost {
    route_cells(map, a, b, -5.0).unwrap().0
}

fn labels(seq: &EventSequence) -> String {
    seq.to_string()
}

#[test]
fn single_passenger_is_pickup_then_dropoff() {
    let map = uniform_map(grid(10), 0.0);
    let reqs = [Request::waiting(0, c(3, 3), c(7, 7))];
    let plan = cptsp_order(&reqs, c(0, 0), &map, -5.0).unwrap();
    assert_eq!(labels(&plan.sequence), "start-S0-D0");
    assert_eq!(plan.cost, OctileCost::new(0, 7));
    let shared = pdpcc_order(&reqs, c(0, 0), 2, &map, -5.0).unwrap();
    assert_eq!(shared, plan);
}

#[test]
fn two_passengers_take_the_cheaper_order() {
    let map = uniform_map(grid(10), 0.0);
    let start = c(0, 0);
    let reqs = [
        Request::waiting(0, c(9, 0), c(9, 9)),
        Request::waiting(1, c(1, 0), c(5, 0)),
    ];
    // 0 then 1: 9 + 9 + (8 + 1·√2 ... ) evaluated leg by leg.
    let order01 = leg(&map, start, c(9, 0)) + leg(&map, c(9, 0), c(9, 9)) + leg(&map, c(9, 9), c(1, 0)) + leg(&map, c(1, 0), c(5, 0));
    let order10 = leg(&map, start, c(1, 0)) + leg(&map, c(1, 0), c(5, 0)) + leg(&map, c(5, 0), c(9, 0)) + leg(&map, c(9, 0), c(9, 9));
    assert_eq!(order10, OctileCost::new(18, 0));
    assert!(order10 < order01);
    let plan = cptsp_order(&reqs, start, &map, -5.0).unwrap();
    assert_eq!(labels(&plan.sequence), "start-S1-D1-S0-D0");
    assert_eq!(plan.cost, order10);
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn three_passengers_match_all_six_orders() {
    let map = map_from_fn(grid(10), |cell| if cell.i == 5 && cell.j < 8 { -20.0 } else { 0.0 });
    let start = c(0, 0);
    let reqs = [
        Request::waiting(0, c(2, 2), c(8, 1)),
        Request::waiting(1, c(7, 6), c(1, 9)),
        Request::waiting(2, c(3, 7), c(9, 9)),
    ];
    let perms = permutations(3);
    assert_eq!(perms.len(), 6);
    let best = perms
        .iter()
        .map(|p| {
            let mut cur = start;
            let mut total = OctileCost::ZERO;
            for &r in p {
                total = total + leg(&map, cur, reqs[r].origin) + leg(&map, reqs[r].origin, reqs[r].destination);
                cur = reqs[r].destination;
            }
            total
        })
        .min()
        .unwrap();
    let plan = cptsp_order(&reqs, start, &map, -5.0).unwrap();
    assert_eq!(plan.cost, best);
    plan.sequence.validate(1, &[]).unwrap();
}

#[test]
fn colocated_origins_are_shared() {
    let map = uniform_map(grid(10), 0.0);
    let start = c(0, 0);
    let reqs = [
        Request::waiting(0, c(1, 0), c(9, 0)),
        Request::waiting(1, c(1, 0), c(8, 0)),
    ];
    // The six valid interleavings of S0, D0, S1, D1.
    let orders: [[(usize, bool); 4]; 6] = [
        [(0, true), (0, false), (1, true), (1, false)],
        [(0, true), (1, true), (0, false), (1, false)],
        [(0, true), (1, true), (1, false), (0, false)],
        [(1, true), (1, false), (0, true), (0, false)],
        [(1, true), (0, true), (1, false), (0, false)],
        [(1, true), (0, true), (0, false), (1, false)],
    ];
    let best = orders
        .iter()
        .map(|o| {
            let mut cur = start;
            let mut total = OctileCost::ZERO;
            for &(r, pick) in o {
                let p = if pick { reqs[r].origin } else { reqs[r].destination };
                total = total + leg(&map, cur, p);
                cur = p;
            }
            total
        })
        .min()
        .unwrap();
    assert_eq!(best, OctileCost::new(9, 0));
    let shared = pdpcc_order(&reqs, start, 2, &map, -5.0).unwrap();
    assert_eq!(shared.cost, best);
    assert_eq!(labels(&shared.sequence), "start-S0-S1-D1-D0");
    let single = cptsp_order(&reqs, start, &map, -5.0).unwrap();
    assert!(shared.cost < single.cost);
    let one_seat = pdpcc_order(&reqs, start, 1, &map, -5.0).unwrap();
    assert_eq!(one_seat.cost, single.cost);
}

#[test]
fn onboard_request_needs_only_its_dropoff() {
    let map = map_from_fn(grid(10), |cell| if cell == Cell::new(0, 9) { -20.0 } else { 0.0 });
    let reqs = [
        // The origin is infeasible but no longer visited.
        Request {
            onboard: true,
            ..Request::waiting(0, c(0, 9), c(4, 4))
        },
        Request::waiting(1, c(2, 2), c(6, 6)),
    ];
    let seq = replan_on_arrival(Method::Cptsp, c(3, 3), &reqs, 2, &map, -5.0).unwrap();
    assert_eq!(labels(&seq), "start-D0-S1-D1");
    seq.validate(2, &[0]).unwrap();
    let seq = replan_on_arrival(Method::Pdpcc, c(3, 3), &reqs, 2, &map, -5.0).unwrap();
    seq.validate(2, &[0]).unwrap();
    assert!(seq.events.iter().all(|e| !(e.passenger == 0 && e.kind == EventKind::Pickup)));
}

#[test]
fn arrival_after_everything_served_plans_it_alone() {
    let map = uniform_map(grid(10), 0.0);
    let reqs = [Request::waiting(4, c(2, 2), c(6, 6))];
    let seq = replan_on_arrival(Method::Pdpcc, c(9, 9), &reqs, 2, &map, -5.0).unwrap();
    assert_eq!(labels(&seq), "start-S4-D4");
}

#[test]
fn infeasible_service_point_is_reported() {
    let map = map_from_fn(grid(10), |cell| if cell == Cell::new(6, 6) { -20.0 } else { 0.0 });
    let reqs = [Request::waiting(0, c(2, 2), c(6, 6))];
    let err = cptsp_order(&reqs, c(0, 0), &map, -5.0).unwrap_err();
    assert!(matches!(err, Error::InfeasibleEndpoint { which: "destination", i: 6, j: 6 }));
}

#[test]
fn unreachable_leg_is_named() {
    let map = map_from_fn(grid(10), |cell| if cell.i == 5 { -20.0 } else { 0.0 });
    let reqs = [Request::waiting(3, c(2, 2), c(8, 8))];
    match cptsp_order(&reqs, c(0, 0), &map, -5.0).unwrap_err() {
        Error::Unreachable { leg } => assert_eq!(leg, "start -> D3"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn too_many_requests_is_a_config_error() {
    let map = uniform_map(grid(10), 0.0);
    let reqs: Vec<Request> = (0..8).map(|k| Request::waiting(k, c(k, 0), c(k, 9))).collect();
    assert!(matches!(cptsp_order(&reqs, c(0, 0), &map, -5.0), Err(Error::Config(_))));
    assert!(matches!(pdpcc_order(&reqs[..7], c(0, 0), 2, &map, -5.0), Err(Error::Config(_))));
}

#[test]
fn sequence_validation_catches_capacity_and_precedence() {
    let e = |kind, passenger| ServiceEvent {
        kind,
        passenger,
        point: Point::new(0.0, 0.0),
    };
    let over = EventSequence {
        events: vec![e(EventKind::Pickup, 0), e(EventKind::Pickup, 1), e(EventKind::Dropoff, 0), e(EventKind::Dropoff, 1)],
    };
    assert!(over.validate(2, &[]).is_ok());
    assert!(over.validate(1, &[]).is_err());
    let early = EventSequence {
        events: vec![e(EventKind::Dropoff, 0), e(EventKind::Pickup, 0)],
    };
    assert!(early.validate(2, &[]).is_err());
}

#[test]
fn straight_path_through_collinear_events_is_one_segment() {
    let seq = EventSequence {
        events: vec![
            ServiceEvent {
                kind: EventKind::Pickup,
                passenger: 0,
                point: Point::new(300.0, 0.0),
            },
            ServiceEvent {
                kind: EventKind::Dropoff,
                passenger: 0,
                point: Point::new(600.0, 0.0),
            },
        ],
    };
    let p = straight_line_path(&seq, Point::new(0.0, 0.0), 100.0);
    assert_eq!(p.points.len(), 7);
    assert_eq!(p.total_length, 600.0);
    assert!(p.points.iter().all(|q| q.y == 0.0));
    assert!(p.points.windows(2).all(|w| (w[0].distance(w[1]) - 100.0).abs() < 1e-9));
    assert_eq!(p.annotations, vec![(3, crate::trace::Event::Board(0)), (6, crate::trace::Event::Serve(0))]);
    let empty = straight_line_path(&EventSequence::default(), Point::new(5.0, 5.0), 100.0);
    assert_eq!(empty.points, vec![Point::new(5.0, 5.0)]);
}

#[test]
fn straight_path_cuts_through_obstacles() {
    // A wall at i = 4 for j <= 6: the router goes around, the straight line
    // crosses it.
    let map = map_from_fn(grid(10), |cell| if cell.i == 4 && cell.j <= 6 { -20.0 } else { 0.0 });
    let from = c(1, 3);
    let to = c(8, 3);
    let routed = dijkstra_leg(&map, from, to, -5.0).unwrap();
    let seq = EventSequence {
        events: vec![ServiceEvent {
            kind: EventKind::Pickup,
            passenger: 0,
            point: to,
        }],
    };
    let straight = straight_line_path(&seq, from, 100.0);
    assert!(straight.total_length < routed.total_length);
    assert!(routed.violations(&map, -5.0).is_empty());
    // Samples at x = 150, 250, ..., 850: only x = 450 lies in the wall.
    assert_eq!(straight.violations(&map, -5.0), vec![3]);
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!("greedy".parse::<Method>().is_err());
}

#[test]
fn executor_serves_a_single_passenger() {
    let s = open_scenario(10, vec![request(0, c(3, 0), c(6, 0), 0)]);
    let map = uniform_map(s.grid(), 0.0);
    let run = run_classical(&s, &map, Method::Cptsp, -5.0).unwrap();
    let tr = &run.trace;
    assert!(tr.complete);
    assert_eq!(tr.moves(), 6);
    assert_eq!(tr.passengers[0].board_time, Some(3));
    assert_eq!(tr.passengers[0].serve_time, Some(6));
    assert_eq!(run.route_cost, Some(OctileCost::new(6, 0)));
    assert_eq!(run.route.total_length, 600.0);
    assert_eq!(tr.steps.iter().map(|st| st.travelled).sum::<f64>(), 600.0);
    assert_eq!(run.executed.to_string(), "start-S0-D0");
}

#[test]
fn executor_replans_for_a_late_request() {
    let s = open_scenario(
        10,
        vec![
            request(0, c(0, 5), c(0, 9), 0),
            request(1, c(5, 0), c(9, 0), 3),
        ],
    );
    let map = uniform_map(s.grid(), 0.0);
    for m in Method::ALL {
        let run = run_classical(&s, &map, m, -5.0).unwrap();
        assert_eq!(run.plans.len(), 2, "{m}");
        assert_eq!(run.plans[1].0, 3);
        assert!(run.trace.passengers.iter().all(|p| p.serve_time.is_some()), "{m}");
        run.executed.validate(s.seats, &[]).unwrap();
    }
}

#[test]
fn executor_waits_for_requests_not_yet_known() {
    let s = open_scenario(10, vec![request(0, c(0, 2), c(0, 4), 5)]);
    let map = uniform_map(s.grid(), 0.0);
    let run = run_classical(&s, &map, Method::Pdpcc, -5.0).unwrap();
    let tr = &run.trace;
    assert!(tr.steps[1..=5].iter().all(|st| st.travelled == 0.0));
    assert_eq!(tr.passengers[0].board_time, Some(7));
    assert_eq!(tr.passengers[0].serve_time, Some(9));
}

#[test]
fn infeasible_start_fails_routed_methods_only() {
    let s = open_scenario(10, vec![request(0, c(3, 3), c(6, 6), 0)]);
    let map = map_from_fn(s.grid(), |cell| if cell == Cell::new(0, 0) { -20.0 } else { 0.0 });
    assert!(matches!(
        run_classical(&s, &map, Method::Cptsp, -5.0),
        Err(Error::InfeasibleEndpoint { which: "from", .. })
    ));
    let run = run_classical(&s, &map, Method::Straight, -5.0).unwrap();
    assert!(run.route_cost.is_none());
}
