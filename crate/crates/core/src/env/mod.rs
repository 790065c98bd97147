//! The ride-sharing MDP: deterministic flight dynamics on a constant-speed,
//! constant-altitude vehicle, pickup and drop-off mechanics, the visit-based
//! uncertainty map and potential-based reward shaping.

mod observe;
mod reward;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use observe::{observe, Observation, PASSENGER_FEATURES, UAM_FEATURES};
pub use reward::{potential, remaining_work, shaped_reward, RewardWeights};

use crate::error::{Error, Result};
use crate::geom::{Cell, Point};
use crate::radio::RadioMap;
use crate::scenario::Scenario;
use crate::trace::{EpisodeTrace, Event, PassengerTimeline, TraceStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Trajectory rows in the observation (`N_1`).
    pub history_len: usize,
    /// Side of the local SINR and uncertainty windows.
    pub window_side: usize,
    /// Service radius around pickup and drop-off points; `None` means half a
    /// step.
    pub capture_radius: Option<f64>,
    pub reward: RewardWeights,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            history_len: 8,
            window_side: 10,
            capture_radius: None,
            reward: RewardWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerStatus {
    pub arrival_slot: usize,
    pub known: bool,
    pub onboard: bool,
    pub served: bool,
    pub board_time: Option<usize>,
    pub serve_time: Option<usize>,
}

/// World state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub position: Point,
    /// Past positions, most recent last; starts with the start position.
    pub trajectory: Vec<Point>,
    /// Free seats after each entry of `trajectory`.
    pub seats_history: Vec<usize>,
    pub seats_remaining: usize,
    pub t: usize,
    pub passengers: Vec<PassengerStatus>,
    visits: Vec<u32>,
    total_visits: u32,
    pub done: bool,
    pub success: bool,
}

impl EnvState {
    pub fn onboard_count(&self) -> usize {
        self.passengers.iter().filter(|p| p.onboard).count()
    }

    pub fn boarded_count(&self) -> usize {
        self.passengers.iter().filter(|p| p.board_time.is_some()).count()
    }

    pub fn served_count(&self) -> usize {
        self.passengers.iter().filter(|p| p.served).count()
    }

    /// Fraction of counted steps spent in `cell`.
    pub fn uncertainty(&self, index: usize) -> f64 {
        self.visits[index] as f64 / self.total_visits as f64
    }

    pub fn uncertainty_grid(&self) -> Vec<f64> {
        let total = self.total_visits as f64;
        self.visits.iter().map(|&v| v as f64 / total).collect()
    }

    pub fn total_visits(&self) -> u32 {
        self.total_visits
    }
}

/// Outcome of one transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub events: Vec<Event>,
}

/// Heading of action `a` out of `k + 1` evenly spaced directions; action 0
/// points along +x and indices advance counter-clockwise.
pub fn heading_of(a: usize, k: usize) -> Result<f64> {
    if a > k {
        return Err(Error::Action { action: a, max: k });
    }
    Ok(a as f64 * TAU / (k + 1) as f64)
}

/// Unit displacement for action `a`. Axis-aligned headings are exact.
fn direction(a: usize, k: usize) -> Result<(f64, f64)> {
    let n = k + 1;
    if a < n && (4 * a).is_multiple_of(n) {
        return Ok(match (4 * a) / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        });
    }
    let theta = heading_of(a, k)?;
    Ok((theta.cos(), theta.sin()))
}

/// Environment bound to one scenario and radio map.
#[derive(Debug, Clone)]
pub struct Env<'a> {
    pub scenario: &'a Scenario,
    pub map: &'a RadioMap,
    pub config: EnvConfig,
}

impl<'a> Env<'a> {
    pub fn new(scenario: &'a Scenario, map: &'a RadioMap, config: EnvConfig) -> Self {
        Env {
            scenario,
            map,
            config,
        }
    }

    pub fn capture_radius(&self) -> f64 {
        self.config
            .capture_radius
            .unwrap_or(self.scenario.step_length() / 2.0)
    }

    pub fn action_count(&self) -> usize {
        self.scenario.heading_count()
    }

    fn cell_index(&self, p: Point) -> usize {
        let grid = self.map.grid;
        grid.index(grid.cell_of(p))
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        self.map.grid.cell_of(p)
    }

    pub fn reset(&self) -> (EnvState, Observation) {
        let s = self.scenario;
        let start = s.start_position;
        let mut visits = vec![0u32; self.map.grid.len()];
        visits[self.cell_index(start)] = 1;
        let state = EnvState {
            position: start,
            trajectory: vec![start],
            seats_history: vec![s.seats],
            seats_remaining: s.seats,
            t: 0,
            passengers: s
                .passengers
                .iter()
                .map(|p| PassengerStatus {
                    arrival_slot: p.arrival_slot,
                    known: p.arrival_slot == 0,
                    onboard: false,
                    served: false,
                    board_time: None,
                    serve_time: None,
                })
                .collect(),
            visits,
            total_visits: 1,
            done: s.passengers.is_empty(),
            success: s.passengers.is_empty(),
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        observe(state, self.scenario, self.map, &self.config)
    }

    pub fn potential(&self, state: &EnvState) -> f64 {
        potential(state, self.map, self.scenario, &self.config.reward)
    }

    /// Advances one slot.
    pub fn step(&self, state: &mut EnvState, action: usize) -> Result<Transition> {
        if state.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        let s = self.scenario;
        let (dx, dy) = direction(action, s.action_count)?;
        let prev_potential = self.potential(state);
        let mut events = Vec::new();

        let step = s.step_length();
        let tentative = Point::new(state.position.x + step * dx, state.position.y + step * dy);
        let clamped = Point::new(
            tentative.x.clamp(0.0, s.area_side),
            tentative.y.clamp(0.0, s.area_side),
        );
        if clamped != tentative {
            events.push(Event::Clamp);
        }
        state.position = clamped;
        let t_next = state.t + 1;

        for p in state.passengers.iter_mut() {
            if !p.known && p.arrival_slot <= t_next {
                p.known = true;
            }
        }

        let radius = self.capture_radius();
        let mut boarded_now = Vec::new();
        for (n, req) in s.passengers.iter().enumerate() {
            let p = &mut state.passengers[n];
            if state.seats_remaining == 0 {
                break;
            }
            if p.known && p.board_time.is_none() && req.origin.distance(clamped) <= radius {
                p.onboard = true;
                p.board_time = Some(t_next);
                state.seats_remaining -= 1;
                boarded_now.push(n);
                events.push(Event::Board(n));
            }
        }
        for (n, req) in s.passengers.iter().enumerate() {
            let p = &mut state.passengers[n];
            // Serving waits at least one slot after boarding.
            if p.onboard && !boarded_now.contains(&n) && req.destination.distance(clamped) <= radius {
                p.onboard = false;
                p.served = true;
                p.serve_time = Some(t_next);
                state.seats_remaining += 1;
                events.push(Event::Serve(n));
            }
        }

        let cell = self.cell_index(clamped);
        state.visits[cell] += 1;
        state.total_visits += 1;
        state.t = t_next;
        state.trajectory.push(clamped);
        state.seats_history.push(state.seats_remaining);

        state.success = state.passengers.iter().all(|p| p.served);
        state.done = state.success || t_next >= s.max_steps;

        let next_potential = self.potential(state);
        let mut reward = shaped_reward(prev_potential, next_potential, state.success, &self.config.reward);
        if self.config.reward.outage != 0.0 && !self.map.feasible(self.cell_of(clamped), s.sinr_threshold_db) {
            reward -= self.config.reward.outage;
        }
        Ok(Transition {
            observation: self.observe(state),
            reward,
            done: state.done,
            events,
        })
    }
}

/// Records a rollout into an [`EpisodeTrace`].
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    trace: EpisodeTrace,
}

impl TraceRecorder {
    pub fn start(env: &Env<'_>, state: &EnvState) -> Self {
        let mut r = TraceRecorder {
            trace: EpisodeTrace::default(),
        };
        r.push(env, state, None, 0.0, Vec::new());
        r
    }

    pub fn record(&mut self, env: &Env<'_>, state: &EnvState, action: usize, tr: &Transition) {
        self.push(env, state, Some(action), tr.reward, tr.events.clone());
    }

    fn push(&mut self, env: &Env<'_>, state: &EnvState, action: Option<usize>, reward: f64, events: Vec<Event>) {
        let travelled = self
            .trace
            .steps
            .last()
            .map_or(0.0, |prev| prev.position.distance(state.position));
        self.trace.steps.push(TraceStep {
            t: state.t,
            position: state.position,
            travelled,
            action,
            reward,
            sinr_db: env.map.sinr_at(state.position),
            seats_remaining: state.seats_remaining,
            onboard: state.onboard_count(),
            events,
        });
    }

    pub fn finish(mut self, state: &EnvState) -> EpisodeTrace {
        self.trace.passengers = state
            .passengers
            .iter()
            .enumerate()
            .map(|(id, p)| PassengerTimeline {
                id,
                arrival_slot: p.arrival_slot,
                board_time: p.board_time,
                serve_time: p.serve_time,
            })
            .collect();
        self.trace.complete = state.done;
        self.trace
    }
}
