//! Episode traces shared by the environment, the classical executors and the
//! metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Board(usize),
    Serve(usize),
    Clamp,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Board(n) => write!(f, "board:{n}"),
            Event::Serve(n) => write!(f, "serve:{n}"),
            Event::Clamp => f.write_str("clamp"),
        }
    }
}

/// State at the end of slot `t`. Row 0 is the initial placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub position: Point,
    /// Distance flown during the slot; equals the chord for straight moves.
    pub travelled: f64,
    pub action: Option<usize>,
    pub reward: f64,
    pub sinr_db: f64,
    pub seats_remaining: usize,
    pub onboard: usize,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerTimeline {
    pub id: usize,
    pub arrival_slot: usize,
    pub board_time: Option<usize>,
    pub serve_time: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub passengers: Vec<PassengerTimeline>,
    /// Set once the episode has terminated (success or step limit).
    pub complete: bool,
}

impl EpisodeTrace {
    /// Number of flown slots.
    pub fn moves(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// CSV with columns `t,x,y,travelled,action,reward,sinr_dB,seats,event`. Multiple
    /// events in one slot are joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,travelled,action,reward,sinr_dB,seats,event\n");
        for s in &self.steps {
            let action = s.action.map(|a| a.to_string()).unwrap_or_default();
            let events = if s.events.is_empty() {
                "none".to_string()
            } else {
                s.events.iter().map(Event::to_string).collect::<Vec<_>>().join(";")
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.t, s.position.x, s.position.y, s.travelled, action, s.reward, s.sinr_db, s.seats_remaining, events
            ));
        }
        out
    }
}
