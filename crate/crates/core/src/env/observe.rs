use super::{EnvConfig, EnvState};
use crate::radio::{sinr_pad, window, RadioMap};
use crate::scenario::Scenario;

pub const UAM_FEATURES: usize = 3;
pub const PASSENGER_FEATURES: usize = 7;

/// Multi-source view of the state. Coordinates and distances are divided by
/// the area side; seat counts by the seat capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `history_len` rows of `(x, y, seats)`, oldest first.
    pub uam_rows: Vec<[f64; UAM_FEATURES]>,
    /// One row `(S_x, S_y, D_x, D_y, d, onboard, served)` per passenger.
    pub passenger_rows: Vec<[f64; PASSENGER_FEATURES]>,
    /// False for requests that have not arrived yet; their rows are zero.
    pub passenger_mask: Vec<bool>,
    /// Expected SINR (dB) around the vehicle, row-major along x.
    pub sinr_window: Vec<f64>,
    pub uncertainty_window: Vec<f64>,
    pub window_side: usize,
    pub sinr_threshold_db: f64,
}

/// Out-of-map cells look fully explored.
pub const UNCERTAINTY_PAD: f64 = 1.0;

pub fn observe(state: &EnvState, s: &Scenario, map: &RadioMap, cfg: &EnvConfig) -> Observation {
    let l = s.area_side;
    let seats = s.seats as f64;
    let hist = cfg.history_len;
    let len = state.trajectory.len();
    let uam_rows = (0..hist)
        .map(|r| {
            // Row `hist - 1` is the current position; missing history
            // repeats the oldest entry.
            let back = hist - 1 - r;
            let k = len.saturating_sub(1 + back);
            let p = state.trajectory[k];
            [p.x / l, p.y / l, state.seats_history[k] as f64 / seats]
        })
        .collect();

    let mut passenger_rows = Vec::with_capacity(s.passengers.len());
    let mut passenger_mask = Vec::with_capacity(s.passengers.len());
    for (req, st) in s.passengers.iter().zip(&state.passengers) {
        if !st.known {
            passenger_rows.push([0.0; PASSENGER_FEATURES]);
            passenger_mask.push(false);
            continue;
        }
        let d = if st.served {
            0.0
        } else if st.onboard {
            state.position.distance(req.destination)
        } else {
            state.position.distance(req.origin)
        };
        passenger_rows.push([
            req.origin.x / l,
            req.origin.y / l,
            req.destination.x / l,
            req.destination.y / l,
            d / l,
            if st.onboard { 1.0 } else { 0.0 },
            if st.served { 1.0 } else { 0.0 },
        ]);
        passenger_mask.push(true);
    }

    let center = map.grid.cell_of(state.position);
    let side = cfg.window_side;
    Observation {
        uam_rows,
        passenger_rows,
        passenger_mask,
        sinr_window: window(&map.sinr_db, map.grid, center, side, sinr_pad(s.sinr_threshold_db)),
        uncertainty_window: window(&state.uncertainty_grid(), map.grid, center, side, UNCERTAINTY_PAD),
        window_side: side,
        sinr_threshold_db: s.sinr_threshold_db,
    }
}
