use serde::{Deserialize, Serialize};

use super::EnvState;
use crate::radio::RadioMap;
use crate::scenario::Scenario;

/// Weights of the potential function and the task reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    /// Pickups, deliveries, elapsed time, revisits, low-SINR cell.
    pub omega: [f64; 5],
    /// Discount applied to the successor potential.
    pub zeta: f64,
    /// Bonus paid on the transition that completes every request.
    pub task_reward: f64,
    /// Optional weight on the remaining direct flight distance of the known
    /// requests, in area sides. Zero disables the term.
    pub progress: f64,
    /// Direct penalty for ending a slot in a cell below the threshold, paid
    /// outside the potential. Zero disables the term.
    pub outage: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            omega: [5.0, 10.0, 1.0, 1.0, 10.0],
            zeta: 0.99,
            task_reward: 100.0,
            progress: 0.0,
            outage: 0.0,
        }
    }
}

/// `Φ = ω₁·z_s + ω₂·z_d − ω₃·z_time − ω₄·z_rep − ω₅·z_γ`.
///
/// `z_s` and `z_d` count passengers ever boarded and served, `z_time` is
/// `t / T_max`, `z_rep` is the uncertainty of the current cell and `z_γ`
/// flags a current cell below the SINR threshold. With a nonzero
/// `progress` weight, [`remaining_work`] is subtracted as well.
pub fn potential(state: &EnvState, map: &RadioMap, s: &Scenario, w: &RewardWeights) -> f64 {
    let cell = map.grid.cell_of(state.position);
    let z_s = state.boarded_count() as f64;
    let z_d = state.served_count() as f64;
    let z_time = state.t as f64 / s.max_steps as f64;
    let z_rep = state.uncertainty(map.grid.index(cell));
    let z_gamma = if map.sinr(cell) < s.sinr_threshold_db { 1.0 } else { 0.0 };
    let [w1, w2, w3, w4, w5] = w.omega;
    let base = w1 * z_s + w2 * z_d - w3 * z_time - w4 * z_rep - w5 * z_gamma;
    if w.progress == 0.0 {
        base
    } else {
        base - w.progress * remaining_work(state, s)
    }
}

/// Length of a greedy tour through the known open stops, divided by the
/// area side. From the current position the tour repeatedly flies straight
/// to the nearest stop that is allowed next: a pickup while a seat is free,
/// or the drop-off of a passenger on board. Ties go to the lower passenger
/// index, pickups first.
pub fn remaining_work(state: &EnvState, s: &Scenario) -> f64 {
    // 0 = waiting, 1 = on board, 2 = done.
    let mut stage: Vec<u8> = state
        .passengers
        .iter()
        .map(|st| match (st.known && !st.served, st.onboard) {
            (false, _) => 2,
            (true, false) => 0,
            (true, true) => 1,
        })
        .collect();
    let mut seats = state.seats_remaining;
    let mut p = state.position;
    let mut total = 0.0;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for (k, (req, &g)) in s.passengers.iter().zip(&stage).enumerate() {
            let target = match g {
                0 if seats > 0 => req.origin,
                1 => req.destination,
                _ => continue,
            };
            let d = p.distance(target);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let Some((d, k)) = best else { break };
        total += d;
        let req = &s.passengers[k];
        if stage[k] == 0 {
            p = req.origin;
            seats -= 1;
        } else {
            p = req.destination;
            seats += 1;
        }
        stage[k] += 1;
    }
    total / s.area_side
}

/// `r̄ + ζ·Φ(next) − Φ(prev)`, with `r̄` paid only on successful completion.
pub fn shaped_reward(prev: f64, next: f64, completed: bool, w: &RewardWeights) -> f64 {
    let task = if completed { w.task_reward } else { 0.0 };
    task + w.zeta * next - prev
}
