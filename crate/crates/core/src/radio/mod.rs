//! Expected-SINR radio maps built from analytical channel models.

mod channel;
mod los;
mod map;

pub use channel::{amplitude_db_to_power, dbm_to_mw, free_space_gain, linear_to_db, los_gain, nlos_gain};
pub use los::{classify_los, Visibility};
pub use map::{
    best_server, build_map, expected_sinr_cell, received_powers, sinr_pad, window, ChannelParams,
    RadioMap, DEFAULT_NOISE_DBM,
};
