//! Communication-aware ride-sharing trajectory planning for an urban air
//! vehicle.
//!
//! The crate builds expected-SINR radio maps from analytical channel models
//! ([`radio`]), models the pickup/drop-off task as a Markov decision process
//! with potential-based reward shaping ([`env`]), solves it with exact
//! classical baselines ([`planners`]) and with a multi-source hybrid-attention
//! policy ([`msha`]) trained by clipped policy optimization ([`ppo`]), and
//! scores the resulting trajectories ([`eval`]).

pub mod env;
pub mod error;
pub mod eval;
pub mod geom;
pub mod msha;
pub mod nn;
pub mod planners;
pub mod ppo;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use geom::{Cell, GridGeometry, Point};
pub use radio::{build_map, ChannelParams, RadioMap};
pub use scenario::{load_scenario, load_scenario_str, Gbs, PassengerRequest, Scenario};
