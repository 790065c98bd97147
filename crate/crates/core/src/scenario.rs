//! Experiment description: geometry, base stations, buildings, passengers and
//! vehicle parameters, loaded from a JSON document and validated.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geom::{GridGeometry, Point};

pub const DEFAULT_ACTION_COUNT: usize = 15;
pub const DEFAULT_MAX_STEPS: usize = 2500;

/// A ground base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gbs {
    pub position: Point,
    pub height: f64,
    #[serde(rename = "tx_power_P_dBm")]
    pub tx_power_dbm: f64,
    #[serde(rename = "load_factor_l")]
    pub load_factor: f64,
    #[serde(rename = "gain_G_dB", default)]
    pub gain_db: f64,
    #[serde(rename = "carrier_freq_fc_GHz")]
    pub carrier_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassengerRequest {
    pub id: usize,
    #[serde(rename = "origin_S")]
    pub origin: Point,
    #[serde(rename = "destination_D")]
    pub destination: Point,
    #[serde(default)]
    pub arrival_slot: usize,
}

/// Building heights in meters, one value per map cell, stored row-major with
/// the row index running along x.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRaster {
    n: usize,
    heights: Vec<f64>,
}

impl BuildingRaster {
    pub fn flat(n: usize) -> Self {
        BuildingRaster {
            n,
            heights: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::validation(
                "raster shape",
                format!("building raster must be square, got {n} rows of uneven length"),
            ));
        }
        Ok(BuildingRaster {
            n,
            heights: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn height(&self, i: usize, j: usize) -> f64 {
        self.heights[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, h: f64) {
        self.heights[i * self.n + j] = h;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.heights.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Parses a whitespace- or comma-separated grid, one raster row per line.
    pub fn parse_grid(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        field: "building_raster".into(),
                        message: format!("line {}: {e}", lineno + 1),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_side: f64,
    pub cell_size: f64,
    pub altitude: f64,
    pub speed: f64,
    pub slot_duration: f64,
    pub seats: usize,
    pub sinr_threshold_db: f64,
    pub start_position: Point,
    pub gbs: Vec<Gbs>,
    pub buildings: BuildingRaster,
    pub passengers: Vec<PassengerRequest>,
    pub max_steps: usize,
    pub action_count: usize,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn grid(&self) -> GridGeometry {
        GridGeometry::new(self.n_cells(), self.cell_size)
    }

    /// `N_C = L / Δ_C`.
    pub fn n_cells(&self) -> usize {
        (self.area_side / self.cell_size).round() as usize
    }

    /// Distance flown in one time slot.
    pub fn step_length(&self) -> f64 {
        self.speed * self.slot_duration
    }

    /// Number of selectable headings (`k + 1`).
    pub fn heading_count(&self) -> usize {
        self.action_count + 1
    }

    pub fn with_threshold(&self, threshold_db: f64) -> Scenario {
        Scenario {
            sinr_threshold_db: threshold_db,
            ..self.clone()
        }
    }

    /// Checks every structural rule; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("area_side_L", self.area_side),
            ("cell_size_delta_C", self.cell_size),
            ("altitude_H", self.altitude),
            ("speed_V", self.speed),
            ("slot_duration", self.slot_duration),
            ("sinr_threshold_dB", self.sinr_threshold_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation("finite", format!("{name} is not finite")));
            }
        }
        if self.area_side <= 0.0 || self.cell_size <= 0.0 {
            return Err(Error::validation(
                "positive geometry",
                "area_side_L and cell_size_delta_C must be positive",
            ));
        }
        let ratio = self.area_side / self.cell_size;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::validation(
                "integral grid",
                format!("area_side_L / cell_size_delta_C = {ratio} is not a positive integer"),
            ));
        }
        if self.altitude <= 0.0 {
            return Err(Error::validation("positive altitude", "altitude_H must be positive"));
        }
        if self.speed <= 0.0 || self.slot_duration <= 0.0 {
            return Err(Error::validation(
                "positive motion",
                "speed_V and slot_duration must be positive",
            ));
        }
        if self.seats < 1 {
            return Err(Error::validation("seats", "seats_N_seat must be at least 1"));
        }
        if self.action_count < 3 {
            return Err(Error::validation("action count", "action_count_k must be at least 3"));
        }
        if self.max_steps < 1 {
            return Err(Error::validation("max steps", "max_steps_T_max must be at least 1"));
        }
        if !self.start_position.in_square(self.area_side) {
            return Err(Error::validation(
                "out of bounds",
                format!("start_position {:?} is out of bounds", self.start_position),
            ));
        }
        if self.gbs.len() < 2 {
            return Err(Error::validation(
                "more than one GBS",
                format!("gbs_list needs at least 2 entries, got {}", self.gbs.len()),
            ));
        }
        for (m, g) in self.gbs.iter().enumerate() {
            if !(0.0..=1.0).contains(&g.load_factor) {
                return Err(Error::validation(
                    "load factor",
                    format!("gbs_list[{m}].load_factor_l = {} not in [0, 1]", g.load_factor),
                ));
            }
            if g.height <= 0.0 {
                return Err(Error::validation(
                    "gbs height",
                    format!("gbs_list[{m}].height must be positive"),
                ));
            }
            if g.carrier_ghz <= 0.0 || !g.tx_power_dbm.is_finite() || !g.gain_db.is_finite() {
                return Err(Error::validation(
                    "gbs radio",
                    format!("gbs_list[{m}] has a non-positive frequency or non-finite power"),
                ));
            }
            if !g.position.in_square(self.area_side) {
                return Err(Error::validation(
                    "out of bounds",
                    format!("gbs_list[{m}].position {:?} is out of bounds", g.position),
                ));
            }
        }
        let n = self.n_cells();
        if self.buildings.n() != n {
            return Err(Error::validation(
                "raster shape",
                format!("building_raster is {0}x{0}, map is {n}x{n}", self.buildings.n()),
            ));
        }
        if self.buildings.heights.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::validation(
                "raster heights",
                "building heights must be finite and non-negative",
            ));
        }
        for (k, p) in self.passengers.iter().enumerate() {
            if p.id != k {
                return Err(Error::validation(
                    "passenger ids",
                    format!("passengers[{k}].id is {}, expected {k}", p.id),
                ));
            }
            for (what, pt) in [("origin_S", p.origin), ("destination_D", p.destination)] {
                if !pt.in_square(self.area_side) {
                    return Err(Error::validation(
                        "out of bounds",
                        format!("passenger {k} {what} {pt:?} is out of bounds"),
                    ));
                }
            }
            if p.origin == p.destination {
                return Err(Error::validation(
                    "distinct endpoints",
                    format!("passenger {k} has origin_S equal to destination_D"),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        let mut put = |k: &str, v: Value| {
            obj.insert(k.to_string(), v);
        };
        put("area_side_L", self.area_side.into());
        put("cell_size_delta_C", self.cell_size.into());
        put("altitude_H", self.altitude.into());
        put("speed_V", self.speed.into());
        put("slot_duration", self.slot_duration.into());
        put("seats_N_seat", self.seats.into());
        put("sinr_threshold_dB", self.sinr_threshold_db.into());
        put("start_position", serde_json::to_value(self.start_position).unwrap());
        put("gbs_list", serde_json::to_value(&self.gbs).unwrap());
        put("building_raster", serde_json::to_value(self.buildings.rows()).unwrap());
        put("passengers", serde_json::to_value(&self.passengers).unwrap());
        put("max_steps_T_max", self.max_steps.into());
        put("action_count_k", self.action_count.into());
        put("rng_seed", self.rng_seed.into());
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

const KNOWN_FIELDS: &[&str] = &[
    "area_side_L",
    "cell_size_delta_C",
    "altitude_H",
    "speed_V",
    "slot_duration",
    "seats_N_seat",
    "sinr_threshold_dB",
    "start_position",
    "gbs_list",
    "building_raster",
    "passengers",
    "max_steps_T_max",
    "action_count_k",
    "rng_seed",
];

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T> {
    let v = obj.get(name).ok_or_else(|| Error::Parse {
        field: name.into(),
        message: "missing field".into(),
    })?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse {
        field: name.into(),
        message: e.to_string(),
    })
}

fn field_or<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str, default: T) -> Result<T> {
    if obj.contains_key(name) {
        field(obj, name)
    } else {
        Ok(default)
    }
}

/// Parses and validates a scenario document. `base_dir` resolves a building
/// raster given as `{"file": "..."}`.
pub fn load_scenario_str(doc: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let root: Value = serde_json::from_str(doc).map_err(|e| Error::Parse {
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| Error::Parse {
        field: "<document>".into(),
        message: "expected a JSON object".into(),
    })?;
    if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        return Err(Error::Parse {
            field: unknown.clone(),
            message: "unknown field".into(),
        });
    }

    let area_side: f64 = field(obj, "area_side_L")?;
    let cell_size: f64 = field(obj, "cell_size_delta_C")?;
    let buildings = match obj.get("building_raster") {
        None | Some(Value::Null) => {
            let n = if cell_size > 0.0 {
                (area_side / cell_size).round().max(0.0) as usize
            } else {
                0
            };
            BuildingRaster::flat(n)
        }
        Some(Value::Object(r)) => {
            let file: String = field(r, "file").map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse {
                    field: "building_raster.file".into(),
                    message,
                },
                other => other,
            })?;
            let path = match base_dir {
                Some(dir) => dir.join(&file),
                None => PathBuf::from(&file),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse {
                field: "building_raster.file".into(),
                message: format!("{}: {e}", path.display()),
            })?;
            BuildingRaster::parse_grid(&text)?
        }
        Some(_) => BuildingRaster::from_rows(field(obj, "building_raster")?)?,
    };

    let scenario = Scenario {
        area_side,
        cell_size,
        altitude: field(obj, "altitude_H")?,
        speed: field(obj, "speed_V")?,
        slot_duration: field(obj, "slot_duration")?,
        seats: field(obj, "seats_N_seat")?,
        sinr_threshold_db: field(obj, "sinr_threshold_dB")?,
        start_position: field(obj, "start_position")?,
        gbs: field(obj, "gbs_list")?,
        buildings,
        passengers: field(obj, "passengers")?,
        max_steps: field_or(obj, "max_steps_T_max", DEFAULT_MAX_STEPS)?,
        action_count: field_or(obj, "action_count_k", DEFAULT_ACTION_COUNT)?,
        rng_seed: field_or(obj, "rng_seed", 0)?,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text, path.parent())
}

/// Draws `count` passenger requests uniformly over the area. The first
/// `early` arrive at slot 0; the rest arrive uniformly in `1..=latest_slot`.
///
/// A convenience for building synthetic instances; it makes no claim about
/// real demand patterns.
pub fn random_passengers<R: Rng>(
    rng: &mut R,
    grid: GridGeometry,
    count: usize,
    early: usize,
    latest_slot: usize,
) -> Vec<PassengerRequest> {
    let mut out = Vec::with_capacity(count);
    let n = grid.n;
    for id in 0..count {
        let pick = |rng: &mut R| {
            grid.center(crate::geom::Cell::new(rng.gen_range(0..n), rng.gen_range(0..n)))
        };
        let origin = pick(rng);
        let mut destination = pick(rng);
        while destination == origin {
            destination = pick(rng);
        }
        let arrival_slot = if id < early || latest_slot == 0 {
            0
        } else {
            rng.gen_range(1..=latest_slot)
        };
        out.push(PassengerRequest {
            id,
            origin,
            destination,
            arrival_slot,
        });
    }
    out
}
