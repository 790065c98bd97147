use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{amplitude_db_to_power, dbm_to_mw, linear_to_db, los_gain, nlos_gain};
use super::los::{classify_los, Visibility};
use crate::error::{Error, Result};
use crate::geom::{Cell, GridGeometry, Point};
use crate::scenario::Scenario;

pub const DEFAULT_NOISE_DBM: f64 = -96.0;

/// Receiver-side channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(rename = "noise_power_sigma2_dBm")]
    pub noise_dbm: f64,
    #[serde(rename = "altitude_H")]
    pub altitude: f64,
}

impl ChannelParams {
    pub fn for_scenario(s: &Scenario) -> Self {
        ChannelParams {
            noise_dbm: DEFAULT_NOISE_DBM,
            altitude: s.altitude,
        }
    }
}

/// Received power `P_m·h̄_m²` in mW from every base station at `p`.
pub fn received_powers(s: &Scenario, cp: &ChannelParams, p: Point) -> Result<Vec<f64>> {
    let grid = s.grid();
    s.gbs
        .iter()
        .map(|g| {
            let ground = g.position.distance(p);
            let d = ground.hypot(cp.altitude - g.height);
            let gain = match classify_los(g, p, cp.altitude, &s.buildings, grid) {
                Visibility::Los => los_gain(d, cp.altitude, g.carrier_ghz, g.gain_db)?,
                Visibility::Nlos => nlos_gain(d, cp.altitude, g.carrier_ghz, g.gain_db)?,
            };
            Ok(dbm_to_mw(g.tx_power_dbm) * amplitude_db_to_power(gain))
        })
        .collect()
}

/// Best expected SINR over candidate servers given each server's received
/// power and load factor. Returns `(linear SINR, serving index)`; ties go to
/// the lower index.
pub fn best_server(powers: &[f64], loads: &[f64], noise_mw: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (m, &p) in powers.iter().enumerate() {
        let interference: f64 = powers
            .iter()
            .zip(loads)
            .enumerate()
            .filter(|&(k, _)| k != m)
            .map(|(_, (q, l))| q * l)
            .sum();
        let sinr = p / (interference + noise_mw);
        if sinr > best.0 {
            best = (sinr, m);
        }
    }
    best
}

/// Expected SINR (dB) at the center of `cell` and the index of its server.
pub fn expected_sinr_cell(cell: Cell, s: &Scenario, cp: &ChannelParams) -> Result<(f64, usize)> {
    let p = s.grid().center(cell);
    let powers = received_powers(s, cp, p)?;
    let loads: Vec<f64> = s.gbs.iter().map(|g| g.load_factor).collect();
    let (sinr, m) = best_server(&powers, &loads, dbm_to_mw(cp.noise_dbm));
    Ok((linear_to_db(sinr), m))
}

/// Per-cell expected SINR grid over the service area.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub grid: GridGeometry,
    /// Row-major by `i`, in dB.
    pub sinr_db: Vec<f64>,
    pub serving: Vec<usize>,
}

/// Evaluates every cell of the scenario's grid. Cells are computed in
/// parallel; the result does not depend on the thread count.
pub fn build_map(s: &Scenario, cp: &ChannelParams) -> Result<RadioMap> {
    let grid = s.grid();
    let cells: Vec<Result<(f64, usize)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| expected_sinr_cell(grid.cell_at(k), s, cp))
        .collect();
    let mut sinr_db = Vec::with_capacity(grid.len());
    let mut serving = Vec::with_capacity(grid.len());
    for c in cells {
        let (v, m) = c?;
        sinr_db.push(v);
        serving.push(m);
    }
    Ok(RadioMap {
        grid,
        sinr_db,
        serving,
    })
}

/// Copies the `side x side` block of `values` whose anchor is `center`.
/// The anchor sits at offset `side / 2` along each axis; out-of-grid
/// entries are `pad`.
pub fn window(values: &[f64], grid: GridGeometry, center: Cell, side: usize, pad: f64) -> Vec<f64> {
    let half = (side / 2) as isize;
    let n = grid.n as isize;
    let mut out = Vec::with_capacity(side * side);
    for di in 0..side as isize {
        for dj in 0..side as isize {
            let i = center.i as isize - half + di;
            let j = center.j as isize - half + dj;
            if (0..n).contains(&i) && (0..n).contains(&j) {
                out.push(values[(i * n + j) as usize]);
            } else {
                out.push(pad);
            }
        }
    }
    out
}

/// Out-of-map entries of an SINR window sit 60 dB under the threshold.
pub fn sinr_pad(threshold_db: f64) -> f64 {
    threshold_db - 60.0
}

const MAGIC: &str = "UAMPLAN-RADIOMAP";

impl RadioMap {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn sinr(&self, c: Cell) -> f64 {
        self.sinr_db[self.grid.index(c)]
    }

    pub fn serving_gbs(&self, c: Cell) -> usize {
        self.serving[self.grid.index(c)]
    }

    /// SINR of the cell containing `p` (clamped onto the grid).
    pub fn sinr_at(&self, p: Point) -> f64 {
        self.sinr(self.grid.cell_of(p))
    }

    pub fn feasible(&self, c: Cell, threshold_db: f64) -> bool {
        self.sinr(c) >= threshold_db
    }

    pub fn local_window(&self, center: Point, side: usize, threshold_db: f64) -> Vec<f64> {
        window(
            &self.sinr_db,
            self.grid,
            self.grid.cell_of(center),
            side,
            sinr_pad(threshold_db),
        )
    }

    /// Writes the binary map: one text header line, then the SINR grid and
    /// the serving-index grid as little-endian `f64`, row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let o = self.grid.origin();
        writeln!(
            w,
            "{MAGIC} 1 n_cells={} cell_size={:?} origin={:?},{:?} grids=sinr_dB,serving_gbs",
            self.grid.n, self.grid.cell_size, o.x, o.y
        )?;
        let mut buf = Vec::with_capacity(16 * self.grid.len());
        for v in &self.sinr_db {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &m in &self.serving {
            buf.extend_from_slice(&(m as f64).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("radio map header is not terminated".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::Format("radio map header is not UTF-8".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) || parts.next() != Some("1") {
            return Err(Error::Format(format!("not a version-1 radio map: {header:?}")));
        }
        let mut n = None;
        let mut cell_size = None;
        for kv in parts {
            match kv.split_once('=') {
                Some(("n_cells", v)) => n = v.parse::<usize>().ok(),
                Some(("cell_size", v)) => cell_size = v.parse::<f64>().ok(),
                _ => {}
            }
        }
        let (n, cell_size) = match (n, cell_size) {
            (Some(n), Some(c)) if n > 0 => (n, c),
            _ => return Err(Error::Format(format!("incomplete radio map header: {header:?}"))),
        };
        let body = &bytes[nl + 1..];
        if body.len() != 16 * n * n {
            return Err(Error::Format(format!(
                "radio map body has {} bytes, expected {}",
                body.len(),
                16 * n * n
            )));
        }
        let floats: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (sinr, serving) = floats.split_at(n * n);
        Ok(RadioMap {
            grid: GridGeometry::new(n, cell_size),
            sinr_db: sinr.to_vec(),
            serving: serving.iter().map(|&m| m as usize).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// CSV dump with columns `i,j,x,y,sinr_dB,serving_gbs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,x,y,sinr_dB,serving_gbs\n");
        for c in self.grid.cells() {
            let p = self.grid.center(c);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.i,
                c.j,
                p.x,
                p.y,
                self.sinr(c),
                self.serving_gbs(c)
            ));
        }
        out
    }
}
