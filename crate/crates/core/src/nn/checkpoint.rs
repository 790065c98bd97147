use std::io::{BufRead, BufReader, Read, Write};

use super::layers::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "UAMPLAN-CHECKPOINT 1";

/// Parameters plus the JSON configuration they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_json: String,
    pub params: ParamStore,
}

/// Text header (magic, one-line JSON config, parameter names and shapes)
/// followed by the values as little-endian `f64`.
pub fn write_checkpoint<W: Write>(mut w: W, config_json: &str, params: &ParamStore) -> Result<()> {
    if config_json.contains('\n') {
        return Err(Error::Format("checkpoint config must be a single line".into()));
    }
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "config {config_json}")?;
    writeln!(w, "params {}", params.len())?;
    for (name, t) in params.names().iter().zip(params.tensors()) {
        writeln!(w, "{name} {} {}", t.rows, t.cols)?;
    }
    writeln!(w, "data")?;
    let mut blob = Vec::with_capacity(params.scalar_count() * 8);
    for t in params.tensors() {
        for v in &t.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&blob)?;
    Ok(())
}

fn line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut s = String::new();
    if r.read_line(&mut s)? == 0 {
        return Err(Error::Format("unexpected end of checkpoint header".into()));
    }
    Ok(s.trim_end_matches('\n').to_string())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let mut r = BufReader::new(r);
    if line(&mut r)? != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let config_json = line(&mut r)?
        .strip_prefix("config ")
        .ok_or_else(|| Error::Format("missing config line".into()))?
        .to_string();
    let count: usize = line(&mut r)?
        .strip_prefix("params ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("missing parameter count".into()))?;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let l = line(&mut r)?;
        let parts: Vec<&str> = l.split(' ').collect();
        let [name, rows, cols] = parts[..] else {
            return Err(Error::Format(format!("bad parameter line `{l}`")));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad shape in `{l}`")));
        shapes.push((name.to_string(), parse(rows)?, parse(cols)?));
    }
    if line(&mut r)? != "data" {
        return Err(Error::Format("missing data marker".into()));
    }
    let mut params = ParamStore::new();
    let mut buf = [0u8; 8];
    for (name, rows, cols) in shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("truncated data for `{name}`")))?;
            data.push(f64::from_le_bytes(buf));
        }
        params.add(name, Tensor { rows, cols, data });
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint data".into()));
    }
    Ok(Checkpoint { config_json, params })
}
