//! File formats for paths.
//!
//! CSV: header `t,V`, 17 significant digits per value.
//! Binary: 16-byte header (`FBMK`, version, node count, sample count, all
//! little-endian `u32` after the magic), then the times, then the values, as
//! little-endian `f64`.

use std::io::{Read, Write};

use crate::engine::{PathSample, Scheme};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FBMK";
pub const BINARY_VERSION: u32 = 1;

/// Formats a double with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_path_csv<W: Write>(path: &PathSample, mut out: W) -> Result<()> {
    writeln!(out, "t,V")?;
    for (t, v) in path.times.iter().zip(&path.values) {
        writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
    }
    Ok(())
}

/// Reads `t,V` rows. Scheme and seed are not stored in the CSV and come back
/// as defaults.
pub fn read_path_csv<R: Read>(mut input: R) -> Result<PathSample> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "t,V" => {}
        other => return Err(Error::Parse(format!("expected header 't,V', got {other:?}"))),
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("malformed row '{line}'")))?;
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    Ok(PathSample { times, values, scheme: Scheme::default(), seed: 0, nodes: 0 })
}

fn parse(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

pub fn write_path_binary<W: Write>(path: &PathSample, mut out: W) -> Result<()> {
    let count = u32::try_from(path.len())
        .map_err(|_| Error::Parameter("path too long for the binary format".into()))?;
    let nodes = u32::try_from(path.nodes)
        .map_err(|_| Error::Parameter("too many nodes for the binary format".into()))?;
    out.write_all(&MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&nodes.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    for x in path.times.iter().chain(&path.values) {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_path_binary<R: Read>(mut input: R) -> Result<PathSample> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(Error::Parse("missing FBMK magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
    let version = word(4);
    if version != BINARY_VERSION {
        return Err(Error::Parse(format!("unsupported binary version {version}")));
    }
    let nodes = word(8) as usize;
    let count = word(12) as usize;
    let mut read_block = || -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * count];
        input.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let times = read_block()?;
    let values = read_block()?;
    Ok(PathSample { times, values, scheme: Scheme::default(), seed: 0, nodes })
}
