//! Snapshot serialization.
//!
//! Two interchangeable on-disk forms, both carrying the same records:
//!
//! * **JSONL** — one JSON object per line:
//!   `{"replica":0,"t":1.0,"points":[[x],[x]]}` in one dimension,
//!   `[[x,y],…]` in two; a `"truncated":true` field appears only on
//!   capped replicas. Grep-able and diff-able, the default.
//! * **binary** — for large ensembles. Layout: magic `VKSN`, format
//!   version `u16 = 1`, dimension `u16`, then per record: replica `u32`,
//!   truncated flag `u8`, time `f64`, point count `u64`, then
//!   `count × d` coordinates as `f64`. All integers and floats are
//!   little-endian.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ensemble::EnsembleResult;

const MAGIC: &[u8; 4] = b"VKSN";
const VERSION: u16 = 1;

/// One configuration of one replica at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub replica: usize,
    pub t: f64,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

/// Flatten an ensemble into records, trimming points to `d` coordinates.
pub fn records(result: &EnsembleResult, d: usize) -> Vec<SnapshotRecord> {
    let mut out = Vec::new();
    for r in &result.replicas {
        for (t, pts) in &r.snapshots {
            out.push(SnapshotRecord {
                replica: r.replica,
                t: *t,
                points: pts.iter().map(|p| p[..d].to_vec()).collect(),
                truncated: r.truncated,
            });
        }
    }
    out
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[SnapshotRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<SnapshotRecord>> {
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotRecord = serde_json::from_str(&line)
            .map_err(|e| data_err(format!("snapshot line {}: {e}", ln + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_binary<W: Write>(mut w: W, d: usize, records: &[SnapshotRecord]) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(d as u16).to_le_bytes()).map_err(io_err)?;
    for rec in records {
        w.write_all(&(rec.replica as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&[rec.truncated as u8]).map_err(io_err)?;
        w.write_all(&rec.t.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(rec.points.len() as u64).to_le_bytes()).map_err(io_err)?;
        for p in &rec.points {
            if p.len() != d {
                return Err(data_err(format!(
                    "point with {} coordinates in a {d}-dimensional snapshot",
                    p.len()
                )));
            }
            for &c in p {
                w.write_all(&c.to_le_bytes()).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<SnapshotRecord>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(data_err("not a snapshot file (bad magic)".into()));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(data_err(format!("unsupported snapshot format version {version}")));
    }
    let d = read_u16(&mut r)? as usize;
    if d == 0 || d > 2 {
        return Err(data_err(format!("snapshot dimension {d} out of range")));
    }
    let mut out = Vec::new();
    loop {
        let mut first = [0u8; 4];
        match r.read_exact(&mut first) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(io_err(e)),
        }
        let replica = u32::from_le_bytes(first) as usize;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag).map_err(io_err)?;
        let t = read_f64(&mut r)?;
        let count = read_u64(&mut r)?;
        let mut points = Vec::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            let mut p = Vec::with_capacity(d);
            for _ in 0..d {
                p.push(read_f64(&mut r)?);
            }
            points.push(p);
        }
        out.push(SnapshotRecord { replica, t, points, truncated: flag[0] != 0 });
    }
    Ok(out)
}

fn io_err(e: io::Error) -> Error {
    Error::Io(e)
}

fn data_err(msg: String) -> Error {
    Error::Io(io::Error::new(io::ErrorKind::InvalidData, msg))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(f64::from_le_bytes(b))
}
