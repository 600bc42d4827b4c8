//! Binary map snapshots.
//!
//! Layout: one ASCII header line `rtg-splat v1 count=<N>\n`, then `N`
//! little-endian 44-byte records: id `u64`, mean `3×f32`, radius `f32`,
//! opacity `f32`, colour `3×f32`, displacement `f32`. Values are stored at
//! single precision, so a round trip is exact only up to `f32` rounding.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mapper::UncertaintyLedger;
use crate::splat::{Gaussian, GaussianMap};

const MAGIC: &str = "rtg-splat v1 count=";
pub const RECORD_BYTES: usize = 44;

pub fn write_snapshot<W: Write>(mut w: W, map: &GaussianMap, ledger: &UncertaintyLedger) -> Result<()> {
    writeln!(w, "{MAGIC}{}", map.len())?;
    let mut rec = Vec::with_capacity(RECORD_BYTES);
    for (id, g) in map.iter() {
        rec.clear();
        rec.extend_from_slice(&id.to_le_bytes());
        let disp = ledger.displacement(id).unwrap_or(f64::INFINITY);
        let floats = [
            g.mean.x, g.mean.y, g.mean.z, g.radius, g.opacity, g.color[0], g.color[1], g.color[2], disp,
        ];
        for f in floats {
            rec.extend_from_slice(&(f as f32).to_le_bytes());
        }
        w.write_all(&rec)?;
    }
    Ok(())
}

/// Read a snapshot. Ledger entries get `last_update = 0`.
pub fn read_snapshot<R: BufRead>(mut r: R) -> Result<(GaussianMap, UncertaintyLedger)> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let count: usize = header
        .trim_end()
        .strip_prefix(MAGIC)
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::Snapshot(format!("bad header {:?}", header.trim_end())))?;
    let mut ids = Vec::with_capacity(count);
    let mut gs = Vec::with_capacity(count);
    let mut disps = Vec::with_capacity(count);
    let mut rec = [0u8; RECORD_BYTES];
    for i in 0..count {
        r.read_exact(&mut rec)
            .map_err(|e| Error::Snapshot(format!("record {i} of {count}: {e}")))?;
        let f = |k: usize| f32::from_le_bytes(rec[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as f64;
        ids.push(u64::from_le_bytes(rec[..8].try_into().unwrap()));
        gs.push(Gaussian::new(Vector3::new(f(0), f(1), f(2)), f(3), f(4), [f(5), f(6), f(7)]));
        disps.push(f(8));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Snapshot("trailing bytes after last record".into()));
    }
    let mut ledger = UncertaintyLedger::new();
    for (&id, &d) in ids.iter().zip(&disps) {
        if d.is_infinite() {
            ledger.insert_newborn(id, 0);
        } else {
            ledger.record(id, d, 0);
        }
    }
    let map = GaussianMap::from_parts(ids, gs).ok_or_else(|| Error::Snapshot("ids not strictly increasing".into()))?;
    Ok((map, ledger))
}

pub fn save(path: &Path, map: &GaussianMap, ledger: &UncertaintyLedger) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(&mut w, map, ledger)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(GaussianMap, UncertaintyLedger)> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}
