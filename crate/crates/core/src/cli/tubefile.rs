//! Binary tube files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field     | type             |
//! |-----------|------------------|
//! | magic     | `b"VTUB"`        |
//! | version   | `u32` (1)        |
//! | ndim      | `u32`            |
//! | shape     | `ndim × u32`     |
//! | lo        | `ndim × f64`     |
//! | hi        | `ndim × f64`     |
//! | periodic  | `ndim × u8`      |
//! | stamps    | `u32` count, then `count × f64` |
//! | payload   | `count × len × f32`, row-major, one field per stamp |
//!
//! An all-time invariant tube is stored with a single NaN stamp.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::statespace::{Grid, ValueField, ValueTube};

pub const MAGIC: &[u8; 4] = b"VTUB";
pub const VERSION: u32 = 1;

pub fn write_tube<W: Write>(tube: &ValueTube, mut w: W) -> Result<()> {
    let g = tube.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.ndim() as u32).to_le_bytes())?;
    for &n in g.shape() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &x in g.lo().iter().chain(g.hi()) {
        w.write_all(&x.to_le_bytes())?;
    }
    for &p in g.periodic() {
        w.write_all(&[p as u8])?;
    }
    let stamps: Vec<f64> = if tube.is_invariant() { vec![f64::NAN] } else { tube.times().to_vec() };
    w.write_all(&(stamps.len() as u32).to_le_bytes())?;
    for t in &stamps {
        w.write_all(&t.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(4 * g.len());
    for f in tube.fields() {
        buf.clear();
        for v in f.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::TubeFile(format!("truncated {what}: {e}")))?;
    Ok(b)
}

fn take_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(take::<4, _>(r, what)?))
}

fn take_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(take::<8, _>(r, what)?))
}

pub fn read_tube<R: Read>(mut r: R) -> Result<ValueTube> {
    if &take::<4, _>(&mut r, "magic")? != MAGIC {
        return Err(Error::TubeFile("not a tube file (bad magic)".into()));
    }
    let version = take_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::TubeFile(format!("unsupported version {version}")));
    }
    let ndim = take_u32(&mut r, "dimension count")? as usize;
    if ndim == 0 || ndim > crate::statespace::MAX_DIM {
        return Err(Error::TubeFile(format!("unsupported dimension count {ndim}")));
    }
    let shape = (0..ndim).map(|_| take_u32(&mut r, "shape").map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let lo = (0..ndim).map(|_| take_f64(&mut r, "lower bounds")).collect::<Result<Vec<_>>>()?;
    let hi = (0..ndim).map(|_| take_f64(&mut r, "upper bounds")).collect::<Result<Vec<_>>>()?;
    let periodic = (0..ndim).map(|_| take::<1, _>(&mut r, "periodic flags").map(|b| b[0] != 0)).collect::<Result<Vec<_>>>()?;
    let grid = Arc::new(Grid::new(&lo, &hi, &shape, &periodic).map_err(|e| Error::TubeFile(format!("bad grid: {e}")))?);
    let count = take_u32(&mut r, "stamp count")? as usize;
    if count == 0 {
        return Err(Error::TubeFile("no stamps".into()));
    }
    let stamps = (0..count).map(|_| take_f64(&mut r, "stamps")).collect::<Result<Vec<_>>>()?;

    let mut fields = Vec::with_capacity(count);
    let mut buf = vec![0u8; 4 * grid.len()];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| Error::TubeFile("payload shorter than shape × stamps".into()))?;
        let values = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        fields.push(ValueField::new(grid.clone(), values)?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::TubeFile("payload longer than shape × stamps".into()));
    }
    if count == 1 && stamps[0].is_nan() {
        return Ok(ValueTube::invariant(fields.pop().unwrap()));
    }
    ValueTube::new(stamps, fields).map_err(|e| Error::TubeFile(e.to_string()))
}

pub fn save_tube(tube: &ValueTube, path: &Path) -> Result<()> {
    write_tube(tube, BufWriter::new(File::create(path)?))
}

pub fn load_tube(path: &Path) -> Result<ValueTube> {
    read_tube(BufReader::new(File::open(path)?))
}
