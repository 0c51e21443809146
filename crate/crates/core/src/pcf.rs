//! PCF: a small little-endian binary container for fields.
//!
//! Layout: magic `PCF1`, kind (u8: 0 space, 1 space-time), dim (u8), two zero
//! bytes, n (u32), steps (u32, 0 for space fields), t_end (f64), count (u64),
//! then `count` f64 samples, slice after slice in grid order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::torus_fields::{Field, SpaceGrid, SpaceTimeField, TimeGrid};

const MAGIC: &[u8; 4] = b"PCF1";
const HEADER: usize = 32;

#[derive(Clone, Debug)]
pub enum Stored {
    Space(Field),
    SpaceTime(SpaceTimeField),
}

impl Stored {
    pub fn grid(&self) -> SpaceGrid {
        match self {
            Stored::Space(f) => *f.grid(),
            Stored::SpaceTime(u) => *u.grid(),
        }
    }

    /// The space field, or the last slice of a space-time field.
    pub fn final_slice(&self) -> Field {
        match self {
            Stored::Space(f) => f.clone(),
            Stored::SpaceTime(u) => u.last().clone(),
        }
    }

    pub fn into_space_time(self) -> Result<SpaceTimeField> {
        match self {
            Stored::SpaceTime(u) => Ok(u),
            Stored::Space(_) => Err(Error::Format("expected a space-time field, found a space field".into())),
        }
    }
}

pub fn encode(item: &Stored) -> Vec<u8> {
    let (kind, grid, steps, t_end, values): (u8, SpaceGrid, u32, f64, Vec<f64>) = match item {
        Stored::Space(f) => (0, *f.grid(), 0, 0.0, f.values().to_vec()),
        Stored::SpaceTime(u) => (1, *u.grid(), u.times().steps as u32, u.times().t_end, u.flat_values()),
    };
    let mut out = Vec::with_capacity(HEADER + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[kind, grid.dim() as u8, 0, 0]);
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&steps.to_le_bytes());
    out.extend_from_slice(&t_end.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Stored> {
    let bad = |m: &str| Error::Format(m.to_string());
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(bad("not a PCF file"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (kind, dim) = (bytes[4], bytes[5] as usize);
    let n = u32_at(8) as usize;
    let steps = u32_at(12) as usize;
    let t_end = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let count = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")) as usize;
    if bytes.len() != HEADER + 8 * count {
        return Err(bad("payload length does not match the header"));
    }
    let grid = SpaceGrid::new(dim, n).map_err(|e| Error::Format(e.to_string()))?;
    let values: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    match kind {
        0 => {
            if count != grid.len() {
                return Err(bad("sample count does not match the grid"));
            }
            Ok(Stored::Space(Field::new(grid, values)?))
        }
        1 => {
            let times = TimeGrid::new(t_end, steps).map_err(|e| Error::Format(e.to_string()))?;
            if count != grid.len() * times.slices() {
                return Err(bad("sample count does not match the grids"));
            }
            let slices = values.chunks_exact(grid.len()).map(|c| Field::new(grid, c.to_vec())).collect::<Result<_>>()?;
            Ok(Stored::SpaceTime(SpaceTimeField::new(times, slices)?))
        }
        k => Err(Error::Format(format!("unknown field kind {k}"))),
    }
}

pub fn write(path: &Path, item: &Stored) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(item))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Stored> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = SpaceGrid::new(2, 8).unwrap();
        let f = crate::synthetic::smooth(g, 3, 1);
        match decode(&encode(&Stored::Space(f.clone()))).unwrap() {
            Stored::Space(h) => assert_eq!(h.values(), f.values()),
            _ => panic!("kind changed"),
        }
        let times = TimeGrid::new(0.3, 4).unwrap();
        let u = SpaceTimeField::from_fn(g, times, |t, x| t * x[0] - x[1]);
        let v = decode(&encode(&Stored::SpaceTime(u.clone()))).unwrap().into_space_time().unwrap();
        assert_eq!(v.flat_values(), u.flat_values());
        assert_eq!(*v.times(), times);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = SpaceGrid::new(1, 8).unwrap();
        let mut b = encode(&Stored::Space(Field::zeros(g)));
        b.pop();
        assert!(matches!(decode(&b), Err(Error::Format(_))));
        assert!(matches!(decode(b"nope"), Err(Error::Format(_))));
    }
}
