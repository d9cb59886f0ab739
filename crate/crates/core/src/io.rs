//! Binary snapshots: `"MXMT"`, version, `n`, box length and component count,
//! then one little-endian `f64` array per component in x-fastest order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{extend_by_zero, DomainMask, EmState, Grid3, MatterState, MultiField};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"MXMT";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: Grid3,
    pub comps: Vec<Vec<f64>>,
}

impl Snapshot {
    /// `u₁, u₂` (six components) followed by the zero-extended matter field.
    pub fn from_state(u: &EmState, v: &MatterState, mask: &DomainMask) -> Result<Self> {
        if u.grid() != mask.grid() {
            return Err(Error::GridMismatch);
        }
        let MultiField { comps: vbar, .. } = extend_by_zero(v, mask);
        let mut comps: Vec<Vec<f64>> = u.u1.comps.iter().chain(&u.u2.comps).cloned().collect();
        comps.extend(vbar);
        Ok(Self { grid: u.grid(), comps })
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        out.write_all(&(self.grid.n() as u32).to_le_bytes())?;
        out.write_all(&self.grid.box_len().to_le_bytes())?;
        out.write_all(&(self.comps.len() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.grid.len());
        for c in &self.comps {
            buf.clear();
            for x in c {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut input)? as usize;
        let mut b = [0u8; 8];
        read_exact(&mut input, &mut b)?;
        let grid = Grid3::new(n, f64::from_le_bytes(b)).map_err(|e| Error::Snapshot(e.to_string()))?;
        let count = read_u32(&mut input)? as usize;
        let mut bytes = vec![0u8; 8 * grid.len()];
        let mut comps = Vec::with_capacity(count);
        for _ in 0..count {
            read_exact(&mut input, &mut bytes)?;
            comps.push(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        if input.read(&mut b)? != 0 {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        Ok(Self { grid, comps })
    }
}

fn read_exact(input: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Snapshot("truncated".into()),
        _ => Error::Io(e),
    })
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VectorField3;

    fn sample() -> (EmState, MatterState, DomainMask) {
        let g = Grid3::new(8, 3.0).unwrap();
        let u = EmState::new(
            VectorField3::from_fn(g, |x| [x[0], x[1].sin(), 1.0]),
            VectorField3::from_fn(g, |x| [x[2], -x[0], x[1] * x[2]]),
        )
        .unwrap();
        let mask = DomainMask::centered_box(g, 2).unwrap();
        let v = MatterState::from_values(3, (0..24).map(|k| k as f64 * 0.5).collect()).unwrap();
        (u, v, mask)
    }

    #[test]
    fn round_trip() {
        let (u, v, mask) = sample();
        let s = Snapshot::from_state(&u, &v, &mask).unwrap();
        let mut bytes = Vec::new();
        s.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 9 * 8 * 512);
        assert_eq!(&bytes[..4], b"MXMT");
        let back = Snapshot::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.comps[0], u.u1.comps[0]);
        assert_eq!(back.comps[5], u.u2.comps[2]);
    }

    #[test]
    fn rejects_corruption() {
        let (u, v, mask) = sample();
        let mut bytes = Vec::new();
        Snapshot::from_state(&u, &v, &mask).unwrap().write_to(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Snapshot::read_from(bad.as_slice()), Err(Error::Snapshot(_))));
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(Snapshot::read_from(short), Err(Error::Snapshot(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Snapshot::read_from(long.as_slice()), Err(Error::Snapshot(_))));
    }
}
