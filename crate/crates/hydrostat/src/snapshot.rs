//! Binary field-snapshot files: a fixed little-endian layout with a magic
//! tag, format version, grid header, and named per-field payloads. Round
//! trips are bit-exact.

use crate::error::{Error, Result};
use crate::grid::{BoundaryY, Grid, PressureProfile, ScalarField};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"HPE1";
const VERSION: u32 = 1;
const NAME_LEN: usize = 16;

/// One named field inside a snapshot: a full scalar field or an x-only
/// pressure profile.
#[derive(Debug, Clone)]
pub enum SnapshotField {
    Scalar(ScalarField),
    Pressure(PressureProfile),
}

/// In-memory form of a snapshot file.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub grid: Grid,
    pub t: f64,
    pub fields: Vec<(String, SnapshotField)>,
}

fn bc_tag(field: &SnapshotField) -> u8 {
    match field {
        SnapshotField::Scalar(f) => match f.bc_y {
            BoundaryY::DirichletZero => 0,
            BoundaryY::Free => 1,
        },
        SnapshotField::Pressure(_) => 2,
    }
}

fn name_bytes(name: &str) -> Result<[u8; NAME_LEN]> {
    let raw = name.as_bytes();
    if raw.len() > NAME_LEN {
        return Err(Error::Snapshot(format!(
            "field name '{name}' exceeds {NAME_LEN} bytes"
        )));
    }
    let mut buf = [0u8; NAME_LEN];
    buf[..raw.len()].copy_from_slice(raw);
    Ok(buf)
}

impl FieldSnapshot {
    pub fn new(grid: Grid, t: f64) -> FieldSnapshot {
        FieldSnapshot { grid, t, fields: Vec::new() }
    }

    pub fn push_scalar(&mut self, name: &str, f: &ScalarField) {
        self.fields.push((name.to_string(), SnapshotField::Scalar(f.clone())));
    }

    pub fn push_pressure(&mut self, name: &str, p: &PressureProfile) {
        self.fields.push((name.to_string(), SnapshotField::Pressure(p.clone())));
    }

    pub fn scalar(&self, name: &str) -> Result<&ScalarField> {
        for (n, f) in &self.fields {
            if n == name {
                if let SnapshotField::Scalar(s) = f {
                    return Ok(s);
                }
                return Err(Error::Snapshot(format!("field '{name}' is not a scalar field")));
            }
        }
        Err(Error::Snapshot(format!("field '{name}' not present")))
    }

    pub fn pressure(&self, name: &str) -> Result<&PressureProfile> {
        for (n, f) in &self.fields {
            if n == name {
                if let SnapshotField::Pressure(p) = f {
                    return Ok(p);
                }
                return Err(Error::Snapshot(format!("field '{name}' is not a pressure profile")));
            }
        }
        Err(Error::Snapshot(format!("field '{name}' not present")))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let g = self.grid;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(g.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(g.ny as u32).to_le_bytes());
        buf.extend_from_slice(&g.length.to_le_bytes());
        buf.extend_from_slice(&self.t.to_le_bytes());
        buf.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (name, field) in &self.fields {
            buf.extend_from_slice(&name_bytes(name)?);
            buf.push(bc_tag(field));
        }
        for (_, field) in &self.fields {
            let values: &[f64] = match field {
                SnapshotField::Scalar(f) => f.values(),
                SnapshotField::Pressure(p) => p.values(),
            };
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(buf)
    }

    pub fn decode(data: &[u8]) -> Result<FieldSnapshot> {
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > data.len() {
                return Err(Error::Snapshot(format!(
                    "truncated snapshot: needed {} bytes at offset {}, have {}",
                    n,
                    *pos,
                    data.len()
                )));
            }
            let s = &data[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let magic = take(&mut pos, 4)?;
        if magic != MAGIC {
            return Err(Error::Snapshot("bad magic: not a field snapshot".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(&mut pos, 4)?);
        if version != VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {version}, expected {VERSION}"
            )));
        }
        let nx = u32_at(take(&mut pos, 4)?) as usize;
        let ny = u32_at(take(&mut pos, 4)?) as usize;
        let length = f64_at(take(&mut pos, 8)?);
        let t = f64_at(take(&mut pos, 8)?);
        let n_fields = u32_at(take(&mut pos, 4)?) as usize;
        let grid = Grid::new(length, nx, ny)?;

        let mut headers = Vec::with_capacity(n_fields);
        for _ in 0..n_fields {
            let raw = take(&mut pos, NAME_LEN)?;
            let end = raw.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
            let name = std::str::from_utf8(&raw[..end])
                .map_err(|_| Error::Snapshot("field name is not UTF-8".into()))?
                .to_string();
            let bc = take(&mut pos, 1)?[0];
            headers.push((name, bc));
        }

        let mut fields = Vec::with_capacity(n_fields);
        for (name, bc) in headers {
            let count = match bc {
                0 | 1 => nx * (ny + 1),
                2 => nx,
                other => {
                    return Err(Error::Snapshot(format!(
                        "unknown boundary tag {other} on field '{name}'"
                    )))
                }
            };
            let raw = take(&mut pos, 8 * count)?;
            let values: Vec<f64> =
                raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let field = match bc {
                0 => SnapshotField::Scalar(ScalarField::from_values(
                    grid,
                    BoundaryY::DirichletZero,
                    values,
                )?),
                1 => SnapshotField::Scalar(ScalarField::from_values(grid, BoundaryY::Free, values)?),
                _ => SnapshotField::Pressure(PressureProfile::from_values_trusted(grid, values)?),
            };
            fields.push((name, field));
        }
        if pos != data.len() {
            return Err(Error::Snapshot(format!(
                "length mismatch: {} trailing bytes after payload",
                data.len() - pos
            )));
        }
        Ok(FieldSnapshot { grid, t, fields })
    }
}

pub fn write_snapshot(path: &Path, snap: &FieldSnapshot) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&snap.encode()?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<FieldSnapshot> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    FieldSnapshot::decode(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_field(grid: Grid, bc: BoundaryY, seed: &mut u64) -> ScalarField {
        let mut vals = vec![0.0; grid.node_count()];
        for i in 0..grid.nx {
            for j in 0..=grid.ny {
                *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let r = (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                let v = if bc == BoundaryY::DirichletZero && (j == 0 || j == grid.ny) {
                    0.0
                } else {
                    r
                };
                vals[i * (grid.ny + 1) + j] = v;
            }
        }
        ScalarField::from_values(grid, bc, vals).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(2.0, 16, 8).unwrap();
        let mut seed = 42u64;
        let rho = lcg_field(g, BoundaryY::Free, &mut seed);
        let u = lcg_field(g, BoundaryY::DirichletZero, &mut seed);
        let p = PressureProfile::sample(g, |x| (x - 1.0).powi(3)).unwrap();
        let mut snap = FieldSnapshot::new(g, 0.125);
        snap.push_scalar("rho", &rho);
        snap.push_scalar("u", &u);
        snap.push_pressure("p", &p);
        let bytes = snap.encode().unwrap();
        let back = FieldSnapshot::decode(&bytes).unwrap();
        assert_eq!(back.t, 0.125);
        assert_eq!(back.scalar("rho").unwrap().values(), rho.values());
        assert_eq!(back.scalar("u").unwrap().values(), u.values());
        assert_eq!(back.pressure("p").unwrap().values(), p.values());
        assert_eq!(back.scalar("u").unwrap().bc_y, BoundaryY::DirichletZero);
        assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let mut snap = FieldSnapshot::new(g, 0.0);
        snap.push_scalar("rho", &ScalarField::zeros(g, BoundaryY::Free));
        let bytes = snap.encode().unwrap();

        let err = FieldSnapshot::decode(&bytes[..bytes.len() - 9]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(FieldSnapshot::decode(&bad_magic).unwrap_err().to_string().contains("magic"));

        let mut bad_version = bytes.clone();
        bad_version[4..8].copy_from_slice(&999u32.to_le_bytes());
        let err = FieldSnapshot::decode(&bad_version).unwrap_err();
        assert!(err.to_string().contains("version 999"), "{err}");

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(FieldSnapshot::decode(&trailing)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("hydrostat-snap-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.hpe");
        let g = Grid::new(1.0, 8, 8).unwrap();
        let mut seed = 7u64;
        let rho = lcg_field(g, BoundaryY::Free, &mut seed);
        let mut snap = FieldSnapshot::new(g, 1.5);
        snap.push_scalar("rho", &rho);
        write_snapshot(&path, &snap).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.scalar("rho").unwrap().values(), rho.values());
        std::fs::remove_file(&path).unwrap();
    }
}
