//! Input files: `MCPT` points, `MCDM` distance matrices, and plain text.

use std::path::Path;

use crate::codec::{read_norm, write_norm, Cursor};
use crate::error::{Error, Result};
use crate::metric::{DistanceMatrix, Norm};

pub const POINTS_MAGIC: &[u8; 4] = b"MCPT";
pub const MATRIX_MAGIC: &[u8; 4] = b"MCDM";
const FILE_VERSION: u32 = 1;

/// Raw, unnormalized input.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Points {
        coords: Vec<f64>,
        d: usize,
        norm: Norm,
    },
    Matrix(DistanceMatrix),
}

impl Input {
    pub fn n(&self) -> usize {
        match self {
            Input::Points { coords, d, .. } => coords.len() / d,
            Input::Matrix(dm) => dm.len(),
        }
    }
}

pub fn write_points(coords: &[f64], d: usize, norm: Norm) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + coords.len() * 8);
    out.extend_from_slice(POINTS_MAGIC);
    out.extend_from_slice(&FILE_VERSION.to_le_bytes());
    write_norm(&mut out, norm);
    out.extend_from_slice(&((coords.len() / d.max(1)) as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for c in coords {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn write_matrix(dm: &DistanceMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + dm.entries().len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(dm.len() as u64).to_le_bytes());
    for c in dm.entries() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn read_f64s(c: &mut Cursor<'_>, count: u64) -> Result<Vec<f64>> {
    let bytes = count
        .checked_mul(8)
        .filter(|&b| b == (c.bytes.len() - c.pos) as u64)
        .ok_or_else(|| {
            Error::format(
                c.pos as u64 * 8,
                format!(
                    "expected {count} values, found {} bytes",
                    c.bytes.len() - c.pos
                ),
            )
        })?;
    Ok(c.take(bytes as usize)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect())
}

fn check_version(c: &mut Cursor<'_>) -> Result<()> {
    let v = c.u32()?;
    if v != FILE_VERSION {
        return Err(Error::format(32, format!("unsupported version {v}")));
    }
    Ok(())
}

/// Parses `MCPT` or `MCDM` bytes, or whitespace/comma separated text with
/// one point per line (`#` starts a comment). Text is read with `text_norm`.
pub fn parse_input(bytes: &[u8], text_norm: Norm) -> Result<Input> {
    let mut c = Cursor::new(bytes);
    if bytes.starts_with(POINTS_MAGIC) {
        c.pos = 4;
        check_version(&mut c)?;
        let norm = read_norm(&mut c)?;
        let n = c.u64()?;
        let d = c.u64()?;
        if d == 0 {
            return Err(Error::format(c.pos as u64 * 8 - 64, "dimension is zero"));
        }
        let count = n
            .checked_mul(d)
            .ok_or_else(|| Error::format(c.pos as u64 * 8, "n·d overflows"))?;
        let coords = read_f64s(&mut c, count)?;
        return Ok(Input::Points {
            coords,
            d: d as usize,
            norm,
        });
    }
    if bytes.starts_with(MATRIX_MAGIC) {
        c.pos = 4;
        check_version(&mut c)?;
        let n = c.u64()?;
        let count = n
            .checked_mul(n)
            .ok_or_else(|| Error::format(c.pos as u64 * 8, "n² overflows"))?;
        let entries = read_f64s(&mut c, count)?;
        return Ok(Input::Matrix(DistanceMatrix::new(n as usize, entries)?));
    }
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Error::format(
            e.valid_up_to() as u64 * 8,
            "input is neither MCPT, MCDM nor text",
        )
    })?;
    parse_text(text, text_norm)
}

pub fn parse_text(text: &str, norm: Norm) -> Result<Input> {
    let mut coords = Vec::new();
    let mut d = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("line {}: bad number '{s}'", i + 1)))
            })
            .collect::<Result<_>>()?;
        match d {
            None => d = Some(row.len()),
            Some(k) if k != row.len() => {
                return Err(Error::InvalidInput(format!(
                    "line {}: {} columns, expected {k}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        coords.extend(row);
    }
    let d = d.ok_or_else(|| Error::InvalidInput("no points in text input".into()))?;
    Ok(Input::Points { coords, d, norm })
}

pub fn read_input(path: &Path, text_norm: Norm) -> Result<Input> {
    parse_input(&std::fs::read(path)?, text_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_roundtrip() {
        let coords = vec![0.0, 1.5, -2.0, 3.0];
        for norm in [
            Norm::L1,
            Norm::L2,
            Norm::Infinity,
            Norm::rational(3, 2).unwrap(),
        ] {
            let bytes = write_points(&coords, 2, norm);
            assert_eq!(
                parse_input(&bytes, Norm::L2).unwrap(),
                Input::Points {
                    coords: coords.clone(),
                    d: 2,
                    norm
                }
            );
        }
    }

    #[test]
    fn matrix_roundtrip() {
        let dm = DistanceMatrix::new(2, vec![0.0, 3.0, 3.0, 0.0]).unwrap();
        assert_eq!(
            parse_input(&write_matrix(&dm), Norm::L2).unwrap(),
            Input::Matrix(dm)
        );
    }

    #[test]
    fn truncated_and_corrupt() {
        let bytes = write_points(&[0.0, 1.0], 1, Norm::L2);
        assert!(matches!(
            parse_input(&bytes[..bytes.len() - 1], Norm::L2),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            parse_input(&bad, Norm::L2),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn text_formats() {
        let t = "# header\n0, 0\n3 4\n\n1.5,2 # trailing\n";
        assert_eq!(
            parse_text(t, Norm::L1).unwrap(),
            Input::Points {
                coords: vec![0.0, 0.0, 3.0, 4.0, 1.5, 2.0],
                d: 2,
                norm: Norm::L1
            }
        );
        assert!(parse_text("1 2\n3\n", Norm::L2).is_err());
        assert!(parse_text("x\n", Norm::L2).is_err());
    }
}
