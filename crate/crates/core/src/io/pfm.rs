//! Portable FloatMap (PFM) reader/writer for depth and disparity grids.
//!
//! Layout, byte-exact: ASCII header `Pf\n{width} {height}\n-1.0\n` (the
//! negative scale marks little-endian), then `height` scanlines bottom to
//! top, each `width` 32-bit floats. Only the single-channel `Pf` variant is
//! supported.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn write_pfm<W: Write>(mut w: W, grid: &Grid<f32>) -> Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", grid.width(), grid.height())?;
    for y in (0..grid.height()).rev() {
        for x in 0..grid.width() {
            w.write_all(&grid.at(x, y).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_pfm_file(path: &Path, grid: &Grid<f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pfm(&mut w, grid)?;
    w.flush()?;
    Ok(())
}

pub fn read_pfm<R: Read>(mut r: R) -> Result<Grid<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_pfm(&bytes)
}

pub fn read_pfm_file(path: &Path) -> Result<Grid<f32>> {
    read_pfm(BufReader::new(File::open(path)?))
}

fn parse_pfm(bytes: &[u8]) -> Result<Grid<f32>> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Input(format!("pfm: missing {what}")));
        }
        let s = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::Input(format!("pfm: non-ascii {what}")))?;
        // Consume exactly one whitespace byte after the token.
        pos += 1;
        Ok(s.to_string())
    };

    let magic = token("magic")?;
    if magic != "Pf" {
        return Err(Error::Input(format!(
            "pfm: unsupported magic {magic:?} (only grayscale Pf)"
        )));
    }
    let width: usize = token("width")?
        .parse()
        .map_err(|_| Error::Input("pfm: bad width".into()))?;
    let height: usize = token("height")?
        .parse()
        .map_err(|_| Error::Input("pfm: bad height".into()))?;
    let scale: f64 = token("scale")?
        .parse()
        .map_err(|_| Error::Input("pfm: bad scale".into()))?;
    let little_endian = scale < 0.0;

    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Input("pfm: dimensions overflow".into()))?;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(Error::Input(format!(
            "pfm: truncated payload ({} < {need} bytes)",
            data.len()
        )));
    }

    let mut grid = Grid::filled(width, height, 0.0f32);
    let mut off = 0;
    for y in (0..height).rev() {
        for x in 0..width {
            let raw: [u8; 4] = data[off..off + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            grid.set(x, y, v);
            off += 4;
        }
    }
    Ok(grid)
}
