//! Snapshot files.
//!
//! Binary layout, all little-endian: the magic bytes `QTMW`, `u32` dimension,
//! one `u32` point count per axis, `(x_min, x_max)` as `f64` per axis, `f64`
//! time, then interleaved `(re, im)` `f64` pairs in row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::WaveFunction;
use crate::error::{QtmError, Result};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"QTMW";

pub fn write_snapshot<W: Write>(psi: &WaveFunction, mut out: W) -> Result<()> {
    let g = psi.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    for _ in 0..g.dim() {
        out.write_all(&(g.n() as u32).to_le_bytes())?;
    }
    for _ in 0..g.dim() {
        out.write_all(&g.x_min().to_le_bytes())?;
        out.write_all(&g.x_max().to_le_bytes())?;
    }
    out.write_all(&psi.time().to_le_bytes())?;
    for z in psi.amplitudes() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<WaveFunction> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(QtmError::Snapshot("bad magic".into()));
    }
    let dim = read_u32(&mut input)? as usize;
    if dim != 1 && dim != 2 {
        return Err(QtmError::Snapshot(format!("unsupported dimension {dim}")));
    }
    let counts = (0..dim)
        .map(|_| read_u32(&mut input).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut extents = Vec::with_capacity(dim);
    for _ in 0..dim {
        extents.push((read_f64(&mut input)?, read_f64(&mut input)?));
    }
    if counts.iter().any(|&n| n != counts[0]) || extents.iter().any(|&e| e != extents[0]) {
        return Err(QtmError::Snapshot("only square grids are supported".into()));
    }
    let grid = Grid::new(dim, extents[0].0, extents[0].1, counts[0])
        .map_err(|e| QtmError::Snapshot(e.to_string()))?;
    let time = read_f64(&mut input)?;
    let mut amplitudes = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut input)?;
        let im = read_f64(&mut input)?;
        amplitudes.push(Complex64::new(re, im));
    }
    WaveFunction::new(grid, amplitudes, time)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn save_snapshot(psi: &WaveFunction, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_snapshot(psi, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<WaveFunction> {
    read_snapshot(std::io::BufReader::new(File::open(path)?))
}

/// CSV with columns `x,re,im,rho` (1D) or `x,y,re,im,rho` (2D), preceded by
/// the `header` lines verbatim.
pub fn write_csv<W: Write>(psi: &WaveFunction, header: &str, mut out: W) -> Result<()> {
    out.write_all(header.as_bytes())?;
    let g = psi.grid();
    match g.dim() {
        1 => writeln!(out, "x,re,im,rho")?,
        _ => writeln!(out, "x,y,re,im,rho")?,
    }
    for (i, z) in psi.amplitudes().iter().enumerate() {
        let [x, y] = g.point(i);
        if g.dim() == 1 {
            writeln!(out, "{x},{},{},{}", z.re, z.im, z.norm_sqr())?;
        } else {
            writeln!(out, "{x},{y},{},{},{}", z.re, z.im, z.norm_sqr())?;
        }
    }
    Ok(())
}

pub fn save_csv(psi: &WaveFunction, header: &str, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(psi, header, &mut out)?;
    out.flush()?;
    Ok(())
}
