//! Field snapshot files.
//!
//! Text layout, one item per line:
//!
//! ```text
//! forchflow-field 1
//! dim 2
//! cells 64 64
//! extents 1.0000000000000000e0 1.0000000000000000e0
//! margin 1.2500000000000000e-1
//! time 2.5000000000000000e0
//! values
//! <one value per line, cell index order i + nx j>
//! ```
//!
//! Numbers are written with 17 significant digits, so text round trips are
//! bit-identical for `f64`.
//!
//! Binary layout, little endian: magic `FFLD`, `u32` version, `u32` dim,
//! `u64` per axis cell count (two entries), `f64` extents (two), `f64` margin,
//! `f64` time, then `f64` values.

use std::io::{BufRead, Read, Write};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};
use crate::scalar::Real;

const TEXT_MAGIC: &str = "forchflow-field 1";
const BINARY_MAGIC: &[u8; 4] = b"FFLD";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub time: T,
    pub field: ScalarField<T>,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn fmt<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

pub fn write_text<T: Real, W: Write>(out: &mut W, field: &ScalarField<T>, time: T) -> Result<()> {
    let g = field.grid();
    writeln!(out, "{TEXT_MAGIC}")?;
    writeln!(out, "dim {}", g.dim())?;
    let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
    writeln!(out, "cells {}", cells.join(" "))?;
    let extents: Vec<String> = g.extents().iter().map(|&e| fmt(e)).collect();
    writeln!(out, "extents {}", extents.join(" "))?;
    writeln!(out, "margin {}", fmt(g.margin()))?;
    writeln!(out, "time {}", fmt(time))?;
    writeln!(out, "values")?;
    for &v in field.values() {
        writeln!(out, "{}", fmt(v))?;
    }
    Ok(())
}

pub fn read_text<T: Real, R: BufRead>(input: R) -> Result<Snapshot<T>> {
    let mut lines = input.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((k, Ok(l))) => Ok((k, l)),
            Some((k, Err(e))) => Err(parse_err(k, e)),
            None => Err(Error::Parse(format!("unexpected end of file, expected {what}"))),
        }
    };
    let (k, magic) = next("header")?;
    if magic.trim() != TEXT_MAGIC {
        return Err(parse_err(k, format!("expected `{TEXT_MAGIC}`")));
    }
    let mut keyed = |key: &str| -> Result<(usize, Vec<String>)> {
        let (k, line) = next(key)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(parse_err(k, format!("expected `{key}`")));
        }
        Ok((k, parts.map(str::to_owned).collect()))
    };
    let num = |k: usize, s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| parse_err(k, format!("{s}: {e}"))) };

    let (k, dim) = keyed("dim")?;
    let dim: usize = dim
        .first()
        .ok_or_else(|| parse_err(k, "missing dimension"))?
        .parse()
        .map_err(|e| parse_err(k, e))?;
    let (k, cells) = keyed("cells")?;
    let cells = cells
        .iter()
        .map(|c| c.parse::<usize>().map_err(|e| parse_err(k, e)))
        .collect::<Result<Vec<_>>>()?;
    let (k, extents) = keyed("extents")?;
    let extents = extents.iter().map(|e| num(k, e).map(T::lit)).collect::<Result<Vec<T>>>()?;
    let (k, margin) = keyed("margin")?;
    let margin = T::lit(num(k, margin.first().ok_or_else(|| parse_err(k, "missing margin"))?)?);
    let (k, time) = keyed("time")?;
    let time = T::lit(num(k, time.first().ok_or_else(|| parse_err(k, "missing time"))?)?);
    keyed("values")?;

    let grid = Grid::new(dim, &extents, &cells)?.with_margin(margin)?;
    let mut values = Vec::with_capacity(grid.n_cells());
    while let Some((k, line)) = lines.next() {
        let line = line.map_err(|e| parse_err(k, e))?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(T::lit(num(k, line.trim())?));
    }
    Ok(Snapshot {
        time,
        field: ScalarField::new(grid, values)?,
    })
}

pub fn write_binary<T: Real, W: Write>(out: &mut W, field: &ScalarField<T>, time: T) -> Result<()> {
    let g = field.grid();
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    for n in [g.nx(), g.ny()] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    let [ex, ey] = g.extents;
    for v in [ex, ey, g.margin(), time] {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    for &v in field.values() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<T: Real, R: Read>(mut input: R) -> Result<Snapshot<T>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("missing FFLD magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != BINARY_VERSION {
        return Err(Error::Parse(format!("unsupported snapshot version {version}")));
    }
    input.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut cells = [0usize; 2];
    for c in &mut cells {
        input.read_exact(&mut b8)?;
        *c = u64::from_le_bytes(b8) as usize;
    }
    let mut header = [0f64; 4];
    for h in &mut header {
        input.read_exact(&mut b8)?;
        *h = f64::from_le_bytes(b8);
    }
    let [ex, ey, margin, time] = header.map(T::lit);
    let grid = Grid::new(dim, &[ex, ey][..dim], &cells[..dim])?.with_margin(margin)?;
    let mut values = Vec::with_capacity(grid.n_cells());
    for _ in 0..grid.n_cells() {
        input.read_exact(&mut b8)?;
        values.push(T::lit(f64::from_le_bytes(b8)));
    }
    Ok(Snapshot {
        time,
        field: ScalarField::new(grid, values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScalarField<f64> {
        let g = Grid::<f64>::new_2d([1.0, 0.7], [5, 3]).unwrap().with_margin(0.2).unwrap();
        ScalarField::from_fn(g, |x, y| (x * 13.1).sin() / 3.0 + y.exp() * 1e-7).unwrap()
    }

    #[test]
    fn text_round_trip_is_bit_identical() {
        let f = sample();
        let mut buf = Vec::new();
        write_text(&mut buf, &f, 0.1 + 0.2).unwrap();
        let snap: Snapshot<f64> = read_text(buf.as_slice()).unwrap();
        assert_eq!(snap.time.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(snap.field.grid(), f.grid());
        for (a, b) in snap.field.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_binary(&mut buf, &f, 3.5).unwrap();
        let snap: Snapshot<f64> = read_binary(buf.as_slice()).unwrap();
        assert_eq!(snap.field, f);
        assert_eq!(snap.time, 3.5);
        let mut one_d = Vec::new();
        let f1 = ScalarField::constant(Grid::<f64>::new_1d(2.0, 4).unwrap(), 1.5);
        write_binary(&mut one_d, &f1, 0.0).unwrap();
        assert_eq!(read_binary::<f64, _>(one_d.as_slice()).unwrap().field, f1);
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = read_text::<f64, _>("forchflow-field 1\ndim 1\ncells x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.starts_with("line 3")), "{err}");
        assert!(read_text::<f64, _>("nope\n".as_bytes()).is_err());
        let short = "forchflow-field 1\ndim 1\ncells 3\nextents 1\nmargin 0\ntime 0\nvalues\n1\n2\n";
        assert!(read_text::<f64, _>(short.as_bytes()).is_err());
    }
}
