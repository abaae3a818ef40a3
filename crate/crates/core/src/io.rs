//! Sample files and CSV plot data.
//!
//! `.gf` layout: one ASCII header line `d n_1..n_d lower_1..lower_d upper_1..upper_d`
//! followed by the samples as little-endian `f64`, row-major.

use std::io::{BufRead, Write};

use crate::approx::Spectrum;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridBox, GridFunction};
use crate::transference::IntermediateFunction;

pub fn write_gf(f: &GridFunction, mut out: impl Write) -> Result<()> {
    let g = f.grid();
    let mut header = vec![g.dim().to_string()];
    header.extend(g.n().iter().map(|n| n.to_string()));
    header.extend(g.bounds().lower().iter().map(|v| format!("{v:?}")));
    header.extend(g.bounds().upper().iter().map(|v| format!("{v:?}")));
    writeln!(out, "{}", header.join(" "))?;
    for v in f.samples() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_gf(mut input: impl BufRead) -> Result<GridFunction> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    let bad = |m: &str| Error::Format(format!("gf header: {m}"));
    let d: usize = fields.first().ok_or_else(|| bad("empty"))?.parse().map_err(|_| bad("dimension"))?;
    if fields.len() != 1 + 3 * d {
        return Err(bad("expected d, n, lower, upper"));
    }
    let n: Vec<usize> = fields[1..1 + d]
        .iter()
        .map(|s| s.parse().map_err(|_| bad("point count")))
        .collect::<Result<_>>()?;
    let num = |s: &&str| s.parse::<f64>().map_err(|_| bad("bound"));
    let lower: Vec<f64> = fields[1 + d..1 + 2 * d].iter().map(num).collect::<Result<_>>()?;
    let upper: Vec<f64> = fields[1 + 2 * d..].iter().map(num).collect::<Result<_>>()?;
    let grid = Grid::new(GridBox::new(lower, upper)?, n)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} samples, found {} bytes",
            grid.len(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    GridFunction::new(grid, samples)
}

fn one_dimensional(d: usize) -> Result<()> {
    if d != 1 {
        return Err(Error::Format("CSV export is one-dimensional".into()));
    }
    Ok(())
}

/// `x,f` rows.
pub fn write_function_csv(f: &GridFunction, mut out: impl Write) -> Result<()> {
    one_dimensional(f.grid().dim())?;
    writeln!(out, "x,f")?;
    for (i, v) in f.samples().iter().enumerate() {
        writeln!(out, "{:?},{v:?}", f.grid().coord(0, i))?;
    }
    Ok(())
}

/// `frequency,re,im` rows in ascending frequency.
pub fn write_spectrum_csv(s: &Spectrum, mut out: impl Write) -> Result<()> {
    one_dimensional(s.grid.dim())?;
    writeln!(out, "frequency,re,im")?;
    let mut rows: Vec<(f64, usize)> = (0..s.coeffs.len()).map(|k| (s.freq(0, k), k)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (y, k) in rows {
        writeln!(out, "{y:?},{:?},{:?}", s.coeffs[k].re, s.coeffs[k].im)?;
    }
    Ok(())
}

/// `u,F` rows.
pub fn write_intermediate_csv(f: &IntermediateFunction, mut out: impl Write) -> Result<()> {
    one_dimensional(f.u_grid.d)?;
    writeln!(out, "u,F")?;
    for (j, v) in f.values.iter().enumerate() {
        writeln!(out, "{:?},{v:?}", f.u_grid.point(j)[0])?;
    }
    Ok(())
}
