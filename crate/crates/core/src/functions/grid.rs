//! Uniform tensor grids with multilinear interpolation and CSV I/O.
//!
//! CSV layout: header `x0,...,x{d-1},value`, one row per node.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{check_dim, BoxDomain, Point, MAX_DIM, ORIGIN};

/// Relative tolerance on node spacing when checking uniformity.
const SPACING_TOL: f64 = 1e-9;
/// Boundary samples must vanish to this absolute tolerance.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub dim: usize,
    pub origin: Point,
    pub spacing: Point,
    pub counts: [usize; MAX_DIM],
    /// Row-major samples, last axis fastest.
    pub values: Vec<f64>,
}

impl GridData {
    pub fn sample<F: Fn(&Point) -> f64>(
        support: &BoxDomain,
        counts: &[usize],
        f: F,
    ) -> Result<Self> {
        let dim = support.dim;
        let mut c = [1usize; MAX_DIM];
        let mut origin = ORIGIN;
        let mut spacing = ORIGIN;
        for i in 0..dim {
            if counts[i] < 3 {
                return Err(Error::Grid(format!("axis {i}: need at least 3 nodes")));
            }
            c[i] = counts[i];
            origin[i] = support.lo[i];
            spacing[i] = support.width(i) / (counts[i] - 1) as f64;
        }
        let mut grid = Self {
            dim,
            origin,
            spacing,
            counts: c,
            values: vec![0.0; c.iter().product()],
        };
        for idx in 0..grid.values.len() {
            let x = grid.node(idx);
            grid.values[idx] = if grid.on_boundary(idx) { 0.0 } else { f(&x) };
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for i in (0..self.dim).rev() {
            m[i] = idx % self.counts[i];
            idx /= self.counts[i];
        }
        m
    }

    fn flat(&self, m: &[usize; MAX_DIM]) -> usize {
        let mut idx = 0;
        for i in 0..self.dim {
            idx = idx * self.counts[i] + m[i];
        }
        idx
    }

    pub fn node(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut x = ORIGIN;
        for i in 0..self.dim {
            x[i] = self.origin[i] + m[i] as f64 * self.spacing[i];
        }
        x
    }

    fn on_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|i| m[i] == 0 || m[i] + 1 == self.counts[i])
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis])
            .map(|k| self.origin[axis] + k as f64 * self.spacing[axis])
            .collect()
    }

    pub fn extent(&self) -> Result<BoxDomain> {
        let lo: Vec<f64> = (0..self.dim).map(|i| self.origin[i]).collect();
        let hi: Vec<f64> = (0..self.dim)
            .map(|i| self.origin[i] + (self.counts[i] - 1) as f64 * self.spacing[i])
            .collect();
        BoxDomain::new(&lo, &hi)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        for i in 0..self.dim {
            if self.counts[i] < 2 || !(self.spacing[i] > 0.0) {
                return Err(Error::Grid(format!("axis {i}: degenerate spacing or count")));
            }
        }
        if self.values.len() != self.counts[..self.dim].iter().product::<usize>() {
            return Err(Error::Grid("sample count does not match grid shape".into()));
        }
        for (idx, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Grid(format!("non-finite sample at node {idx}")));
            }
            if self.on_boundary(idx) && v.abs() > BOUNDARY_TOL {
                return Err(Error::Grid(format!(
                    "boundary sample {v} at {:?} must be 0",
                    &self.node(idx)[..self.dim]
                )));
            }
        }
        Ok(())
    }

    /// Multilinear interpolation; callers guarantee `x` lies in the extent.
    pub fn interpolate(&self, x: &Point) -> f64 {
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for i in 0..self.dim {
            let s = (x[i] - self.origin[i]) / self.spacing[i];
            let k = (s.floor().max(0.0) as usize).min(self.counts[i] - 2);
            base[i] = k;
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut m = base;
            let mut w = 1.0;
            for i in 0..self.dim {
                if corner & (1 << i) != 0 {
                    m[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.flat(&m)];
            }
        }
        acc
    }

    /// Exact integral of the piecewise-linear interpolant from the left
    /// edge to `x`, shifted so that the value at 0 is 0.
    pub fn antiderivative_1d(&self, x: f64) -> f64 {
        self.cumulative_1d(x) - self.cumulative_1d(0.0)
    }

    fn cumulative_1d(&self, x: f64) -> f64 {
        let n = self.counts[0];
        let dx = self.spacing[0];
        let s = (x - self.origin[0]) / dx;
        if s <= 0.0 {
            return 0.0;
        }
        let full = (s.floor() as usize).min(n - 1);
        // Trapezoid sums over complete cells.
        let mut acc = 0.0;
        for k in 0..full {
            acc += 0.5 * dx * (self.values[k] + self.values[k + 1]);
        }
        if full + 1 < n {
            let tau = (s - full as f64) * dx;
            let v0 = self.values[full];
            let v1 = self.values[full + 1];
            acc += v0 * tau + (v1 - v0) * tau * tau / (2.0 * dx);
        }
        acc
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        wtr.write_record(&header)?;
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.node(idx);
            let mut rec: Vec<String> = x[..self.dim].iter().map(|c| format!("{c:e}")).collect();
            rec.push(format!("{v:e}"));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Parses and validates a grid; rows may come in any order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let dim = header.len().saturating_sub(1);
        check_dim(dim)?;
        for i in 0..dim {
            if &header[i] != format!("x{i}").as_str() {
                return Err(Error::Grid(format!(
                    "header column {i} must be `x{i}`, found `{}`",
                    &header[i]
                )));
            }
        }
        if &header[dim] != "value" {
            return Err(Error::Grid("last header column must be `value`".into()));
        }
        let mut rows: Vec<(Point, f64)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Grid(format!("row {}: expected {} fields", line + 2, dim + 1)));
            }
            let mut x = ORIGIN;
            for i in 0..dim {
                x[i] = parse(&rec[i], line)?;
            }
            rows.push((x, parse(&rec[dim], line)?));
        }
        let mut origin = ORIGIN;
        let mut spacing = ORIGIN;
        let mut counts = [1usize; MAX_DIM];
        for i in 0..dim {
            let mut coords: Vec<f64> = rows.iter().map(|(x, _)| x[i]).collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
            if coords.len() < 3 {
                return Err(Error::Grid(format!("axis {i}: need at least 3 distinct nodes")));
            }
            let dx = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
            for w in coords.windows(2) {
                if ((w[1] - w[0]) - dx).abs() > SPACING_TOL * dx.max(1.0) {
                    return Err(Error::Grid(format!("axis {i}: non-uniform spacing")));
                }
            }
            origin[i] = coords[0];
            spacing[i] = dx;
            counts[i] = coords.len();
        }
        let total: usize = counts[..dim].iter().product();
        if rows.len() != total {
            return Err(Error::Grid(format!(
                "expected {total} rows for a full tensor grid, found {}",
                rows.len()
            )));
        }
        let mut grid = Self {
            dim,
            origin,
            spacing,
            counts,
            values: vec![f64::NAN; total],
        };
        for (x, v) in rows {
            let mut m = [0usize; MAX_DIM];
            for i in 0..dim {
                let s = (x[i] - origin[i]) / spacing[i];
                let k = s.round();
                if (s - k).abs() > 1e-6 {
                    return Err(Error::Grid(format!("node {:?} is off the grid", &x[..dim])));
                }
                m[i] = k as usize;
            }
            let idx = grid.flat(&m);
            if !grid.values[idx].is_nan() {
                return Err(Error::Grid(format!("duplicate node {:?}", &x[..dim])));
            }
            grid.values[idx] = v;
        }
        grid.validate()?;
        Ok(grid)
    }
}

fn parse(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Grid(format!("row {}: cannot parse `{s}`: {e}", line + 2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent(n: usize) -> GridData {
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        GridData::sample(&b, &[n], |x| 1.0 - (2.0 * x[0] - 1.0).abs()).unwrap()
    }

    #[test]
    fn interpolation_reproduces_nodes_and_midpoints() {
        let g = tent(5);
        assert_eq!(g.interpolate(&[0.5, 0.0, 0.0]), 1.0);
        assert!((g.interpolate(&[0.375, 0.0, 0.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn antiderivative_is_exact_for_interpolant() {
        let g = tent(5);
        assert!((g.antiderivative_1d(1.0) - 0.5).abs() < 1e-15);
        assert!((g.antiderivative_1d(0.5) - 0.25).abs() < 1e-15);
        assert!((g.antiderivative_1d(0.25) - 0.0625).abs() < 1e-15);
        assert_eq!(g.antiderivative_1d(0.0), 0.0);
    }

    #[test]
    fn csv_round_trip_any_row_order() {
        let b = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let g = GridData::sample(&b, &[4, 5], |x| x[0] * x[1] + 1.0).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        let back = GridData::read_csv(lines.join("\n").as_bytes()).unwrap();
        assert_eq!(back.counts, g.counts);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let nonuniform = "x0,value\n0,0\n0.1,1\n0.5,1\n1,0\n";
        assert!(GridData::read_csv(nonuniform.as_bytes()).is_err());
        let boundary = "x0,value\n0,1\n0.5,1\n1,0\n";
        assert!(GridData::read_csv(boundary.as_bytes()).is_err());
        let header = "y0,value\n0,0\n0.5,1\n1,0\n";
        assert!(GridData::read_csv(header.as_bytes()).is_err());
        let missing = "x0,x1,value\n0,0,0\n0.5,0,0\n1,0,0\n0,1,0\n";
        assert!(GridData::read_csv(missing.as_bytes()).is_err());
    }
}
