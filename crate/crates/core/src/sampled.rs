//! Piecewise-constant functions on uniform grids.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions within this many cell widths of a grid line snap onto it.
pub const ALIGN_TOL: f64 = 1e-9;

/// Uniform grid of half-open cells `[t_start + k*step, t_start + (k+1)*step)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_start: f64,
    pub step: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(t_start: f64, step: f64, count: usize) -> Result<Grid> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!("grid step must be positive, got {step}")));
        }
        if count == 0 {
            return Err(Error::Domain("grid needs at least one cell".into()));
        }
        if !t_start.is_finite() {
            return Err(Error::Domain("grid start must be finite".into()));
        }
        Ok(Grid {
            t_start,
            step,
            count,
        })
    }

    /// Grid covering `[a, b)` with cells of width `step`; `b - a` must be a whole number of cells.
    pub fn spanning(a: f64, b: f64, step: f64) -> Result<Grid> {
        let cells = (b - a) / step;
        let n = cells.round();
        if n < 1.0 || (cells - n).abs() > ALIGN_TOL * n.max(1.0) {
            return Err(Error::Alignment(format!(
                "[{a}, {b}) is not a positive whole number of cells of width {step}"
            )));
        }
        Grid::new(a, step, n as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.count as f64 * self.step
    }

    pub fn cell_lo(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.step
    }

    pub fn cell_hi(&self, k: usize) -> f64 {
        self.t_start + (k + 1) as f64 * self.step
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.t_start + (k as f64 + 0.5) * self.step
    }

    /// Position of `t` in cell units, snapped to the nearest grid line when within tolerance.
    pub fn position(&self, t: f64) -> f64 {
        let u = (t - self.t_start) / self.step;
        let n = u.round();
        if (u - n).abs() <= ALIGN_TOL * n.abs().max(1.0) {
            n
        } else {
            u
        }
    }

    /// Index of the grid line at `t`, or an alignment error.
    pub fn line_index(&self, t: f64) -> Result<usize> {
        let u = self.position(t);
        if u.fract() != 0.0 || u < 0.0 || u > self.count as f64 {
            return Err(Error::Alignment(format!(
                "time {t} is not a grid line of [{}, {}) with step {}",
                self.t_start,
                self.t_end(),
                self.step
            )));
        }
        Ok(u as usize)
    }

    /// Cell containing `t` under the half-open convention.
    pub fn cell_containing(&self, t: f64) -> Option<usize> {
        let u = self.position(t);
        if u < 0.0 {
            return None;
        }
        let k = u.floor() as usize;
        (k < self.count).then_some(k)
    }

    pub fn same_step(&self, other: &Grid) -> bool {
        (self.step - other.step).abs() <= ALIGN_TOL * self.step
    }
}

/// Cell-constant function with values in R^dim, stored row-major (one row per cell).
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFn {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<SampledFn> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if values.len() != grid.count * dim {
            return Err(Error::Data(format!(
                "expected {} values ({} cells x {}), got {}",
                grid.count * dim,
                grid.count,
                dim,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value in cell {}", i / dim)));
        }
        Ok(SampledFn { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> SampledFn {
        SampledFn {
            grid,
            dim: dim.max(1),
            values: vec![0.0; grid.count * dim.max(1)],
        }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Result<SampledFn> {
        let mut values = Vec::with_capacity(grid.count * value.len());
        for _ in 0..grid.count {
            values.extend_from_slice(value);
        }
        SampledFn::new(grid, value.len(), values)
    }

    /// Samples a scalar function at cell midpoints.
    pub fn from_scalar_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<SampledFn> {
        let values = (0..grid.count).map(|k| f(grid.midpoint(k))).collect();
        SampledFn::new(grid, 1, values)
    }

    /// Samples a vector function at cell midpoints.
    pub fn from_fn(grid: Grid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<SampledFn> {
        let mut values = Vec::with_capacity(grid.count * dim);
        for k in 0..grid.count {
            let v = f(grid.midpoint(k));
            if v.len() != dim {
                return Err(Error::Data(format!("sampler returned {} components, expected {dim}", v.len())));
            }
            values.extend(v);
        }
        SampledFn::new(grid, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.count
    }

    pub fn is_empty(&self) -> bool {
        self.grid.count == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Value on the cell containing `t`.
    pub fn at(&self, t: f64) -> Result<&[f64]> {
        self.grid
            .cell_containing(t)
            .map(|k| self.value(k))
            .ok_or_else(|| Error::Domain(format!("time {t} outside [{}, {})", self.grid.t_start, self.grid.t_end())))
    }

    /// Value at the present instant 0: the cell containing 0, or the last cell when 0 is the right end.
    pub fn current(&self) -> &[f64] {
        match self.grid.cell_containing(0.0) {
            Some(k) => self.value(k),
            None => self.value(self.grid.count - 1),
        }
    }

    /// Component `j` of every cell.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .map(euclid)
            .fold(0.0, f64::max)
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if a > b {
            return Err(Error::Domain(format!("integration limits reversed: {a} > {b}")));
        }
        let ua = self.grid.position(a);
        let ub = self.grid.position(b);
        let n = self.grid.count as f64;
        if ua < 0.0 || ub > n {
            return Err(Error::Domain(format!(
                "[{a}, {b}] not inside [{}, {}]",
                self.grid.t_start,
                self.grid.t_end()
            )));
        }
        let mut out = vec![0.0; self.dim];
        if ua == ub {
            return Ok(out);
        }
        let first = ua.floor() as usize;
        let last = (ub.ceil() as usize).max(first + 1) - 1;
        if first == last {
            let w = ub - ua;
            for (o, v) in out.iter_mut().zip(self.value(first)) {
                *o = w * v * self.grid.step;
            }
            return Ok(out);
        }
        let w_first = (first + 1) as f64 - ua;
        let w_last = ub - last as f64;
        for (j, o) in out.iter_mut().enumerate() {
            let mut full = 0.0;
            for k in first + 1..last {
                full += self.values[k * self.dim + j];
            }
            let partial = w_first * self.values[first * self.dim + j] + w_last * self.values[last * self.dim + j];
            *o = self.grid.step * (full + partial);
        }
        Ok(out)
    }

    /// Restriction to `[a, b)`, re-based onto `[-(b - a), 0)`.
    pub fn window(&self, a: f64, b: f64) -> Result<SampledFn> {
        let ia = self.grid.line_index(a)?;
        let ib = self.grid.line_index(b)?;
        self.window_cells(ia, ib)
    }

    /// Cells `ia..ib` re-based so that they end at 0.
    pub fn window_cells(&self, ia: usize, ib: usize) -> Result<SampledFn> {
        if ib <= ia || ib > self.grid.count {
            return Err(Error::Alignment(format!("cell range {ia}..{ib} empty or outside 0..{}", self.grid.count)));
        }
        let n = ib - ia;
        let grid = Grid::new(-(n as f64) * self.grid.step, self.grid.step, n)?;
        Ok(SampledFn {
            grid,
            dim: self.dim,
            values: self.values[ia * self.dim..ib * self.dim].to_vec(),
        })
    }

    pub fn append(&self, v: &[f64]) -> Result<SampledFn> {
        let mut out = self.clone();
        out.push(v)?;
        Ok(out)
    }

    pub fn push(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Data(format!("appended value has {} components, expected {}", v.len(), self.dim)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("appended value is not finite".into()));
        }
        self.values.extend_from_slice(v);
        self.grid.count += 1;
        Ok(())
    }

    /// Same values on a grid shifted to start at `t_start`.
    pub fn rebased(&self, t_start: f64) -> SampledFn {
        SampledFn {
            grid: Grid {
                t_start,
                ..self.grid
            },
            dim: self.dim,
            values: self.values.clone(),
        }
    }

    pub fn sub(&self, other: &SampledFn) -> Result<SampledFn> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(SampledFn {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    pub fn scaled(&self, factor: f64) -> SampledFn {
        SampledFn {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &SampledFn) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    fn check_compatible(&self, other: &SampledFn) -> Result<()> {
        if self.dim != other.dim || self.grid.count != other.grid.count || !self.grid.same_step(&other.grid) {
            return Err(Error::Alignment(format!(
                "incompatible functions: {} cells x {} vs {} cells x {}",
                self.grid.count, self.dim, other.grid.count, other.dim
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W, lo: &str, hi: &str, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![lo.to_string(), hi.to_string()];
        if names.len() == self.dim {
            header.extend(names.iter().cloned());
        } else {
            header.extend((1..=self.dim).map(|j| format!("v_{j}")));
        }
        w.write_record(&header)?;
        for k in 0..self.grid.count {
            let mut row = vec![fmt17(self.grid.cell_lo(k)), fmt17(self.grid.cell_hi(k))];
            row.extend(self.value(k).iter().map(|v| fmt17(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `t_lo, t_hi, v_1..v_n`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, "t_lo", "t_hi", &[])?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<SampledFn> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Data(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() < 3 {
                return Err(Error::Data("csv rows need t_lo, t_hi and at least one value".into()));
            }
            rows.push(row);
        }
        let first = rows.first().ok_or_else(|| Error::Data("empty csv".into()))?;
        let (t0, step, dim) = (first[0], first[1] - first[0], first.len() - 2);
        let grid = Grid::new(t0, step, rows.len())?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != dim + 2 {
                return Err(Error::Data(format!("row {k} has {} columns, expected {}", row.len(), dim + 2)));
            }
            if (row[0] - grid.cell_lo(k)).abs() > ALIGN_TOL * step.max(1.0) {
                return Err(Error::Alignment(format!("row {k} does not lie on a uniform grid")));
            }
            values.extend_from_slice(&row[2..]);
        }
        SampledFn::new(grid, dim, values)
    }
}

pub fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
