//! Uniform tensor grids on the centered box `[-L, L)^N` and scalar fields
//! sampled on them.
//!
//! Nodes along each axis sit at `-L + k h` with `h = 2L/n`, `k = 0..n`;
//! there is a node at `-L` and none at `+L`.  Flat storage is row-major
//! with axis 0 slowest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AFLT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: Vec<usize>,
    extent: f64,
}

impl Grid {
    /// Uniform node count on every axis.
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Grid> {
        Grid::with_axis_counts(vec![n; dim], extent)
    }

    pub fn with_axis_counts(n: Vec<usize>, extent: f64) -> Result<Grid> {
        if n.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        if let Some(bad) = n.iter().find(|&&k| k < 4) {
            return Err(Error::invalid(format!(
                "grid needs at least 4 nodes per axis, got {bad}"
            )));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::invalid(format!(
                "grid extent must be positive and finite, got {extent}"
            )));
        }
        let total = n
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or_else(|| Error::invalid("grid size overflow"))?;
        if total > (1usize << 31) {
            return Err(Error::invalid(format!("grid too large: {total} nodes")));
        }
        Ok(Grid {
            dim: n.len(),
            n,
            extent,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Node spacing `2L / n_i` on axis `i`.
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extent / self.n[axis] as f64
    }

    /// Largest spacing over all axes (they coincide on uniform grids).
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.spacing(i))
            .fold(0.0f64, f64::max)
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `k` on `axis`.
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        debug_assert!(k < self.n[axis]);
        -self.extent + k as f64 * self.spacing(axis)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        let mut flat = 0usize;
        for (axis, &k) in multi.iter().enumerate() {
            debug_assert!(k < self.n[axis]);
            flat = flat * self.n[axis] + k;
        }
        flat
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.n[axis];
            rest /= self.n[axis];
        }
        debug_assert_eq!(rest, 0);
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            let k = rest % self.n[axis];
            rest /= self.n[axis];
            out[axis] = self.coord(axis, k);
        }
    }

    pub fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.node(flat, &mut out);
        out
    }

    /// True when `x` lies in the half-open box `[-L, L)^N`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c >= -self.extent && c < self.extent)
    }

    /// True when `x` lies in the closed hull of the nodes,
    /// `[-L, L - h_i]` per axis, where multilinear interpolation is defined.
    pub fn in_interpolation_hull(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &c)| {
            let top = self.extent - self.spacing(i);
            c >= -self.extent && c <= top + 1e-12 * self.spacing(i)
        })
    }

    /// Multi-index of the node nearest to `x`, or `None` outside the box.
    pub fn nearest_node(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.dim {
            return None;
        }
        let mut multi = vec![0usize; self.dim];
        for (i, &c) in x.iter().enumerate() {
            let k = ((c + self.extent) / self.spacing(i)).round() as isize;
            if k < 0 || k >= self.n[i] as isize {
                return None;
            }
            multi[i] = k as usize;
        }
        Some(multi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        let len = grid.len();
        Field {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    /// Sample `f` at every node.
    pub fn sample<F>(grid: Grid, f: F) -> Field
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |buf, flat| {
                    grid.node(flat, buf);
                    f(buf)
                },
            )
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, multi: &[usize]) -> f64 {
        self.values[self.grid.flat_index(multi)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `L^2` norm with the cell volume weight, `sqrt(h^N sum u^2)`.
    pub fn l2_norm(&self) -> f64 {
        let cell: f64 = (0..self.grid.dim()).map(|i| self.grid.spacing(i)).product();
        (cell * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Multi-index of the first node attaining the maximum value.
    pub fn argmax_node(&self) -> Vec<usize> {
        let mut best = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        let mut multi = vec![0usize; self.grid.dim()];
        self.grid.multi_index(best, &mut multi);
        multi
    }

    /// Multilinear interpolation; `None` outside the node hull.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        if x.len() != g.dim() {
            return None;
        }
        let dim = g.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0f64; dim];
        for i in 0..dim {
            let h = g.spacing(i);
            let f = (x[i] + g.extent()) / h;
            if f < -1e-9 {
                return None;
            }
            let mut k = f.floor() as isize;
            let mut t = f - k as f64;
            if k < 0 {
                k = 0;
                t = 0.0;
            }
            // top node: allow x == L - h (and tiny rounding past it)
            if k as usize >= g.counts()[i] - 1 {
                if f > (g.counts()[i] - 1) as f64 + 1e-9 {
                    return None;
                }
                k = g.counts()[i] as isize - 2;
                t = 1.0;
            }
            base[i] = k as usize;
            frac[i] = t;
        }
        let mut acc = 0.0;
        let corners = 1usize << dim;
        let mut multi = vec![0usize; dim];
        for c in 0..corners {
            let mut w = 1.0;
            for i in 0..dim {
                let up = (c >> i) & 1 == 1;
                multi[i] = base[i] + up as usize;
                w *= if up { frac[i] } else { 1.0 - frac[i] };
            }
            if w != 0.0 {
                acc += w * self.values[g.flat_index(&multi)];
            }
        }
        Some(acc)
    }

    /// Binary serialization: magic `AFLT`, version, dim, per-axis counts,
    /// extent, then values in storage order, all little-endian.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        for &n in self.grid.counts() {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        w.write_all(&self.grid.extent().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Field> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                magic, MAGIC
            )));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version}"
            )));
        }
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 || dim > 16 {
            return Err(Error::Format(format!("implausible dim {dim}")));
        }
        let mut n = Vec::with_capacity(dim);
        for _ in 0..dim {
            n.push(read_u32(&mut r)? as usize);
        }
        let extent = read_f64(&mut r)?;
        let grid = Grid::with_axis_counts(n, extent)
            .map_err(|e| Error::Format(format!("invalid grid header: {e}")))?;
        let mut values = vec![0.0f64; grid.len()];
        for v in values.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after field values".into()));
        }
        Ok(Field { grid, values })
    }

    /// CSV export, one row per node, columns `x1..xN,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let dim = self.grid.dim();
        for i in 0..dim {
            write!(w, "x{},", i + 1)?;
        }
        writeln!(w, "value")?;
        let mut buf = vec![0.0; dim];
        for (flat, v) in self.values.iter().enumerate() {
            self.grid.node(flat, &mut buf);
            for c in &buf {
                write!(w, "{:.17e},", c)?;
            }
            writeln!(w, "{:.17e}", v)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_spacing_and_nodes() {
        // dim 2, n 8, extent 4: h = 1, first node -4, last 3
        let g = Grid::new(2, 8, 4.0).unwrap();
        assert_eq!(g.spacing(0), 1.0);
        assert_eq!(g.coord(0, 0), -4.0);
        assert_eq!(g.coord(0, 7), 3.0);
        assert_eq!(g.len(), 64);

        let g = Grid::new(1, 4, 1.0).unwrap();
        let pts: Vec<f64> = (0..4).map(|k| g.coord(0, k)).collect();
        assert_eq!(pts, vec![-1.0, -0.5, 0.0, 0.5]);

        let g = Grid::new(3, 64, 10.0).unwrap();
        assert!((g.spacing(2) - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn rejects_tiny_and_bad_grids() {
        assert!(Grid::new(2, 3, 1.0).is_err());
        assert!(Grid::new(2, 8, 0.0).is_err());
        assert!(Grid::new(0, 8, 1.0).is_err());
    }

    #[test]
    fn row_major_axis0_slowest() {
        let g = Grid::with_axis_counts(vec![4, 8], 1.0).unwrap();
        assert_eq!(g.flat_index(&[0, 0]), 0);
        assert_eq!(g.flat_index(&[0, 1]), 1);
        assert_eq!(g.flat_index(&[1, 0]), 8);
        let mut m = [0usize; 2];
        g.multi_index(11, &mut m);
        assert_eq!(m, [1, 3]);
    }

    #[test]
    fn sample_cosine_mean_is_zero() {
        // one full period on the half-open box: node average vanishes
        let g = Grid::new(1, 8, 0.5).unwrap();
        let f = Field::sample(g, |x| (2.0 * std::f64::consts::PI * x[0]).cos());
        assert!(f.mean().abs() < 1e-15);
        assert!((f.sup_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_on_nodes_and_midpoints() {
        let g = Grid::new(2, 8, 4.0).unwrap();
        let f = Field::sample(g, |x| 2.0 * x[0] + 3.0 * x[1]);
        // multilinear interpolation reproduces affine functions exactly
        assert!((f.interpolate(&[0.25, -1.3]).unwrap() - (0.5 - 3.9)).abs() < 1e-12);
        assert!((f.interpolate(&[-4.0, -4.0]).unwrap() + 20.0).abs() < 1e-12);
        // hull is [-L, L-h]
        assert_eq!(f.interpolate(&[3.5, 0.0]), None);
        assert!(f.interpolate(&[3.0, 3.0]).is_some());
    }

    #[test]
    fn binary_roundtrip_bitwise() {
        let g = Grid::with_axis_counts(vec![5, 7], 2.5).unwrap();
        let f = Field::sample(g, |x| (x[0] * 1.7).sin() + x[1] * x[1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        f.write_binary(&path).unwrap();
        let back = Field::read_binary(&path).unwrap();
        assert_eq!(f, back);
        // corrupt magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(Field::read_binary(&path).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let f = Field::zeros(g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        f.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(Field::read_binary(&path).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::new(2, 4, 1.0).unwrap();
        let f = Field::sample(g, |x| x[0] + x[1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,value");
        assert_eq!(text.lines().count(), 1 + 16);
    }

    proptest! {
        #[test]
        fn flat_multi_roundtrip(n0 in 4usize..10, n1 in 4usize..10, k in 0usize..10_000) {
            let g = Grid::with_axis_counts(vec![n0, n1], 1.0).unwrap();
            let flat = k % g.len();
            let mut m = [0usize; 2];
            g.multi_index(flat, &mut m);
            prop_assert_eq!(g.flat_index(&m), flat);
        }
    }
}
