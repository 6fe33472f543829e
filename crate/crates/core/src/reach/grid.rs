use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell decomposition of a box, linearized row-major with axis 0
/// slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Builds the grid over `bounds` with edge lengths `h` (one per axis, or a
/// single value used for every axis).
pub fn discretize(bounds: &[[f64; 2]], h: &[f64]) -> Result<CellGrid> {
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::arg("box", "empty box"));
    }
    let h: Vec<f64> = match h.len() {
        1 => vec![h[0]; dim],
        n if n == dim => h.to_vec(),
        n => return Err(Error::arg("h", format!("expected 1 or {dim} edge lengths, got {n}"))),
    };
    if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::arg("h", format!("edge length must be positive, got {bad}")));
    }
    let mut counts = Vec::with_capacity(dim);
    for (k, [lo, hi]) in bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::arg("box", format!("axis {k}: need lo < hi")));
        }
        let ratio = (hi - lo) / h[k];
        let nearest = ratio.round();
        // (3 - (-3)) / 0.1 evaluates to 60.000000000000007; treat as 60
        let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { ratio.ceil() };
        counts.push((n as usize).max(1));
    }
    let total: usize = counts.iter().product();
    if total > u32::MAX as usize {
        return Err(Error::arg("h", format!("grid of {total} cells is too large")));
    }
    Ok(CellGrid { lo: bounds.iter().map(|b| b[0]).collect(), hi: bounds.iter().map(|b| b[1]).collect(), h, counts })
}

impl CellGrid {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis cell index of `x`: floor convention, points on a face belong
    /// to the higher cell, clamped into the grid.
    pub fn multi_index_of(&self, x: &[f64]) -> Vec<usize> {
        (0..self.dim()).map(|k| self.axis_index(k, x[k])).collect()
    }

    fn axis_index(&self, k: usize, v: f64) -> usize {
        let raw = ((v - self.lo[k]) / self.h[k]).floor();
        if raw <= 0.0 || raw.is_nan() {
            0
        } else {
            (raw as usize).min(self.counts[k] - 1)
        }
    }

    pub fn cell_of(&self, x: &[f64]) -> usize {
        x.iter().enumerate().fold(0, |lin, (k, &v)| lin * self.counts[k] + self.axis_index(k, v))
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |lin, (i, c)| lin * c + i)
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = lin % self.counts[k];
            lin /= self.counts[k];
        }
        idx
    }

    /// Lower and upper corner of a cell.
    pub fn cell_bounds(&self, lin: usize) -> (Vec<f64>, Vec<f64>) {
        let idx = self.multi_index(lin);
        let lo: Vec<f64> = (0..self.dim()).map(|k| self.lo[k] + idx[k] as f64 * self.h[k]).collect();
        let hi: Vec<f64> = lo.iter().zip(&self.h).map(|(l, h)| l + h).collect();
        (lo, hi)
    }

    pub fn cell_center(&self, lin: usize) -> Vec<f64> {
        let idx = self.multi_index(lin);
        (0..self.dim()).map(|k| self.lo[k] + (idx[k] as f64 + 0.5) * self.h[k]).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Test points of a cell. One sample is the center; up to `1 + 2^d`
    /// adds the corner offsets at `+-h/4`; larger counts use a regular
    /// `k^d` lattice with `k = ceil(samples^(1/d))`.
    pub fn sample_points(&self, lin: usize, samples: usize) -> Vec<Vec<f64>> {
        let center = self.cell_center(lin);
        let d = self.dim();
        let corners = 1usize << d;
        if samples <= 1 {
            return vec![center];
        }
        if samples <= 1 + corners {
            let mut pts = vec![center.clone()];
            for mask in 0..corners {
                pts.push(
                    (0..d)
                        .map(|k| {
                            let s = if mask >> k & 1 == 1 { 0.25 } else { -0.25 };
                            center[k] + s * self.h[k]
                        })
                        .collect(),
                );
            }
            return pts;
        }
        let per_axis = (samples as f64).powf(1.0 / d as f64).ceil() as usize;
        let (lo, _) = self.cell_bounds(lin);
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut m| {
                let mut p = vec![0.0; d];
                for k in (0..d).rev() {
                    let j = m % per_axis;
                    m /= per_axis;
                    p[k] = lo[k] + (j as f64 + 0.5) / per_axis as f64 * self.h[k];
                }
                p
            })
            .collect()
    }

    /// Cells within Chebyshev index distance `radius` of `lin`, itself included.
    pub fn neighborhood(&self, lin: usize, radius: usize) -> Vec<usize> {
        let center = self.multi_index(lin);
        let ranges: Vec<(usize, usize)> = (0..self.dim())
            .map(|k| (center[k].saturating_sub(radius), (center[k] + radius).min(self.counts[k] - 1)))
            .collect();
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.linear(&idx));
            let mut k = self.dim();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if idx[k] < ranges[k].1 {
                    idx[k] += 1;
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }

    pub fn same_shape(&self, other: &CellGrid) -> bool {
        self == other
    }
}
