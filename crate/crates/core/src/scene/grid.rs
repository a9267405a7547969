use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sampled axis: `count` points on `[min, max]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        AxisSpec { min, max, count }
    }

    /// Axis of `count` points with spacing `step`, centered on `center`.
    pub fn centered(center: f64, step: f64, count: usize) -> Self {
        let half = step * (count as f64 - 1.0) / 2.0;
        AxisSpec::new(center - half, center + half, count)
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn coords(&self) -> Vec<f64> {
        let step = self.step();
        let mut v: Vec<f64> = (0..self.count).map(|i| self.min + i as f64 * step).collect();
        v[self.count - 1] = self.max;
        v
    }

    /// Fractional sample index of `x`.
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.min) / self.step()
    }
}

/// Voxel lattice. Three axes are `(x, y, z)`; two axes are `(y, z)` in the
/// plane `x = 0`, matching the linear and circular image planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        let g = GridSpec { axes };
        g.validate()?;
        Ok(g)
    }

    pub fn plane_yz(y: AxisSpec, z: AxisSpec) -> Result<Self> {
        Self::new(vec![y, z])
    }

    pub fn volume(x: AxisSpec, y: AxisSpec, z: AxisSpec) -> Result<Self> {
        Self::new(vec![x, y, z])
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.axes.len()) {
            return Err(Error::invalid("grid.axes", "grid must have 2 or 3 axes"));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if !(a.min.is_finite() && a.max.is_finite()) || a.max <= a.min {
                return Err(Error::invalid(format!("grid.axes[{i}]"), "need finite max > min"));
            }
            if a.count < 2 {
                return Err(Error::invalid(format!("grid.axes[{i}].count"), "need at least 2 samples"));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Which of x (0), y (1), z (2) each grid axis samples.
    pub fn physical_axes(&self) -> &'static [usize] {
        if self.dims() == 2 {
            &[1, 2]
        } else {
            &[0, 1, 2]
        }
    }

    /// Grid axis sampling physical axis `p`, if any.
    pub fn axis_for(&self, p: usize) -> Option<&AxisSpec> {
        self.physical_axes()
            .iter()
            .position(|&q| q == p)
            .map(|i| &self.axes[i])
    }

    /// Physical coordinates of every voxel in row-major order.
    pub fn voxel_positions(&self) -> Vec<[f64; 3]> {
        let coords: Vec<Vec<f64>> = self.axes.iter().map(AxisSpec::coords).collect();
        let mut out = Vec::with_capacity(self.len());
        if self.dims() == 2 {
            for &y in &coords[0] {
                for &z in &coords[1] {
                    out.push([0.0, y, z]);
                }
            }
        } else {
            for &x in &coords[0] {
                for &y in &coords[1] {
                    for &z in &coords[2] {
                        out.push([x, y, z]);
                    }
                }
            }
        }
        out
    }

    /// Physical center of the grid as `[x, y, z]`.
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (a, &p) in self.axes.iter().zip(self.physical_axes()) {
            c[p] = a.center();
        }
        c
    }
}
