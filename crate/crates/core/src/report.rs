//! Decision-boundary grids and small CSV writers for plot-ready output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};
use crate::model::ParameterSet;

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Extent {
    /// Covers two moons with noise 0.1 with some margin.
    fn default() -> Self {
        Extent { x_min: -1.5, x_max: 2.5, y_min: -1.0, y_max: 1.5 }
    }
}

impl Extent {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if finite && self.x_min < self.x_max && self.y_min < self.y_max {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid extent {self:?}")))
        }
    }
}

/// `resolution²` points, x varying fastest, both axes including their endpoints.
pub fn grid_points(extent: &Extent, resolution: usize) -> Result<Matrix> {
    extent.validate()?;
    if resolution < 2 {
        return Err(Error::Config(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let mut m = Matrix::zeros(resolution * resolution, 2);
    for j in 0..resolution {
        for i in 0..resolution {
            let r = j * resolution + i;
            m.set(r, 0, step(extent.x_min, extent.x_max, i));
            m.set(r, 1, step(extent.y_min, extent.y_max, j));
        }
    }
    Ok(m)
}

/// Class probabilities of a model over a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub extent: Extent,
    pub resolution: usize,
    /// `resolution² × K`, rows in [`grid_points`] order.
    pub points: Matrix,
    pub probabilities: Matrix,
    pub argmax: Vec<usize>,
}

/// Deterministic forward pass of `params` at every grid point.
pub fn boundary_grid(params: &ParameterSet, extent: &Extent, resolution: usize) -> Result<BoundaryGrid> {
    let points = grid_points(extent, resolution)?;
    let probabilities = params.probabilities(&points)?;
    let argmax = (0..probabilities.rows()).map(|r| argmax(probabilities.row(r))).collect();
    Ok(BoundaryGrid { extent: *extent, resolution, points, probabilities, argmax })
}

impl BoundaryGrid {
    pub fn num_classes(&self) -> usize {
        self.probabilities.cols()
    }

    /// `x,y,p_0,…,p_{K-1},argmax`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let k = self.num_classes();
        let mut out = String::from("x,y");
        for c in 0..k {
            write!(out, ",p_{c}").expect("writing to a String");
        }
        out.push_str(",argmax\n");
        for r in 0..self.points.rows() {
            write!(out, "{},{}", self.points.get(r, 0), self.points.get(r, 1)).expect("writing to a String");
            for p in self.probabilities.row(r) {
                write!(out, ",{p}").expect("writing to a String");
            }
            writeln!(out, ",{}", self.argmax[r]).expect("writing to a String");
        }
        out
    }
}
