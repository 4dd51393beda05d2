//! Simulated forward paths and the Brownian increments that drive them.
//!
//! All matrices are `paths x time` and stored column-major, so the cross-section of
//! every path at one grid point is a contiguous slice. The regression solver works
//! one time slice at a time.

use ndarray::{Array2, ShapeBuilder};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::SeedSpec;

/// Two independent `M x N` matrices of `N(0, h)` draws.
#[derive(Clone, Debug)]
pub struct Increments {
    pub dw1: Array2<f64>,
    pub dw2: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct PathBatch {
    grid: TimeGrid,
    states: Array2<f64>,
    dw1: Array2<f64>,
    dw2: Array2<f64>,
}

impl PathBatch {
    /// Assembles a batch; arrays are copied into column-major layout when needed.
    pub fn new(grid: TimeGrid, states: Array2<f64>, increments: Increments) -> Result<Self> {
        let (m, cols) = states.dim();
        let n = grid.steps();
        if m == 0 {
            return Err(Error::config("a path batch needs at least one path"));
        }
        if cols != n + 1 || increments.dw1.dim() != (m, n) || increments.dw2.dim() != (m, n) {
            return Err(Error::config(format!(
                "path batch dimensions do not match the grid: states {:?}, dW1 {:?}, dW2 {:?}, N = {n}",
                states.dim(),
                increments.dw1.dim(),
                increments.dw2.dim()
            )));
        }
        Ok(PathBatch {
            grid,
            states: column_major(states),
            dw1: column_major(increments.dw1),
            dw2: column_major(increments.dw2),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.states.nrows()
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn dw1(&self) -> &Array2<f64> {
        &self.dw1
    }

    pub fn dw2(&self) -> &Array2<f64> {
        &self.dw2
    }

    pub fn increments(&self) -> Increments {
        Increments {
            dw1: self.dw1.clone(),
            dw2: self.dw2.clone(),
        }
    }

    /// States of every path at grid node `i`.
    pub fn state_column(&self, i: usize) -> &[f64] {
        column(&self.states, i)
    }

    pub fn dw1_column(&self, i: usize) -> &[f64] {
        column(&self.dw1, i)
    }

    pub fn dw2_column(&self, i: usize) -> &[f64] {
        column(&self.dw2, i)
    }

    pub fn spot(&self) -> f64 {
        self.states[[0, 0]]
    }
}

pub(crate) fn column(a: &Array2<f64>, i: usize) -> &[f64] {
    let m = a.nrows();
    let all = a
        .as_slice_memory_order()
        .expect("path matrices are contiguous");
    &all[i * m..(i + 1) * m]
}

pub(crate) fn column_major(a: Array2<f64>) -> Array2<f64> {
    if a.t().is_standard_layout() {
        a
    } else {
        let mut out = Array2::zeros(a.raw_dim().f());
        out.assign(&a);
        out
    }
}

/// Wraps a time-major buffer (`cols` slices of `rows` values) as a `rows x cols` matrix.
pub(crate) fn from_time_major(rows: usize, cols: usize, data: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols).f(), data).expect("buffer length matches shape")
}

/// Draws the two Brownian increment matrices for `paths` paths on `grid`.
pub fn draw_increments(grid: &TimeGrid, paths: usize, seed: SeedSpec) -> Result<Increments> {
    if paths == 0 {
        return Err(Error::config("number of paths must be at least 1"));
    }
    let n = grid.steps();
    let sqrt_h = grid.mesh().sqrt();

    // path-major scratch, one contiguous row per path
    let mut scratch = vec![0.0f64; 2 * n * paths];
    scratch
        .par_chunks_mut(2 * n)
        .enumerate()
        .for_each(|(p, row)| {
            let mut normals = seed.path_normals(p as u64);
            for step in 0..n {
                let (a, b) = normals.next_pair();
                row[step] = sqrt_h * a;
                row[n + step] = sqrt_h * b;
            }
        });

    let mut dw1 = vec![0.0f64; n * paths];
    let mut dw2 = vec![0.0f64; n * paths];
    dw1.par_chunks_mut(paths)
        .zip(dw2.par_chunks_mut(paths))
        .enumerate()
        .for_each(|(step, (c1, c2))| {
            for p in 0..paths {
                c1[p] = scratch[2 * n * p + step];
                c2[p] = scratch[2 * n * p + n + step];
            }
        });

    Ok(Increments {
        dw1: from_time_major(paths, n, dw1),
        dw2: from_time_major(paths, n, dw2),
    })
}
