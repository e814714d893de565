//! Pixel flow to block grid: 2x2 average pooling, then 2x2 max pooling by
//! vector magnitude. Each grid cell summarizes a 4x4 pixel footprint.

use crate::error::{AadError, Result};
use crate::optical_flow::FlowField;

/// Pixels per grid cell along each axis.
pub const CELL_SIZE: usize = 4;

/// One representative displacement vector per 4x4 pixel block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFlowGrid {
    grid_w: usize,
    grid_h: usize,
    vx: Vec<f32>,
    vy: Vec<f32>,
}

impl BlockFlowGrid {
    pub fn new(grid_w: usize, grid_h: usize, vx: Vec<f32>, vy: Vec<f32>) -> Result<Self> {
        if vx.len() != grid_w * grid_h || vy.len() != grid_w * grid_h {
            return Err(AadError::Shape(format!(
                "block planes have {}/{} values, expected {}",
                vx.len(),
                vy.len(),
                grid_w * grid_h
            )));
        }
        Ok(Self { grid_w, grid_h, vx, vy })
    }

    pub fn zeros(grid_w: usize, grid_h: usize) -> Self {
        Self {
            grid_w,
            grid_h,
            vx: vec![0.0; grid_w * grid_h],
            vy: vec![0.0; grid_w * grid_h],
        }
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.grid_w, self.grid_h)
    }

    pub fn len(&self) -> usize {
        self.vx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vx.is_empty()
    }

    pub fn vx(&self) -> &[f32] {
        &self.vx
    }

    pub fn vy(&self) -> &[f32] {
        &self.vy
    }

    pub fn vector(&self, cell: usize) -> (f32, f32) {
        (self.vx[cell], self.vy[cell])
    }

    pub fn magnitude(&self, cell: usize) -> f64 {
        (self.vx[cell] as f64).hypot(self.vy[cell] as f64)
    }

    /// Sets one cell; handy for building test grids.
    pub fn set(&mut self, cell: usize, vx: f32, vy: f32) {
        self.vx[cell] = vx;
        self.vy[cell] = vy;
    }
}

fn check_poolable(flow: &FlowField) -> Result<()> {
    if flow.width() < 2 || flow.height() < 2 {
        return Err(AadError::Shape(format!(
            "cannot 2x2-pool a {}x{} field",
            flow.width(),
            flow.height()
        )));
    }
    Ok(())
}

/// Mean of each non-overlapping 2x2 block; a trailing odd row or column is
/// dropped.
pub fn average_pool_2x2(flow: &FlowField) -> Result<FlowField> {
    check_poolable(flow)?;
    let (w, h) = flow.dims();
    let (ow, oh) = (w / 2, h / 2);
    let mut vx = Vec::with_capacity(ow * oh);
    let mut vy = Vec::with_capacity(ow * oh);
    for by in 0..oh {
        for bx in 0..ow {
            let (mut sx, mut sy) = (0.0f64, 0.0f64);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (u, v) = flow.get(2 * bx + dx, 2 * by + dy);
                sx += u as f64;
                sy += v as f64;
            }
            vx.push((sx / 4.0) as f32);
            vy.push((sy / 4.0) as f32);
        }
    }
    FlowField::new(ow, oh, vx, vy)
}

/// Keeps, per 2x2 block, the whole vector with the largest magnitude.
/// Ties go to the first in row-major order.
pub fn max_pool_2x2(flow: &FlowField) -> Result<BlockFlowGrid> {
    check_poolable(flow)?;
    let (w, h) = flow.dims();
    let (ow, oh) = (w / 2, h / 2);
    let mut grid = BlockFlowGrid::zeros(ow, oh);
    for by in 0..oh {
        for bx in 0..ow {
            let mut best = flow.get(2 * bx, 2 * by);
            let mut best_sq = sq_norm(best);
            for (dx, dy) in [(1, 0), (0, 1), (1, 1)] {
                let v = flow.get(2 * bx + dx, 2 * by + dy);
                let m = sq_norm(v);
                if m > best_sq {
                    best = v;
                    best_sq = m;
                }
            }
            grid.set(by * ow + bx, best.0, best.1);
        }
    }
    Ok(grid)
}

fn sq_norm((x, y): (f32, f32)) -> f64 {
    let (x, y) = (x as f64, y as f64);
    x * x + y * y
}

/// Full reduction: average then max pooling. Grid size is `frame / 4`
/// (floor) along each axis.
pub fn pool_flow(flow: &FlowField) -> Result<BlockFlowGrid> {
    max_pool_2x2(&average_pool_2x2(flow)?)
}
