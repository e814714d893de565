//! Dense optical flow by polynomial expansion (Farneback), refined
//! coarse-to-fine over a Gaussian pyramid.

mod displacement;
mod poly;
mod pyramid;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::frame_io::{FrameBuffer, MIN_FLOW_SIDE};

pub use displacement::{displacement_step, SINGULAR_DET};
pub use poly::{polynomial_expansion, PolyExpansion};
pub use pyramid::{gaussian_pyramid, usable_levels, PYRAMID_BLUR_SIGMA};

pub(crate) use pyramid::resize_bilinear;

/// Per-pixel displacement between two frames, in pixels per frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vx: Vec<f32>,
    vy: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vx: Vec<f32>, vy: Vec<f32>) -> Result<Self> {
        if vx.len() != width * height || vy.len() != width * height {
            return Err(AadError::Shape(format!(
                "flow planes have {}/{} values, expected {}",
                vx.len(),
                vy.len(),
                width * height
            )));
        }
        if vx.iter().chain(&vy).any(|v| !v.is_finite()) {
            return Err(AadError::Input("flow contains non-finite values".into()));
        }
        Ok(Self { width, height, vx, vy })
    }

    pub(crate) fn from_parts(width: usize, height: usize, vx: Vec<f32>, vy: Vec<f32>) -> Self {
        debug_assert_eq!(vx.len(), width * height);
        debug_assert_eq!(vy.len(), width * height);
        Self { width, height, vx, vy }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_parts(width, height, vec![0.0; width * height], vec![0.0; width * height])
    }

    /// Uniform field, mostly useful in tests and demos.
    pub fn constant(width: usize, height: usize, vx: f32, vy: f32) -> Self {
        Self::from_parts(width, height, vec![vx; width * height], vec![vy; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vx(&self) -> &[f32] {
        &self.vx
    }

    pub fn vy(&self) -> &[f32] {
        &self.vy
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.vx[i], self.vy[i])
    }

    pub fn max_magnitude(&self) -> f32 {
        self.vx
            .iter()
            .zip(&self.vy)
            .map(|(x, y)| x.hypot(*y))
            .fold(0.0, f32::max)
    }

    /// Bilinear resize; displacement components are multiplied by the
    /// per-axis size ratio.
    fn upscale(&self, width: usize, height: usize) -> Self {
        let to64 = |p: &[f32]| p.iter().map(|&v| v as f64).collect::<Vec<_>>();
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let vx = resize_bilinear(&to64(&self.vx), self.width, self.height, width, height);
        let vy = resize_bilinear(&to64(&self.vy), self.width, self.height, width, height);
        Self::from_parts(
            width,
            height,
            vx.iter().map(|v| (v * sx) as f32).collect(),
            vy.iter().map(|v| (v * sy) as f32).collect(),
        )
    }
}

/// Settings for [`farneback_flow`] and frame pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub iterations: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
    pub frame_stride: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window_size: 15,
            iterations: 5,
            poly_n: 5,
            poly_sigma: 1.2,
            frame_stride: 2,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AadError::Config(format!("flow: {msg}")));
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels must be >= 1");
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad("pyramid_scale must lie in (0, 1)");
        }
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return bad("window_size must be odd and >= 3");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.poly_n < 3 || self.poly_n % 2 == 0 {
            return bad("poly_n must be odd and >= 3");
        }
        if !(self.poly_sigma > 0.0) {
            return bad("poly_sigma must be positive");
        }
        if self.frame_stride < 1 {
            return bad("frame_stride must be >= 1");
        }
        Ok(())
    }
}

/// Dense flow from `prev` to `next`: `prev(x) ≈ next(x + flow(x))`.
pub fn farneback_flow(prev: &FrameBuffer, next: &FrameBuffer, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if prev.dims() != next.dims() {
        return Err(AadError::Shape(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    let (w, h) = prev.dims();
    if w < MIN_FLOW_SIDE || h < MIN_FLOW_SIDE || w < params.poly_n || h < params.poly_n {
        return Err(AadError::Shape(format!(
            "frame {w}x{h} below the {MIN_FLOW_SIDE}x{MIN_FLOW_SIDE} flow minimum"
        )));
    }
    let prev_pyr = gaussian_pyramid(prev, params.pyramid_levels, params.pyramid_scale);
    let next_pyr = gaussian_pyramid(next, params.pyramid_levels, params.pyramid_scale);

    let mut flow: Option<FlowField> = None;
    for (p, n) in prev_pyr.iter().zip(&next_pyr).rev() {
        let (lw, lh) = p.dims();
        let mut current = match flow.take() {
            Some(coarse) => coarse.upscale(lw, lh),
            None => FlowField::zeros(lw, lh),
        };
        let pe = polynomial_expansion(p, params.poly_n, params.poly_sigma);
        let ne = polynomial_expansion(n, params.poly_n, params.poly_sigma);
        for _ in 0..params.iterations {
            current = displacement_step(&pe, &ne, &current, params.window_size);
        }
        flow = Some(current);
    }
    Ok(flow.expect("pyramid has at least one level"))
}

/// Yields `(frame[t - stride], frame[t])` for every `t >= stride`.
pub struct FramePairs<I> {
    inner: I,
    stride: usize,
    window: VecDeque<FrameBuffer>,
}

impl<I: Iterator<Item = FrameBuffer>> Iterator for FramePairs<I> {
    type Item = (FrameBuffer, FrameBuffer);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let frame = self.inner.next()?;
            if self.window.len() == self.stride {
                let older = self.window.pop_front().expect("window is full");
                self.window.push_back(frame.clone());
                return Some((older, frame));
            }
            self.window.push_back(frame);
        }
    }
}

pub fn frame_pairing<I>(stream: I, stride: usize) -> FramePairs<I::IntoIter>
where
    I: IntoIterator<Item = FrameBuffer>,
{
    assert!(stride >= 1, "stride must be >= 1");
    FramePairs {
        inner: stream.into_iter(),
        stride,
        window: VecDeque::with_capacity(stride),
    }
}

/// Index pairs `(t - stride, t)` for a sequence of `frames` frames.
pub fn pair_indices(frames: usize, stride: usize) -> Vec<(usize, usize)> {
    (stride..frames).map(|t| (t - stride, t)).collect()
}
