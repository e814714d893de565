use log::warn;

use crate::frame_io::{FrameBuffer, MIN_FLOW_SIDE};

/// Standard deviation of the blur applied before each downsampling step.
pub const PYRAMID_BLUR_SIGMA: f64 = 1.0;

pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with replicate borders.
pub(crate) fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel(sigma, radius);
    let r = radius as isize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (i, w) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, width as isize - 1) as usize;
                acc += w * row[sx];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for (i, w) in kernel.iter().enumerate() {
            let sy = (y as isize + i as isize - r).clamp(0, height as isize - 1) as usize;
            let src_row = &tmp[sy * width..(sy + 1) * width];
            let dst_row = &mut out[y * width..(y + 1) * width];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    out
}

/// Bilinear sample with replicate clamping outside the plane.
#[inline]
pub(crate) fn sample_bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
    let bottom = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear resize using pixel-center alignment.
pub(crate) fn resize_bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let rx = sw as f64 / dw as f64;
    let ry = sh as f64 / dh as f64;
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let sy = (y as f64 + 0.5) * ry - 0.5;
        for x in 0..dw {
            let sx = (x as f64 + 0.5) * rx - 0.5;
            out.push(sample_bilinear(src, sw, sh, sx, sy));
        }
    }
    out
}

pub(crate) fn scaled_side(side: usize, scale: f64) -> usize {
    (side as f64 * scale).round() as usize
}

/// Number of pyramid levels that keep every level at least 8x8.
pub fn usable_levels(width: usize, height: usize, levels: usize, scale: f64) -> usize {
    let (mut w, mut h) = (width, height);
    let mut usable = 1;
    while usable < levels {
        let (nw, nh) = (scaled_side(w, scale), scaled_side(h, scale));
        if nw < MIN_FLOW_SIDE || nh < MIN_FLOW_SIDE {
            break;
        }
        w = nw;
        h = nh;
        usable += 1;
    }
    usable
}

/// Builds a Gaussian pyramid; level 0 is the input frame.
///
/// Each further level is the previous one blurred (σ = 1) and resampled by
/// `scale`. If a level would drop below 8x8 the pyramid is truncated and a
/// warning is logged.
pub fn gaussian_pyramid(frame: &FrameBuffer, levels: usize, scale: f64) -> Vec<FrameBuffer> {
    let usable = usable_levels(frame.width(), frame.height(), levels.max(1), scale);
    if usable < levels {
        warn!(
            "pyramid clamped from {levels} to {usable} levels for {}x{} input",
            frame.width(),
            frame.height()
        );
    }
    let mut out = vec![frame.clone()];
    let mut plane: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
    let (mut w, mut h) = frame.dims();
    for _ in 1..usable {
        let blurred = gaussian_blur(&plane, w, h, PYRAMID_BLUR_SIGMA);
        let (nw, nh) = (scaled_side(w, scale), scaled_side(h, scale));
        plane = resize_bilinear(&blurred, w, h, nw, nh);
        w = nw;
        h = nh;
        out.push(FrameBuffer::from_fn(w, h, |x, y| plane[y * w + x] as f32).with_index(frame.index));
    }
    out
}
