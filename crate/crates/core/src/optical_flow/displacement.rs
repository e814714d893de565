use super::poly::PolyExpansion;
use super::pyramid::sample_bilinear;
use super::FlowField;

/// Systems with `det(G)` below this keep the prior displacement.
pub const SINGULAR_DET: f64 = 1e-9;

/// Mean over a `window`x`window` box, restricted to in-bounds pixels.
pub(crate) fn box_mean(src: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let r = window / 2;
    let mut rows = vec![0.0; src.len()];
    let mut prefix = vec![0.0; width.max(height) + 1];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            prefix[x + 1] = prefix[x] + row[x];
        }
        for x in 0..width {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(width);
            rows[y * width + x] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        }
    }
    let mut out = vec![0.0; src.len()];
    for x in 0..width {
        for y in 0..height {
            prefix[y + 1] = prefix[y] + rows[y * width + x];
        }
        for y in 0..height {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(height);
            out[y * width + x] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        }
    }
    out
}

/// One Farneback refinement step.
///
/// `next` is sampled at `x + prior(x)`. With `A` the mean of both quadratic
/// terms and `Δb = -(b_next − b_prev)/2 + A·prior`, the normal equations
/// `G = AᵀA`, `h = AᵀΔb` are averaged over the window and solved per pixel.
pub fn displacement_step(
    prev: &PolyExpansion,
    next: &PolyExpansion,
    prior: &FlowField,
    window_size: usize,
) -> FlowField {
    let (w, h) = (prev.width, prev.height);
    assert_eq!((w, h), (next.width, next.height), "expansion size mismatch");
    assert_eq!((w, h), prior.dims(), "prior flow size mismatch");
    let len = w * h;
    let mut g11 = vec![0.0; len];
    let mut g12 = vec![0.0; len];
    let mut g22 = vec![0.0; len];
    let mut h1 = vec![0.0; len];
    let mut h2 = vec![0.0; len];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = prior.vx()[i] as f64;
            let dy = prior.vy()[i] as f64;
            let sx = x as f64 + dx;
            let sy = y as f64 + dy;
            let sample = |p: &[f64]| sample_bilinear(p, w, h, sx, sy);

            let a11 = (prev.a11[i] + sample(&next.a11)) * 0.5;
            let a12 = (prev.a12[i] + sample(&next.a12)) * 0.5;
            let a22 = (prev.a22[i] + sample(&next.a22)) * 0.5;
            let db1 = -0.5 * (sample(&next.b1) - prev.b1[i]) + a11 * dx + a12 * dy;
            let db2 = -0.5 * (sample(&next.b2) - prev.b2[i]) + a12 * dx + a22 * dy;

            g11[i] = a11 * a11 + a12 * a12;
            g12[i] = a11 * a12 + a12 * a22;
            g22[i] = a12 * a12 + a22 * a22;
            h1[i] = a11 * db1 + a12 * db2;
            h2[i] = a12 * db1 + a22 * db2;
        }
    }

    let g11 = box_mean(&g11, w, h, window_size);
    let g12 = box_mean(&g12, w, h, window_size);
    let g22 = box_mean(&g22, w, h, window_size);
    let h1 = box_mean(&h1, w, h, window_size);
    let h2 = box_mean(&h2, w, h, window_size);

    let mut vx = Vec::with_capacity(len);
    let mut vy = Vec::with_capacity(len);
    for i in 0..len {
        let det = g11[i] * g22[i] - g12[i] * g12[i];
        let (dx, dy) = if det < SINGULAR_DET || !det.is_finite() {
            (prior.vx()[i], prior.vy()[i])
        } else {
            let dx = (g22[i] * h1[i] - g12[i] * h2[i]) / det;
            let dy = (g11[i] * h2[i] - g12[i] * h1[i]) / det;
            if dx.is_finite() && dy.is_finite() {
                (dx as f32, dy as f32)
            } else {
                (prior.vx()[i], prior.vy()[i])
            }
        };
        vx.push(dx);
        vy.push(dy);
    }
    FlowField::from_parts(w, h, vx, vy)
}
