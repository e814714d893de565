//! Browser bindings: small scenes computed in wasm and painted on canvases
//! by `www/index.html`. Everything here also runs natively.

use aad_core::detector::DetectorConfig;
use aad_core::evaluation::sweep_auc;
use aad_core::motion_stats::CellStats;
use aad_core::object_map::ObjectParams;
use aad_core::optical_flow::{farneback_flow, FlowField, FlowParams};
use aad_core::frame_io::FrameBuffer;
use aad_core::pipeline::{compute_artifacts, roc_sweep, SweepMode};
use aad_core::synthetic::{render_blobs, render_sequence, IntruderSpec, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

pub const SHIFT_W: usize = 96;
pub const SHIFT_H: usize = 72;

fn js_err(e: aad_core::AadError) -> JsError {
    JsError::new(&e.to_string())
}

/// Flow between a textured frame and the same texture moved by (dx, dy).
#[wasm_bindgen]
pub struct ShiftResult {
    width: usize,
    height: usize,
    frame: Vec<u8>,
    rgba: Vec<u8>,
    mean_vx: f64,
    mean_vy: f64,
    epe: f64,
}

#[wasm_bindgen]
impl ShiftResult {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }
    /// First frame as RGBA.
    pub fn frame(&self) -> Vec<u8> {
        self.frame.clone()
    }
    /// Flow colour-coded by direction (hue) and magnitude (brightness).
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mean_vx(&self) -> f64 {
        self.mean_vx
    }
    #[wasm_bindgen(getter)]
    pub fn mean_vy(&self) -> f64 {
        self.mean_vy
    }
    /// Mean endpoint error away from the border.
    #[wasm_bindgen(getter)]
    pub fn epe(&self) -> f64 {
        self.epe
    }
}

fn texture(dx: f64, dy: f64, seed: u64) -> FrameBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spots: Vec<_> = (0..SHIFT_W * SHIFT_H / 12)
        .map(|_| {
            let a = rng.gen_range(-60.0..60.0);
            (rng.gen_range(-8.0..SHIFT_W as f64 + 8.0) + dx, rng.gen_range(-8.0..SHIFT_H as f64 + 8.0) + dy, 2.0, a)
        })
        .collect();
    let plane = render_blobs(SHIFT_W, SHIFT_H, 128.0, &spots);
    FrameBuffer::from_fn(SHIFT_W, SHIFT_H, |x, y| plane[y * SHIFT_W + x] as f32)
}

fn gray_rgba(frame: &FrameBuffer) -> Vec<u8> {
    frame
        .data()
        .iter()
        .flat_map(|&v| {
            let g = v.round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// HSV wheel: hue from angle, value from magnitude relative to `scale`.
pub fn flow_rgba(flow: &FlowField, scale: f32) -> Vec<u8> {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    flow.vx()
        .iter()
        .zip(flow.vy())
        .flat_map(|(&vx, &vy)| {
            let v = ((vx * vx + vy * vy).sqrt() / scale).min(1.0);
            let h = (vy.atan2(vx).to_degrees() + 360.0) % 360.0 / 60.0;
            let f = h - h.floor();
            let (p, q, t) = (0.0, v * (1.0 - f), v * f);
            let (r, g, b) = match h as u32 {
                0 => (v, t, p),
                1 => (q, v, p),
                2 => (p, v, t),
                3 => (p, q, v),
                4 => (t, p, v),
                _ => (v, p, q),
            };
            [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8, 255]
        })
        .collect()
}

#[wasm_bindgen]
pub fn shift_flow(dx: f64, dy: f64, seed: u32) -> Result<ShiftResult, JsError> {
    let prev = texture(0.0, 0.0, seed as u64);
    let next = texture(dx, dy, seed as u64);
    let flow = farneback_flow(&prev, &next, &FlowParams::default()).map_err(js_err)?;
    let margin = 12;
    let (mut sx, mut sy, mut err, mut n) = (0.0, 0.0, 0.0, 0.0);
    for y in margin..SHIFT_H - margin {
        for x in margin..SHIFT_W - margin {
            let (vx, vy) = flow.get(x, y);
            let (vx, vy) = (vx as f64, vy as f64);
            sx += vx;
            sy += vy;
            err += ((vx - dx).powi(2) + (vy - dy).powi(2)).sqrt();
            n += 1.0;
        }
    }
    let scale = flow.max_magnitude().max((dx.hypot(dy)) as f32);
    Ok(ShiftResult {
        width: SHIFT_W,
        height: SHIFT_H,
        frame: gray_rgba(&prev),
        rgba: flow_rgba(&flow, scale),
        mean_vx: sx / n,
        mean_vy: sy / n,
        epe: err / n,
    })
}

/// ROC of a small synthetic scene with an intruder moving at `speed`.
///
/// Returns `[k, tpr, fpr]` for k = 1..6 followed by the AUC.
#[wasm_bindgen]
pub fn intruder_roc(speed: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let spec = SceneSpec {
        width: 64,
        height: 48,
        frames: 80,
        walkers: 6,
        intruder: Some(IntruderSpec {
            entry: 55,
            exit: 70,
            speed,
            direction: 30.0,
        }),
        noise_sigma: 0.5,
        seed: seed as u64,
        ..Default::default()
    };
    let (frames, truth) = render_sequence(&spec).map_err(js_err)?;
    let (art, _) = compute_artifacts(&frames, &FlowParams::default(), None).map_err(js_err)?;
    let cfg = DetectorConfig {
        motion_epsilon: 0.5,
        min_cells: 2,
        ..Default::default()
    };
    let ks = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let points = roc_sweep(&art, &truth, &ks, &cfg, &ObjectParams::default(), SweepMode::Frozen).map_err(js_err)?;
    let mut out: Vec<f64> = points.iter().flat_map(|p| [p.k, p.tpr, p.fpr]).collect();
    out.push(sweep_auc(&points).map_err(js_err)?);
    Ok(out)
}

/// Running statistics over `values`, with samples from index `adapt_from`
/// on treated as anomalous (adaptive update). Returns `[mean, std, count]`
/// after each sample.
#[wasm_bindgen]
pub fn adaptive_trace(values: &[f64], adapt_from: usize) -> Result<Vec<f64>, JsError> {
    let mut s = CellStats::default();
    let mut out = Vec::with_capacity(values.len() * 3);
    for (i, &x) in values.iter().enumerate() {
        s = if i >= adapt_from { s.adapt(x) } else { s.update(x) }.map_err(js_err)?;
        out.extend([s.mean, s.std_dev(), s.count]);
    }
    Ok(out)
}
