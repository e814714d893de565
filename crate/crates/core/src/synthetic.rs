//! Ground-truthed synthetic scenes: slow Gaussian-blob "walkers" on random
//! walks and an optional fast intruder, plus sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::evaluation::GroundTruth;
use crate::frame_io::FrameBuffer;

pub const WALKER_SIGMA: f64 = 3.0;
pub const INTRUDER_SIGMA: f64 = 6.0;
const BACKGROUND: f64 = 100.0;
const TEXTURE_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntruderSpec {
    /// First frame (inclusive) the intruder is visible.
    pub entry: usize,
    /// Last frame (inclusive) the intruder is visible.
    pub exit: usize,
    /// Pixels per frame.
    pub speed: f64,
    /// Heading in degrees, 0 = +x, 90 = +y.
    #[serde(default)]
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub walkers: usize,
    /// Maximum walker speed, pixels per frame.
    pub walker_speed: f64,
    pub intruder: Option<IntruderSpec>,
    pub noise_sigma: f64,
    /// Standard deviation of the static background texture; 0 gives a
    /// flat background.
    pub background_texture: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            frames: 200,
            walkers: 12,
            walker_speed: 1.0,
            intruder: None,
            noise_sigma: 1.0,
            background_texture: 10.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 3 {
            return Err(AadError::Config("scene: frames must be >= 3".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(AadError::Config("scene: frame must be at least 16x16".into()));
        }
        if !(self.walker_speed >= 0.0) || !(self.noise_sigma >= 0.0) || !(self.background_texture >= 0.0) {
            return Err(AadError::Config(
                "scene: walker_speed, noise_sigma and background_texture must be non-negative".into(),
            ));
        }
        if let Some(i) = &self.intruder {
            if !(i.speed > self.walker_speed) {
                return Err(AadError::Config(
                    "scene: intruder speed must exceed walker_speed".into(),
                ));
            }
            if i.entry > i.exit || i.exit >= self.frames {
                return Err(AadError::Config(format!(
                    "scene: intruder interval {}..={} outside 0..{}",
                    i.entry, i.exit, self.frames
                )));
            }
        }
        Ok(())
    }

    /// Per-frame 0/1 labels: 1 exactly on the intruder's visible frames.
    pub fn ground_truth(&self) -> GroundTruth {
        let labels = (0..self.frames)
            .map(|t| {
                self.intruder
                    .as_ref()
                    .is_some_and(|i| (i.entry..=i.exit).contains(&t))
            })
            .collect();
        GroundTruth::new(labels)
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amplitude: f64,
}

/// Reflects `p` into `[lo, hi]`, flipping `v` on each bounce.
fn reflect(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    for _ in 0..8 {
        if *p < lo {
            *p = 2.0 * lo - *p;
            *v = -*v;
        } else if *p > hi {
            *p = 2.0 * hi - *p;
            *v = -*v;
        } else {
            return;
        }
    }
    *p = p.clamp(lo, hi);
}

/// Precomputed blob positions for every frame.
fn trajectories(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<Blob>> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let margin = WALKER_SIGMA;
    let mut walkers: Vec<(Blob, f64, f64)> = (0..spec.walkers)
        .map(|_| {
            let blob = Blob {
                x: rng.gen_range(margin..w - margin),
                y: rng.gen_range(margin..h - margin),
                sigma: WALKER_SIGMA,
                amplitude: if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(50.0..90.0),
            };
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            let speed = spec.walker_speed * rng.gen_range(0.5..1.0);
            (blob, speed * heading.cos(), speed * heading.sin())
        })
        .collect();
    let jitter = Normal::new(0.0, 0.25 * spec.walker_speed.max(1e-12)).expect("finite sigma");

    let intruder_path = spec.intruder.as_ref().map(|i| {
        let heading = i.direction.to_radians();
        let (vx, vy) = (i.speed * heading.cos(), i.speed * heading.sin());
        let half = (i.exit - i.entry) as f64 / 2.0;
        (w / 2.0 - vx * half, h / 2.0 - vy * half, vx, vy)
    });

    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut blobs: Vec<Blob> = walkers.iter().map(|(b, _, _)| *b).collect();
        if let (Some(i), Some((x0, y0, vx, vy))) = (&spec.intruder, intruder_path) {
            if (i.entry..=i.exit).contains(&t) {
                let m = INTRUDER_SIGMA;
                let dt = (t - i.entry) as f64;
                let (mut x, mut y) = (x0, y0);
                let (mut vx, mut vy) = (vx, vy);
                // step frame by frame so bounces stay exact
                x = x.clamp(m, w - m);
                y = y.clamp(m, h - m);
                for _ in 0..dt as usize {
                    x += vx;
                    y += vy;
                    reflect(&mut x, &mut vx, m, w - m);
                    reflect(&mut y, &mut vy, m, h - m);
                }
                blobs.push(Blob {
                    x,
                    y,
                    sigma: INTRUDER_SIGMA,
                    amplitude: 120.0,
                });
            }
        }
        frames.push(blobs);

        for (b, vx, vy) in walkers.iter_mut() {
            *vx += jitter.sample(rng);
            *vy += jitter.sample(rng);
            let s = vx.hypot(*vy);
            if s > spec.walker_speed {
                *vx *= spec.walker_speed / s;
                *vy *= spec.walker_speed / s;
            }
            b.x += *vx;
            b.y += *vy;
            reflect(&mut b.x, vx, margin, w - margin);
            reflect(&mut b.y, vy, margin, h - margin);
        }
    }
    frames
}

/// Renders Gaussian blobs over a flat background, without noise.
pub fn render_blobs(width: usize, height: usize, background: f64, blobs: &[(f64, f64, f64, f64)]) -> Vec<f64> {
    let mut plane = vec![background; width * height];
    for &(cx, cy, sigma, amplitude) in blobs {
        let reach = 4.0 * sigma;
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil().max(0.0) as usize).min(width);
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil().max(0.0) as usize).min(height);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in y0..y1 {
            let dy = y as f64 - cy;
            for x in x0..x1 {
                let dx = x as f64 - cx;
                plane[y * width + x] += amplitude * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    plane
}

/// Paints blobs over `plane` front to back. Each blob is an opaque disc of
/// intensity `background + amplitude` with a Gaussian alpha profile, so it
/// hides whatever lies under its core.
pub fn composite_blobs(plane: &mut [f64], width: usize, height: usize, blobs: &[(f64, f64, f64, f64)]) {
    for &(cx, cy, sigma, amplitude) in blobs {
        let reach = 4.0 * sigma;
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil().max(0.0) as usize).min(width);
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil().max(0.0) as usize).min(height);
        let inv = 1.0 / (2.0 * sigma * sigma);
        let fg = BACKGROUND + amplitude;
        for y in y0..y1 {
            let dy = y as f64 - cy;
            for x in x0..x1 {
                let dx = x as f64 - cx;
                let alpha = (-(dx * dx + dy * dy) * inv).exp();
                let p = &mut plane[y * width + x];
                *p += alpha * (fg - *p);
            }
        }
    }
}

/// Static texture: one small blob per 16 px², amplitudes scaled so the
/// texture's standard deviation is roughly `sigma`.
fn background(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if spec.background_texture == 0.0 {
        return vec![BACKGROUND; spec.width * spec.height];
    }
    let (w, h) = (spec.width as f64, spec.height as f64);
    let n = (spec.width * spec.height / 16).max(1);
    // each unit blob of sigma s adds variance pi s^2 / (2 * 16) per pixel on average
    let amp = spec.background_texture / (std::f64::consts::PI * TEXTURE_SIGMA.powi(2) / 32.0).sqrt();
    let spots: Vec<_> = (0..n)
        .map(|_| {
            let a = if rng.gen_bool(0.5) { amp } else { -amp };
            (rng.gen_range(0.0..w), rng.gen_range(0.0..h), TEXTURE_SIGMA, a)
        })
        .collect();
    render_blobs(spec.width, spec.height, BACKGROUND, &spots)
}

/// Renders the scene; deterministic for a given spec (including seed).
pub fn render_sequence(spec: &SceneSpec) -> Result<(Vec<FrameBuffer>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = background(spec, &mut rng);
    let paths = trajectories(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| AadError::Config(e.to_string()))?;
    let frames = paths
        .iter()
        .enumerate()
        .map(|(t, blobs)| {
            let params: Vec<_> = blobs.iter().map(|b| (b.x, b.y, b.sigma, b.amplitude)).collect();
            let mut plane = base.clone();
            composite_blobs(&mut plane, spec.width, spec.height, &params);
            let mut i = 0;
            FrameBuffer::from_fn(spec.width, spec.height, |_, _| {
                let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                let v = plane[i] + n;
                i += 1;
                v as f32
            })
            .with_index(t)
        })
        .collect();
    Ok((frames, spec.ground_truth()))
}
