//! Per-cell streaming motion statistics (the distribution map).
//!
//! Each grid cell keeps a `(mean, max, min, variance, count)` tuple for the
//! horizontal, vertical and magnitude channels of its block flow. Means follow
//! the running-average recurrence, variances the single-pass Welford
//! recurrence. After an anomaly the count is halved so that new data pulls
//! the mean faster.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::detector::AnomalyMap;
use crate::error::{AadError, Result};
use crate::pooling::BlockFlowGrid;

pub const STATS_MAGIC: [u8; 4] = *b"AADS";
pub const STATS_VERSION: u32 = 1;
pub const STATS_HEADER_LEN: usize = 20;

/// Flow channels tracked per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Vx,
    Vy,
    #[default]
    Magnitude,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Vx, Channel::Vy, Channel::Magnitude];

    pub fn index(self) -> usize {
        match self {
            Channel::Vx => 0,
            Channel::Vy => 1,
            Channel::Magnitude => 2,
        }
    }

    /// The observation this channel takes from a block vector.
    pub fn observe(self, blocks: &BlockFlowGrid, cell: usize) -> f64 {
        let (vx, vy) = blocks.vector(cell);
        match self {
            Channel::Vx => vx as f64,
            Channel::Vy => vy as f64,
            Channel::Magnitude => blocks.magnitude(cell),
        }
    }
}

/// Streaming 5-tuple for one channel of one cell.
///
/// `count` is real-valued because adaptation halves it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub variance: f64,
    pub count: f64,
}

impl CellStats {
    pub fn is_empty(&self) -> bool {
        self.count == 0.0
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Folds in one observation.
    ///
    /// `mean' = (mean·N + x) / N'` and, once `N' >= 2`,
    /// `var' = ((N'-2)·var + (x - mean')(x - mean)) / (N'-1)`.
    pub fn update(&self, x: f64) -> Result<CellStats> {
        if !x.is_finite() {
            return Err(AadError::Input(format!("observation {x} is not finite")));
        }
        if self.count <= 0.0 {
            return Ok(CellStats {
                mean: x,
                max: x,
                min: x,
                variance: 0.0,
                count: 1.0,
            });
        }
        let n = self.count + 1.0;
        let mean = weighted_mean(self.mean, self.count, x);
        let variance = if n >= 2.0 {
            (((n - 2.0) * self.variance + (x - mean) * (x - self.mean)) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let max = self.max.max(x);
        let min = self.min.min(x);
        Ok(CellStats {
            mean: mean.clamp(min, max),
            max,
            min,
            variance,
            count: n,
        })
    }

    /// Folds in an observation that was flagged anomalous.
    ///
    /// With `N` the index of the incoming sample (`count + 1`), the history
    /// is weighted by `(N-1)/2` instead of `N-1`, and the count becomes
    /// `(N-1)/2 + 1`. Variance is carried over. On empty stats this is the
    /// same as a first observation.
    pub fn adapt(&self, x: f64) -> Result<CellStats> {
        if !x.is_finite() {
            return Err(AadError::Input(format!("observation {x} is not finite")));
        }
        if self.count <= 0.0 {
            return self.update(x);
        }
        let half = self.count / 2.0;
        let mean = weighted_mean(self.mean, half, x);
        let max = self.max.max(x);
        let min = self.min.min(x);
        Ok(CellStats {
            mean: mean.clamp(min, max),
            max,
            min,
            variance: self.variance,
            count: half + 1.0,
        })
    }

    /// `|x - mean| / max(σ, sigma_floor)`.
    pub fn zscore(&self, x: f64, sigma_floor: f64) -> Result<f64> {
        if self.count < 2.0 {
            return Err(AadError::InsufficientData(format!(
                "z-score needs 2 observations, have {}",
                self.count
            )));
        }
        Ok((x - self.mean).abs() / self.std_dev().max(sigma_floor))
    }
}

/// `(mean·weight + x) / (weight + 1)`: a running mean where the history
/// counts as `weight` observations.
#[inline]
pub fn weighted_mean(mean: f64, weight: f64, x: f64) -> f64 {
    (mean * weight + x) / (weight + 1.0)
}

/// Grid of per-channel cell statistics matching a [`BlockFlowGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct StatsGrid {
    grid_w: usize,
    grid_h: usize,
    cells: Vec<[CellStats; 3]>,
}

impl StatsGrid {
    pub fn new(grid_w: usize, grid_h: usize) -> Self {
        Self {
            grid_w,
            grid_h,
            cells: vec![[CellStats::default(); 3]; grid_w * grid_h],
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
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, cell: usize, channel: Channel) -> &CellStats {
        &self.cells[cell][channel.index()]
    }

    pub fn cell_mut(&mut self, cell: usize, channel: Channel) -> &mut CellStats {
        &mut self.cells[cell][channel.index()]
    }

    /// Per-channel slice of every cell, row-major.
    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &CellStats> + '_ {
        self.cells.iter().map(move |c| &c[channel.index()])
    }

    /// Folds one frame of block flow into the grid.
    ///
    /// Only cells moving faster than `motion_epsilon` are touched. Cells
    /// labelled anomalous in `flags` are adapted instead of updated.
    pub fn update_grid(
        &mut self,
        blocks: &BlockFlowGrid,
        flags: Option<&AnomalyMap>,
        motion_epsilon: f64,
    ) -> Result<()> {
        if blocks.dims() != self.dims() {
            return Err(AadError::Shape(format!(
                "block grid {:?} does not match stats grid {:?}",
                blocks.dims(),
                self.dims()
            )));
        }
        if let Some(map) = flags {
            if map.dims() != self.dims() {
                return Err(AadError::Shape(format!(
                    "anomaly map {:?} does not match stats grid {:?}",
                    map.dims(),
                    self.dims()
                )));
            }
        }
        for cell in 0..self.cells.len() {
            if blocks.magnitude(cell) <= motion_epsilon {
                continue;
            }
            let flagged = flags.is_some_and(|m| m.is_anomalous(cell));
            for channel in Channel::ALL {
                let x = channel.observe(blocks, cell);
                let stats = &mut self.cells[cell][channel.index()];
                *stats = if flagged {
                    stats.adapt(x)?
                } else {
                    stats.update(x)?
                };
            }
        }
        Ok(())
    }

    /// Serializes as `AADS` header (magic, version, grid_w, grid_h, channel
    /// count; 4-byte little-endian) followed by every cell's channels as
    /// `mean, max, min, variance, count` little-endian `f64`.
    pub fn write_snapshot<W: Write>(&self, sink: &mut W) -> Result<usize> {
        let mut buf = Vec::with_capacity(STATS_HEADER_LEN + self.cells.len() * 3 * 40);
        buf.extend_from_slice(&STATS_MAGIC);
        for field in [STATS_VERSION, self.grid_w as u32, self.grid_h as u32, 3] {
            buf.extend_from_slice(&field.to_le_bytes());
        }
        for cell in &self.cells {
            for s in cell {
                for v in [s.mean, s.max, s.min, s.variance, s.count] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        sink.write_all(&buf)?;
        Ok(buf.len())
    }

    pub fn read_snapshot<R: Read>(source: &mut R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::decode_snapshot(&bytes)
    }

    pub fn decode_snapshot(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < STATS_HEADER_LEN {
            return Err(AadError::Length {
                expected: STATS_HEADER_LEN,
                found: bytes.len(),
            });
        }
        if bytes[0..4] != STATS_MAGIC {
            return Err(AadError::Format("bad stats snapshot magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        if word(1) != STATS_VERSION as usize {
            return Err(AadError::Format(format!("unsupported stats version {}", word(1))));
        }
        let (grid_w, grid_h, channels) = (word(2), word(3), word(4));
        if channels != 3 {
            return Err(AadError::Format(format!("expected 3 channels, found {channels}")));
        }
        let n = grid_w
            .checked_mul(grid_h)
            .ok_or_else(|| AadError::Format("dimensions overflow".into()))?;
        let expected = STATS_HEADER_LEN + n * 3 * 40;
        if bytes.len() != expected {
            return Err(AadError::Length {
                expected,
                found: bytes.len(),
            });
        }
        let mut values = bytes[STATS_HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut next = || values.next().expect("length checked");
        let cells = (0..n)
            .map(|_| {
                [(); 3].map(|_| CellStats {
                    mean: next(),
                    max: next(),
                    min: next(),
                    variance: next(),
                    count: next(),
                })
            })
            .collect();
        Ok(Self { grid_w, grid_h, cells })
    }
}
