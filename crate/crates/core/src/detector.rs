//! k·σ window test per cell, fused with object-rarity flags.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::frame_io::encode_pgm;
use crate::motion_stats::{CellStats, Channel, StatsGrid};
use crate::object_map::{DetectionRecord, ObjectMap, ObjectParams};
use crate::pooling::{BlockFlowGrid, CELL_SIZE};

/// Which statistics drive the window test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TestChannel {
    Vx,
    Vy,
    #[default]
    Magnitude,
    /// Anomalous if any of the three channels leaves its window.
    Any,
}

impl TestChannel {
    fn channels(self) -> &'static [Channel] {
        match self {
            TestChannel::Vx => &[Channel::Vx],
            TestChannel::Vy => &[Channel::Vy],
            TestChannel::Magnitude => &[Channel::Magnitude],
            TestChannel::Any => &Channel::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Half-width of the normal window in standard deviations.
    pub k: f64,
    /// Observations a cell needs before it may fire.
    pub warmup: u32,
    pub sigma_floor: f64,
    pub motion_epsilon: f64,
    pub channel: TestChannel,
    /// Anomalous cells needed to flag a frame.
    pub min_cells: usize,
    pub use_objects: bool,
    /// Halve the history of cells flagged anomalous.
    pub adapt: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: 3.0,
            warmup: 30,
            sigma_floor: 0.01,
            motion_epsilon: 0.1,
            channel: TestChannel::Magnitude,
            min_cells: 1,
            use_objects: false,
            adapt: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(AadError::Config("detector: k must be positive".into()));
        }
        if self.warmup < 2 {
            return Err(AadError::Config("detector: warmup must be >= 2".into()));
        }
        if self.min_cells < 1 {
            return Err(AadError::Config("detector: min_cells must be >= 1".into()));
        }
        if !(self.sigma_floor >= 0.0) || !(self.motion_epsilon >= 0.0) {
            return Err(AadError::Config(
                "detector: sigma_floor and motion_epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Normal,
    Anomalous,
    Warmup,
}

impl CellLabel {
    /// Gray level used in label images.
    pub fn gray(self) -> u8 {
        match self {
            CellLabel::Normal => 0,
            CellLabel::Warmup => 128,
            CellLabel::Anomalous => 255,
        }
    }
}

/// Per-cell labels for one frame plus frame-level summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    grid_w: usize,
    grid_h: usize,
    labels: Vec<CellLabel>,
    /// Number of anomalous cells.
    pub frame_score: usize,
    pub frame_flag: bool,
    /// Largest motion z-score among cells past warmup (0 if none).
    pub max_zscore: f64,
    /// True once any cell has completed warmup.
    pub warm: bool,
}

impl AnomalyMap {
    pub fn from_labels(grid_w: usize, grid_h: usize, labels: Vec<CellLabel>, min_cells: usize) -> Self {
        assert_eq!(labels.len(), grid_w * grid_h);
        let frame_score = labels.iter().filter(|&&l| l == CellLabel::Anomalous).count();
        let warm = labels.iter().any(|&l| l != CellLabel::Warmup);
        Self {
            grid_w,
            grid_h,
            labels,
            frame_score,
            frame_flag: frame_score >= min_cells,
            max_zscore: 0.0,
            warm,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.grid_w, self.grid_h)
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn label(&self, cell: usize) -> CellLabel {
        self.labels[cell]
    }

    pub fn is_anomalous(&self, cell: usize) -> bool {
        self.labels[cell] == CellLabel::Anomalous
    }

    /// Label image at one pixel per cell: 0 normal, 128 warmup, 255 anomalous.
    pub fn to_pgm(&self) -> Vec<u8> {
        let samples: Vec<u8> = self.labels.iter().map(|l| l.gray()).collect();
        encode_pgm(self.grid_w, self.grid_h, &samples)
    }
}

/// Window test for one observation against one cell's history.
pub fn classify_cell(stats: &CellStats, x: f64, cfg: &DetectorConfig) -> CellLabel {
    if stats.count < cfg.warmup as f64 {
        return CellLabel::Warmup;
    }
    let sigma = stats.std_dev().max(cfg.sigma_floor);
    if (x - stats.mean).abs() > cfg.k * sigma {
        CellLabel::Anomalous
    } else {
        CellLabel::Normal
    }
}

/// Labels every cell of one frame against a snapshot of the statistics.
///
/// Cells still in warmup are labelled so; cells at or below
/// `motion_epsilon` are normal; the rest are window-tested. With
/// `use_objects`, any cell set in `object_flags` becomes anomalous.
pub fn detect_frame(
    grid: &StatsGrid,
    blocks: &BlockFlowGrid,
    object_flags: Option<&[bool]>,
    cfg: &DetectorConfig,
) -> Result<AnomalyMap> {
    if grid.dims() != blocks.dims() {
        return Err(AadError::Shape(format!(
            "stats grid {:?} does not match block grid {:?}",
            grid.dims(),
            blocks.dims()
        )));
    }
    if let Some(flags) = object_flags {
        if flags.len() != grid.len() {
            return Err(AadError::Shape(format!(
                "{} object flags for {} cells",
                flags.len(),
                grid.len()
            )));
        }
    }
    let channels = cfg.channel.channels();
    let mut labels = Vec::with_capacity(grid.len());
    let mut max_z = 0.0f64;
    for cell in 0..grid.len() {
        let magnitude = blocks.magnitude(cell);
        let mut label = if grid.cell(cell, Channel::Magnitude).count < cfg.warmup as f64 {
            CellLabel::Warmup
        } else if magnitude <= cfg.motion_epsilon {
            CellLabel::Normal
        } else {
            let mut label = CellLabel::Normal;
            for &ch in channels {
                let stats = grid.cell(cell, ch);
                let x = ch.observe(blocks, cell);
                if let Ok(z) = stats.zscore(x, cfg.sigma_floor) {
                    if z.is_finite() {
                        max_z = max_z.max(z);
                    }
                }
                if classify_cell(stats, x, cfg) == CellLabel::Anomalous {
                    label = CellLabel::Anomalous;
                }
            }
            label
        };
        if cfg.use_objects && object_flags.is_some_and(|f| f[cell]) {
            label = CellLabel::Anomalous;
        }
        labels.push(label);
    }
    let mut map = AnomalyMap::from_labels(grid.grid_w(), grid.grid_h(), labels, cfg.min_cells);
    map.max_zscore = max_z;
    map.warm = grid
        .channel(Channel::Magnitude)
        .any(|s| s.count >= cfg.warmup as f64);
    Ok(map)
}

/// Marks every cell whose 4x4 pixel footprint overlaps the box of an
/// object-anomalous record.
pub fn cell_flags_from_objects(
    records: &[DetectionRecord],
    map: &ObjectMap,
    grid_dims: (usize, usize),
    params: &ObjectParams,
) -> Vec<bool> {
    let (gw, gh) = grid_dims;
    let mut flags = vec![false; gw * gh];
    for r in records {
        if !map.object_anomaly(r, params.p_rare, params.min_total) {
            continue;
        }
        let (xs, ys) = r.pixel_span(map.width(), map.height());
        if xs.is_empty() || ys.is_empty() {
            continue;
        }
        let cx = xs.start / CELL_SIZE..((xs.end - 1) / CELL_SIZE + 1).min(gw);
        let cy = ys.start / CELL_SIZE..((ys.end - 1) / CELL_SIZE + 1).min(gh);
        for y in cy {
            for x in cx.clone() {
                flags[y * gw + x] = true;
            }
        }
    }
    flags
}

/// `frame,score,flag,max_zscore` rows for a run.
pub fn anomaly_csv<'a>(maps: impl IntoIterator<Item = (usize, &'a AnomalyMap)>) -> String {
    let mut out = String::from("frame,score,flag,max_zscore\n");
    for (frame, m) in maps {
        writeln!(out, "{frame},{},{},{}", m.frame_score, u8::from(m.frame_flag), m.max_zscore)
            .expect("writing to a String cannot fail");
    }
    out
}
