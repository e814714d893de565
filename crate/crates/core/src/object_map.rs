//! Per-pixel object occurrence counts built from external detections.
//!
//! Every pixel holds one counter per class plus a running total, so the
//! probability of seeing class `c` at a pixel is `count[c] / total`. A
//! detection whose class is rare over its box, on a well-observed region,
//! is an object anomaly.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};

pub const OBJECTS_MAGIC: [u8; 4] = *b"AADO";
pub const OBJECTS_VERSION: u32 = 1;
pub const OBJECTS_HEADER_LEN: usize = 20;

/// Object-recognition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectParams {
    pub classes: usize,
    pub class_names: Vec<String>,
    /// Detections scoring below this are discarded on ingestion.
    pub score_threshold: f64,
    pub p_rare: f64,
    pub min_total: u32,
}

impl Default for ObjectParams {
    fn default() -> Self {
        Self {
            classes: 21,
            class_names: Vec::new(),
            score_threshold: 0.8,
            p_rare: 0.05,
            min_total: 20,
        }
    }
}

impl ObjectParams {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(AadError::Config("objects: classes must be >= 1".into()));
        }
        if !self.class_names.is_empty() && self.class_names.len() != self.classes {
            return Err(AadError::Config(format!(
                "objects: {} class names for {} classes",
                self.class_names.len(),
                self.classes
            )));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) || !(0.0..=1.0).contains(&self.p_rare) {
            return Err(AadError::Config(
                "objects: score_threshold and p_rare must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One detector output box, in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub class_id: usize,
    pub score: f64,
    /// `[x0, y0, x1, y1]`, exclusive of `x1`/`y1`.
    pub bbox: [f64; 4],
}

impl DetectionRecord {
    /// Pixel columns and rows covered by the box inside a `width`x`height`
    /// frame. Either range may be empty if the box lies outside.
    pub fn pixel_span(&self, width: usize, height: usize) -> (Range<usize>, Range<usize>) {
        let [x0, y0, x1, y1] = self.bbox;
        let clamp = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let xs = clamp(x0.floor(), width)..clamp(x1.ceil(), width);
        let ys = clamp(y0.floor(), height)..clamp(y1.ceil(), height);
        (xs, ys)
    }
}

#[derive(Deserialize)]
struct RawDetection {
    frame: usize,
    class_id: usize,
    score: f64,
    bbox: [f64; 4],
}

/// Parses JSON-lines detections, drops those below the score threshold and
/// sorts the rest by frame (stable within a frame).
pub fn parse_detections(source: &str, params: &ObjectParams) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawDetection = serde_json::from_str(trimmed).map_err(|e| AadError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let bad = |msg: String| AadError::Parse { line: line_no, msg };
        if raw.class_id >= params.classes {
            return Err(AadError::ClassRange {
                line: line_no,
                class_id: raw.class_id,
                classes: params.classes,
            });
        }
        if !(0.0..=1.0).contains(&raw.score) {
            return Err(bad(format!("score {} outside [0, 1]", raw.score)));
        }
        let [x0, y0, x1, y1] = raw.bbox;
        if raw.bbox.iter().any(|v| !v.is_finite()) {
            return Err(bad("bbox has non-finite coordinates".into()));
        }
        if x0 >= x1 || y0 >= y1 {
            return Err(bad(format!("degenerate bbox {:?}", raw.bbox)));
        }
        if raw.score < params.score_threshold {
            continue;
        }
        records.push(DetectionRecord {
            frame_index: raw.frame,
            class_id: raw.class_id,
            score: raw.score,
            bbox: raw.bbox,
        });
    }
    records.sort_by_key(|r| r.frame_index);
    Ok(records)
}

/// Per-pixel class counters followed by a total counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMap {
    width: usize,
    height: usize,
    classes: usize,
    counts: Vec<u32>,
}

impl ObjectMap {
    pub fn new(width: usize, height: usize, classes: usize) -> Self {
        Self {
            width,
            height,
            classes,
            counts: vec![0; width * height * (classes + 1)],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn base(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * (self.classes + 1)
    }

    pub fn count(&self, x: usize, y: usize, class_id: usize) -> u32 {
        self.counts[self.base(x, y) + class_id]
    }

    pub fn total(&self, x: usize, y: usize) -> u32 {
        self.counts[self.base(x, y) + self.classes]
    }

    /// Adds each record's box to its class counter and the total.
    pub fn accumulate<'a>(&mut self, records: impl IntoIterator<Item = &'a DetectionRecord>) {
        for r in records {
            debug_assert!(r.class_id < self.classes);
            let (xs, ys) = r.pixel_span(self.width, self.height);
            for y in ys {
                for x in xs.clone() {
                    let b = self.base(x, y);
                    self.counts[b + r.class_id] += 1;
                    self.counts[b + self.classes] += 1;
                }
            }
        }
    }

    pub fn class_probability(&self, x: usize, y: usize, class_id: usize) -> Result<f64> {
        let total = self.total(x, y);
        if total == 0 {
            return Err(AadError::NoHistory { x, y });
        }
        Ok(self.count(x, y, class_id) as f64 / total as f64)
    }

    /// True if the record's class is rare over its box.
    ///
    /// Only pixels with at least `min_total` observations count. The record
    /// is anomalous when those pixels cover at least half of the box and
    /// their mean class probability is below `p_rare`.
    pub fn object_anomaly(&self, record: &DetectionRecord, p_rare: f64, min_total: u32) -> bool {
        let (xs, ys) = record.pixel_span(self.width, self.height);
        let area = xs.len() * ys.len();
        if area == 0 || record.class_id >= self.classes {
            return false;
        }
        let mut observed = 0usize;
        let mut prob_sum = 0.0;
        for y in ys {
            for x in xs.clone() {
                let total = self.total(x, y);
                if total >= min_total.max(1) {
                    observed += 1;
                    prob_sum += self.count(x, y, record.class_id) as f64 / total as f64;
                }
            }
        }
        observed > 0 && 2 * observed >= area && prob_sum / (observed as f64) < p_rare
    }

    /// Serializes as `AADO` header (magic, version, width, height, classes;
    /// 4-byte little-endian) then each pixel's class counters and total as
    /// little-endian `u32`.
    pub fn write_snapshot<W: Write>(&self, sink: &mut W) -> Result<usize> {
        let mut buf = Vec::with_capacity(OBJECTS_HEADER_LEN + 4 * self.counts.len());
        buf.extend_from_slice(&OBJECTS_MAGIC);
        for v in [OBJECTS_VERSION, self.width as u32, self.height as u32, self.classes as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for c in &self.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        sink.write_all(&buf)?;
        Ok(buf.len())
    }

    pub fn read_snapshot<R: Read>(source: &mut R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        if bytes.len() < OBJECTS_HEADER_LEN || bytes[..4] != OBJECTS_MAGIC {
            return Err(AadError::Format("not an object map snapshot".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        if word(1) != OBJECTS_VERSION as usize {
            return Err(AadError::Format(format!("unsupported object map version {}", word(1))));
        }
        let (width, height, classes) = (word(2), word(3), word(4));
        let n = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(classes + 1))
            .ok_or_else(|| AadError::Format("dimensions overflow".into()))?;
        let expected = OBJECTS_HEADER_LEN + 4 * n;
        if bytes.len() != expected {
            return Err(AadError::Length {
                expected,
                found: bytes.len(),
            });
        }
        let counts = bytes[OBJECTS_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let map = Self {
            width,
            height,
            classes,
            counts,
        };
        for y in 0..height {
            for x in 0..width {
                let sum: u64 = (0..classes).map(|c| map.count(x, y, c) as u64).sum();
                if sum != map.total(x, y) as u64 {
                    return Err(AadError::Format(format!("inconsistent total at ({x}, {y})")));
                }
            }
        }
        Ok(map)
    }
}
