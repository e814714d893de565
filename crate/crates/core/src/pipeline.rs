//! Streaming detection over a frame sequence.
//!
//! Per frame pair: flow, pooling, detection against a snapshot of the
//! statistics, then the statistics update (adapting the cells that were just
//! flagged). Flow is the expensive part and does not depend on the detector
//! settings, so a run keeps the pooled block grids as [`RunArtifacts`] and
//! the k-sweep replays detection from them.

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, warn};

use crate::detector::{cell_flags_from_objects, detect_frame, AnomalyMap, DetectorConfig};
use crate::error::{AadError, Result};
use crate::evaluation::{confusion, GroundTruth, RocPoint};
use crate::frame_io::{decode_flow_cache, write_flow_cache, FlowCacheHeader, FrameBuffer};
use crate::motion_stats::StatsGrid;
use crate::object_map::{DetectionRecord, ObjectMap, ObjectParams};
use crate::optical_flow::{farneback_flow, pair_indices, FlowField, FlowParams};
use crate::pooling::{pool_flow, BlockFlowGrid, CELL_SIZE};

/// Pooled motion for the pair ending at `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairObservation {
    pub source: usize,
    pub frame: usize,
    pub blocks: BlockFlowGrid,
}

/// Everything detection needs from a sequence, independent of the detector
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub pairs: Vec<PairObservation>,
    /// Detections per frame index (empty when no detector output is used).
    pub detections: Vec<Vec<DetectionRecord>>,
}

impl RunArtifacts {
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.width / CELL_SIZE, self.height / CELL_SIZE)
    }

    /// Groups `records` by frame; records beyond the sequence are dropped.
    pub fn with_detections(mut self, records: &[DetectionRecord]) -> Self {
        self.detections = vec![Vec::new(); self.frame_count];
        for r in records {
            if let Some(slot) = self.detections.get_mut(r.frame_index) {
                slot.push(r.clone());
            } else {
                warn!("detection for frame {} beyond sequence end", r.frame_index);
            }
        }
        self
    }

    fn records(&self, frame: usize) -> &[DetectionRecord] {
        self.detections.get(frame).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Counts of cache activity while computing flows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheReport {
    pub hits: usize,
    pub computed: usize,
    /// Cache files that existed but could not be used.
    pub rejected: usize,
}

pub fn flow_cache_name(source: usize, target: usize) -> String {
    format!("flow_{source}_{target}.aadf")
}

fn load_cached(path: &Path, dims: (usize, usize), pair: (usize, usize)) -> Option<FlowField> {
    let bytes = fs::read(path).ok()?;
    match decode_flow_cache(&bytes) {
        Ok((header, flow))
            if flow.dims() == dims && header.frame_pair == (pair.0 as u32, pair.1 as u32) =>
        {
            Some(flow)
        }
        Ok(_) => {
            warn!("{}: cached flow does not match this sequence, recomputing", path.display());
            None
        }
        Err(e) => {
            warn!("{}: unreadable flow cache ({e}), recomputing", path.display());
            None
        }
    }
}

/// Flow for one pair, going through `cache_dir` when given.
pub fn cached_flow(
    frames: &[FrameBuffer],
    pair: (usize, usize),
    params: &FlowParams,
    cache_dir: Option<&Path>,
    report: &mut CacheReport,
) -> Result<FlowField> {
    let (prev, next) = (&frames[pair.0], &frames[pair.1]);
    let path: Option<PathBuf> = cache_dir.map(|d| d.join(flow_cache_name(pair.0, pair.1)));
    if let Some(p) = &path {
        if p.exists() {
            if let Some(flow) = load_cached(p, prev.dims(), pair) {
                report.hits += 1;
                return Ok(flow);
            }
            report.rejected += 1;
        }
    }
    let flow = farneback_flow(prev, next, params)?;
    report.computed += 1;
    if let Some(p) = &path {
        let header = FlowCacheHeader::for_flow(&flow, pair.0, pair.1);
        let mut bytes = Vec::new();
        write_flow_cache(&flow, &header, &mut bytes)?;
        fs::write(p, bytes).map_err(|e| AadError::from(e).in_file(p))?;
    }
    Ok(flow)
}

/// Computes (or loads) the flow of every `(t - stride, t)` pair and pools it.
pub fn compute_artifacts(
    frames: &[FrameBuffer],
    params: &FlowParams,
    cache_dir: Option<&Path>,
) -> Result<(RunArtifacts, CacheReport)> {
    params.validate()?;
    let first = frames
        .first()
        .ok_or_else(|| AadError::InsufficientData("empty frame sequence".into()))?;
    let (width, height) = first.dims();
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|e| AadError::from(e).in_file(dir))?;
    }
    let mut report = CacheReport::default();
    let mut pairs = Vec::new();
    for (source, frame) in pair_indices(frames.len(), params.frame_stride) {
        let flow = cached_flow(frames, (source, frame), params, cache_dir, &mut report)?;
        debug!("pair ({source}, {frame}): max |flow| = {:.3}", flow.max_magnitude());
        pairs.push(PairObservation {
            source,
            frame,
            blocks: pool_flow(&flow)?,
        });
    }
    let artifacts = RunArtifacts {
        width,
        height,
        frame_count: frames.len(),
        pairs,
        detections: vec![Vec::new(); frames.len()],
    };
    Ok((artifacts, report))
}

/// Single-writer detection state: motion statistics plus, optionally, the
/// object occurrence map.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: DetectorConfig,
    objects: ObjectParams,
    stats: StatsGrid,
    object_map: Option<ObjectMap>,
}

impl Engine {
    pub fn new(width: usize, height: usize, cfg: DetectorConfig, objects: ObjectParams) -> Result<Self> {
        cfg.validate()?;
        objects.validate()?;
        let object_map = cfg
            .use_objects
            .then(|| ObjectMap::new(width, height, objects.classes));
        Ok(Self {
            stats: StatsGrid::new(width / CELL_SIZE, height / CELL_SIZE),
            cfg,
            objects,
            object_map,
        })
    }

    pub fn stats(&self) -> &StatsGrid {
        &self.stats
    }

    pub fn object_map(&self) -> Option<&ObjectMap> {
        self.object_map.as_ref()
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Adds detections of a frame that has no flow pair (the first
    /// `stride` frames) to the object history.
    pub fn observe_objects(&mut self, records: &[DetectionRecord]) {
        if let Some(map) = &mut self.object_map {
            map.accumulate(records);
        }
    }

    fn object_flags(&self, records: &[DetectionRecord]) -> Option<Vec<bool>> {
        self.object_map
            .as_ref()
            .map(|map| cell_flags_from_objects(records, map, self.stats.dims(), &self.objects))
    }

    /// Detects on the current snapshot, then folds the frame into the
    /// statistics (adapting flagged cells when adaptation is on).
    pub fn step(&mut self, blocks: &BlockFlowGrid, records: &[DetectionRecord]) -> Result<AnomalyMap> {
        let flags = self.object_flags(records);
        let map = detect_frame(&self.stats, blocks, flags.as_deref(), &self.cfg)?;
        let feedback = self.cfg.adapt.then_some(&map);
        self.stats.update_grid(blocks, feedback, self.cfg.motion_epsilon)?;
        self.observe_objects(records);
        Ok(map)
    }
}

/// Per-frame outcome of a run; frames without a pair have no map.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub maps: Vec<Option<AnomalyMap>>,
    pub stats: StatsGrid,
    pub object_map: Option<ObjectMap>,
}

impl RunResult {
    /// Frame flags, `false` where no map exists.
    pub fn flags(&self) -> Vec<bool> {
        self.maps
            .iter()
            .map(|m| m.as_ref().is_some_and(|m| m.frame_flag))
            .collect()
    }

    /// First frame at which any cell had completed warmup.
    pub fn first_warm_frame(&self) -> usize {
        self.maps
            .iter()
            .position(|m| m.as_ref().is_some_and(|m| m.warm))
            .unwrap_or(self.maps.len())
    }

    pub fn confusion(&self, truth: &GroundTruth) -> Result<crate::evaluation::Confusion> {
        confusion(&self.flags(), truth, self.first_warm_frame())
    }

    pub fn maps(&self) -> impl Iterator<Item = (usize, &AnomalyMap)> + '_ {
        self.maps
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
    }
}

/// Runs the full streaming pipeline over precomputed artifacts.
pub fn run_detection(artifacts: &RunArtifacts, cfg: &DetectorConfig, objects: &ObjectParams) -> Result<RunResult> {
    let mut engine = Engine::new(artifacts.width, artifacts.height, cfg.clone(), objects.clone())?;
    let mut maps = vec![None; artifacts.frame_count];
    let first_pair_frame = artifacts.pairs.first().map_or(artifacts.frame_count, |p| p.frame);
    for t in 0..first_pair_frame.min(artifacts.frame_count) {
        engine.observe_objects(artifacts.records(t));
    }
    for pair in &artifacts.pairs {
        maps[pair.frame] = Some(engine.step(&pair.blocks, artifacts.records(pair.frame))?);
    }
    Ok(RunResult {
        maps,
        stats: engine.stats,
        object_map: engine.object_map,
    })
}

/// Sweep mode for [`roc_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// One statistics trajectory (adaptation off), re-detected per k.
    #[default]
    Frozen,
    /// The full adaptive pipeline re-run for each k.
    Live,
}

/// One ROC point per k, sorted by k.
pub fn roc_sweep(
    artifacts: &RunArtifacts,
    truth: &GroundTruth,
    k_values: &[f64],
    cfg: &DetectorConfig,
    objects: &ObjectParams,
    mode: SweepMode,
) -> Result<Vec<RocPoint>> {
    if k_values.is_empty() || k_values.iter().any(|k| !(*k > 0.0)) {
        return Err(AadError::Config("k values must be a non-empty list of positive numbers".into()));
    }
    if truth.len() != artifacts.frame_count {
        return Err(AadError::Shape(format!(
            "ground truth has {} frames, sequence has {}",
            truth.len(),
            artifacts.frame_count
        )));
    }
    let mut ks = k_values.to_vec();
    ks.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(ks.len());
    match mode {
        SweepMode::Live => {
            for &k in &ks {
                let run = run_detection(artifacts, &DetectorConfig { k, ..cfg.clone() }, objects)?;
                points.push(RocPoint::new(k, run.confusion(truth)?));
            }
        }
        SweepMode::Frozen => {
            let flags = frozen_flags(artifacts, cfg, objects, &ks)?;
            for (i, &k) in ks.iter().enumerate() {
                let (pred, first_warm) = &flags[i];
                points.push(RocPoint::new(k, confusion(pred, truth, *first_warm)?));
            }
        }
    }
    Ok(points)
}

/// Frame flags for each k from a single non-adaptive statistics trajectory.
pub fn frozen_flags(
    artifacts: &RunArtifacts,
    cfg: &DetectorConfig,
    objects: &ObjectParams,
    ks: &[f64],
) -> Result<Vec<(Vec<bool>, usize)>> {
    let frozen = DetectorConfig {
        adapt: false,
        ..cfg.clone()
    };
    let mut engine = Engine::new(artifacts.width, artifacts.height, frozen.clone(), objects.clone())?;
    let mut preds = vec![vec![false; artifacts.frame_count]; ks.len()];
    let mut first_warm = artifacts.frame_count;
    let first_pair_frame = artifacts.pairs.first().map_or(artifacts.frame_count, |p| p.frame);
    for t in 0..first_pair_frame.min(artifacts.frame_count) {
        engine.observe_objects(artifacts.records(t));
    }
    for pair in &artifacts.pairs {
        let records = artifacts.records(pair.frame);
        let obj = engine.object_flags(records);
        for (i, &k) in ks.iter().enumerate() {
            let c = DetectorConfig { k, ..frozen.clone() };
            let map = detect_frame(&engine.stats, &pair.blocks, obj.as_deref(), &c)?;
            preds[i][pair.frame] = map.frame_flag;
            if map.warm {
                first_warm = first_warm.min(pair.frame);
            }
        }
        engine.stats.update_grid(&pair.blocks, None, frozen.motion_epsilon)?;
        engine.observe_objects(records);
    }
    Ok(preds.into_iter().map(|p| (p, first_warm)).collect())
}
