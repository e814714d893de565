use std::fs;
use std::path::{Path, PathBuf};

use aad_core::config::{load_scene, RunConfig};
use aad_core::detector::anomaly_csv;
use aad_core::evaluation::{load_frame_labels, roc_csv, sweep_auc};
use aad_core::frame_io::load_sequence;
use aad_core::object_map::{parse_detections, ObjectMap};
use aad_core::optical_flow::{pair_indices, FlowParams};
use aad_core::pipeline::{cached_flow, compute_artifacts, roc_sweep, run_detection, CacheReport, RunArtifacts, SweepMode};
use aad_core::render::{class_heat_map, observed_classes, stats_to_ppm};
use aad_core::motion_stats::StatsGrid;
use aad_core::{AadError, Result};
use log::info;
use serde::Serialize;

/// Resolved configuration saved next to run outputs, so `eval` can replay.
const RUN_MANIFEST: &str = "run.toml";

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| AadError::from(e).in_file(path))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| AadError::from(e).in_file(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| AadError::from(e).in_file(path))
}

pub fn flow(frames_dir: &Path, out: &Path, stride: usize, pattern: &str) -> Result<()> {
    let params = FlowParams {
        frame_stride: stride,
        ..Default::default()
    };
    params.validate()?;
    let frames = load_sequence(frames_dir, pattern)?;
    create_dir(out)?;
    let mut report = CacheReport::default();
    for pair in pair_indices(frames.len(), stride) {
        cached_flow(&frames, pair, &params, Some(out), &mut report)?;
    }
    println!(
        "{} pairs: {} computed, {} cached, {} rejected",
        report.hits + report.computed,
        report.computed,
        report.hits,
        report.rejected
    );
    Ok(())
}

pub struct RunOverrides {
    pub k: Option<f64>,
    pub adapt: Option<bool>,
    pub out: Option<PathBuf>,
    pub no_cache: bool,
}

fn load_artifacts(cfg: &RunConfig) -> Result<RunArtifacts> {
    let frames = load_sequence(&cfg.input.frames, &cfg.input.pattern)?;
    let cache = cfg.output.cache.then(|| cfg.output.dir.join("cache"));
    let (art, report) = compute_artifacts(&frames, &cfg.flow, cache.as_deref())?;
    info!(
        "flow: {} computed, {} cached, {} rejected",
        report.computed, report.hits, report.rejected
    );
    match &cfg.input.detections {
        Some(path) if cfg.detector.use_objects => {
            let text = fs::read_to_string(path).map_err(|e| AadError::from(e).in_file(path))?;
            let records = parse_detections(&text, &cfg.objects).map_err(|e| e.in_file(path))?;
            Ok(art.with_detections(&records))
        }
        _ => Ok(art),
    }
}

pub fn run(config: &Path, overrides: RunOverrides) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(k) = overrides.k {
        cfg.detector.k = k;
    }
    if let Some(adapt) = overrides.adapt {
        cfg.detector.adapt = adapt;
    }
    if let Some(out) = overrides.out {
        cfg.output.dir = std::path::absolute(&out).map_err(|e| AadError::from(e).in_file(&out))?;
    }
    if overrides.no_cache {
        cfg.output.cache = false;
    }
    cfg.validate()?;
    let out = cfg.output.dir.clone();
    create_dir(&out)?;

    let art = load_artifacts(&cfg)?;
    let result = run_detection(&art, &cfg.detector, &cfg.objects)?;

    write(&out.join("anomalies.csv"), anomaly_csv(result.maps()))?;
    let mut bytes = Vec::new();
    result.stats.write_snapshot(&mut bytes)?;
    write(&out.join("stats.aads"), bytes)?;
    if let Some(map) = &result.object_map {
        let mut bytes = Vec::new();
        map.write_snapshot(&mut bytes)?;
        write(&out.join("objects.aado"), bytes)?;
    }
    if cfg.output.anomaly_maps {
        let dir = out.join("maps");
        create_dir(&dir)?;
        for (frame, map) in result.maps() {
            write(&dir.join(format!("map_{frame:04}.pgm")), map.to_pgm())?;
        }
    }
    let manifest = toml::to_string(&cfg).map_err(|e| AadError::State(format!("cannot serialize config: {e}")))?;
    write(&out.join(RUN_MANIFEST), manifest)?;

    let flagged = result.flags().iter().filter(|&&f| f).count();
    println!(
        "{} frames, {} flagged (k = {}, first evaluated frame {})",
        art.frame_count,
        flagged,
        cfg.detector.k,
        result.first_warm_frame()
    );
    if let Some(truth) = &cfg.input.truth {
        let c = result.confusion(&load_frame_labels(truth)?)?;
        println!("tpr {:.4} fpr {:.4} (tp {} fp {} tn {} fn {})", c.tpr(), c.fpr(), c.tp, c.fp, c.tn, c.fn_);
    }
    Ok(())
}

pub fn eval(run_dir: &Path, truth: &Path, ks: &[f64], live: bool, out: Option<&Path>) -> Result<()> {
    let manifest = run_dir.join(RUN_MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(|e| AadError::from(e).in_file(&manifest))?;
    let cfg = RunConfig::from_toml(&text, run_dir).map_err(|e| e.in_file(&manifest))?;
    let truth = load_frame_labels(truth)?;
    let art = load_artifacts(&cfg)?;
    let mode = if live { SweepMode::Live } else { SweepMode::Frozen };
    let points = roc_sweep(&art, &truth, ks, &cfg.detector, &cfg.objects, mode)?;
    let auc = (points.len() >= 2).then(|| sweep_auc(&points)).transpose()?;
    let csv = roc_csv(&points, auc);
    let path = out.map_or_else(|| run_dir.join("roc.csv"), Path::to_path_buf);
    write(&path, &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn render(stats: &Path, out: &Path, objects: Option<&Path>, scale: usize) -> Result<()> {
    let grid = StatsGrid::decode_snapshot(&read(stats)?).map_err(|e| e.in_file(stats))?;
    let image = stats_to_ppm(&grid, scale).map_err(|e| e.in_file(stats))?;
    create_dir(out)?;
    write(&out.join("motion.ppm"), image)?;
    let mut written = 1;
    if let Some(path) = objects {
        let bytes = read(path)?;
        let map = ObjectMap::read_snapshot(&mut bytes.as_slice()).map_err(|e| e.in_file(path))?;
        for class in observed_classes(&map) {
            write(&out.join(format!("class_{class:02}.pgm")), class_heat_map(&map, class)?)?;
            written += 1;
        }
    }
    println!("{written} images written to {}", out.display());
    Ok(())
}

pub fn synth(spec_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| AadError::from(e).in_file(spec_path))?;
    let spec = load_scene(&text).map_err(|e| e.in_file(spec_path))?;
    let (frames, truth) = aad_core::synthetic::render_sequence(&spec)?;
    let frame_dir = out.join("frames");
    create_dir(&frame_dir)?;
    for f in &frames {
        write(&frame_dir.join(format!("frame_{:04}.pgm", f.index)), f.to_pgm())?;
    }
    write(&out.join("truth.txt"), truth.to_text())?;
    // ready-to-run config with every default spelled out
    let run = format!(
        "[input]\nframes = \"frames\"\ntruth = \"truth.txt\"\n\n[output]\ndir = \"out\"\n\n{}",
        toml::to_string(&DefaultSections::default()).map_err(|e| AadError::State(e.to_string()))?
    );
    write(&out.join("config.toml"), run)?;
    println!(
        "{} frames ({} anomalous) written to {}",
        frames.len(),
        truth.positives(),
        out.display()
    );
    Ok(())
}

#[derive(Default, Serialize)]
struct DefaultSections {
    flow: FlowParams,
    detector: aad_core::detector::DetectorConfig,
    objects: aad_core::object_map::ObjectParams,
}
