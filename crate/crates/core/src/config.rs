//! TOML run configuration.
//!
//! ```toml
//! [input]
//! frames = "frames"          # directory, relative to this file
//! pattern = "*.pgm"
//! detections = "dets.jsonl"  # optional
//! truth = "truth.txt"        # optional
//!
//! [output]
//! dir = "out"
//! cache = true
//! anomaly_maps = false
//!
//! [flow]
//! [detector]
//! [objects]
//! ```
//!
//! Omitted keys take their defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{AadError, Result};
use crate::object_map::ObjectParams;
use crate::optical_flow::FlowParams;
use crate::synthetic::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub frames: PathBuf,
    #[serde(default = "default_pattern")]
    pub pattern: String,
    #[serde(default)]
    pub detections: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<PathBuf>,
}

fn default_pattern() -> String {
    "*.pgm".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cache: bool,
    /// Write one anomaly PGM per frame.
    pub anomaly_maps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            cache: true,
            anomaly_maps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub objects: ObjectParams,
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| AadError::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AadError::from(e).in_file(path))?;
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = std::path::absolute(parent).map_err(|e| AadError::from(e).in_file(parent))?;
        Self::from_toml(&text, &base).map_err(|e| e.in_file(path))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.input.frames);
        if let Some(p) = &mut self.input.detections {
            join(p);
        }
        if let Some(p) = &mut self.input.truth {
            join(p);
        }
        join(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        self.detector.validate()?;
        self.objects.validate()?;
        if !self.input.frames.is_dir() {
            return Err(AadError::Config(format!(
                "frames directory {} does not exist",
                self.input.frames.display()
            )));
        }
        match &self.input.detections {
            None if self.detector.use_objects => Err(AadError::Config(
                "detector.use_objects requires input.detections".into(),
            )),
            Some(p) if !p.is_file() => Err(AadError::Config(format!(
                "detections file {} does not exist",
                p.display()
            ))),
            _ => Ok(()),
        }?;
        if let Some(p) = &self.input.truth {
            if !p.is_file() {
                return Err(AadError::Config(format!("truth file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Scene file for `synth`: a `[scene]` table, or the scene keys at top level.
pub fn load_scene(text: &str) -> Result<SceneSpec> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wrapped {
        scene: SceneSpec,
    }
    let value: toml::Table = toml::from_str(text).map_err(|e| AadError::Config(e.to_string()))?;
    let spec = if value.contains_key("scene") {
        toml::from_str::<Wrapped>(text).map(|w| w.scene)
    } else {
        toml::from_str::<SceneSpec>(text)
    }
    .map_err(|e| AadError::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn workspace() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("frames")).unwrap();
        fs::write(dir.path().join("dets.jsonl"), "").unwrap();
        dir
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let dir = workspace();
        let cfg = RunConfig::from_toml("[input]\nframes = \"frames\"\n", dir.path()).unwrap();
        assert_eq!(cfg.flow, FlowParams::default());
        assert_eq!(cfg.detector, DetectorConfig::default());
        assert_eq!(cfg.objects, ObjectParams::default());
        assert_eq!(cfg.input.frames, dir.path().join("frames"));
        assert_eq!(cfg.output.dir, dir.path().join("out"));
        assert_eq!(cfg.input.pattern, "*.pgm");
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let dir = workspace();
        let text = "[input]\nframes = \"frames\"\n[detector]\nk = 2.5\nchannel = \"any\"\n[flow]\nframe_stride = 1\n";
        let cfg = RunConfig::from_toml(text, dir.path()).unwrap();
        assert_eq!(cfg.detector.k, 2.5);
        assert_eq!(cfg.flow.frame_stride, 1);
        let bad = "[input]\nframes = \"frames\"\n[detector]\nkk = 2.5\n";
        assert!(matches!(RunConfig::from_toml(bad, dir.path()), Err(AadError::Config(_))));
    }

    #[test]
    fn objects_need_a_detection_file() {
        let dir = workspace();
        let text = "[input]\nframes = \"frames\"\n[detector]\nuse_objects = true\n";
        assert!(matches!(RunConfig::from_toml(text, dir.path()), Err(AadError::Config(_))));
        let text = "[input]\nframes = \"frames\"\ndetections = \"dets.jsonl\"\n[detector]\nuse_objects = true\n";
        assert!(RunConfig::from_toml(text, dir.path()).is_ok());
        let text = "[input]\nframes = \"frames\"\ndetections = \"missing.jsonl\"\n";
        assert!(RunConfig::from_toml(text, dir.path()).is_err());
    }

    #[test]
    fn missing_frames_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunConfig::from_toml("[input]\nframes = \"nope\"\n", dir.path()).is_err());
    }

    #[test]
    fn scene_forms() {
        let a = load_scene("[scene]\nframes = 50\nseed = 3\n").unwrap();
        let b = load_scene("frames = 50\nseed = 3\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.width, 128);
        let c = load_scene("frames = 200\n[intruder]\nentry = 150\nexit = 180\nspeed = 5.0\n").unwrap();
        assert_eq!(c.intruder.unwrap().exit, 180);
        assert!(load_scene("frames = 1\n").is_err());
    }
}
