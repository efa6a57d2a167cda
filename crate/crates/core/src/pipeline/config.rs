use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cull::CullConfig;
use crate::detect::DetectorConfig;
use crate::enhance::EnhancementConfig;
use crate::error::{Error, Result};
use crate::threshold::ThresholdConfig;

/// Which front-end stages run. A disabled stage is replaced by its baseline: the raw
/// image, a uniform `fixed_threshold`, or keeping every keypoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub enhance: bool,
    pub adaptive_threshold: bool,
    pub cull: bool,
    pub fixed_threshold: f64,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self { enhance: true, adaptive_threshold: true, cull: true, fixed_threshold: 20.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub ratio_threshold: f64,
    /// Reprojection distance in pixels under which a match counts as an inlier.
    pub inlier_tolerance: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self { ratio_threshold: 0.8, inlier_tolerance: 3.0 }
    }
}

/// Every tunable of the front-end. Loaded from TOML with one table per stage:
///
/// ```toml
/// [enhancement]
/// sigma = 1.0
/// [threshold]
/// alpha = 2.0
/// [detector]
/// n_levels = 4
/// [cull]
/// s_min = 0.3
/// [stages]
/// cull = false
/// [matching]
/// ratio_threshold = 0.8
/// ```
///
/// Missing keys take their defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub enhancement: EnhancementConfig,
    pub threshold: ThresholdConfig,
    pub detector: DetectorConfig,
    pub cull: CullConfig,
    pub stages: StageToggles,
    pub matching: MatchingConfig,
}

impl PipelineConfig {
    /// Plain FAST at the fixed threshold with no enhancement or culling.
    pub fn baseline() -> Self {
        Self {
            stages: StageToggles { enhance: false, adaptive_threshold: false, cull: false, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.enhancement.validate()?;
        self.threshold.validate()?;
        self.detector.validate()?;
        self.cull.validate()?;
        if !(self.stages.fixed_threshold >= 0.0) {
            return Err(Error::InvalidConfig("stages: fixed_threshold must be >= 0".into()));
        }
        if !(self.matching.ratio_threshold >= 0.0 && self.matching.inlier_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("matching: values must be >= 0".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::UnreadableImage { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::from_toml_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
