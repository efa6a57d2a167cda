//! Frame-level orchestration: enhancement, thresholds, detection, description and
//! culling, plus the sweep, matching and sequence drivers built on top.

mod bench;
mod config;
mod run;
mod source;

use std::time::Instant;

use serde::Serialize;

pub use bench::{bench, bench_images, percentile, BenchReport, StageStat, MIN_BENCH_FRAMES};
pub use config::{MatchingConfig, PipelineConfig, StageToggles};
pub use run::{dump_debug, run_sequence, RunOptions, RunSummary, CSV_MAGIC};
pub use source::{load_sequence, DatasetKind, FrameEntry, FrameSource};

use crate::cull::{cull, StabilityRecord};
use crate::describe::{
    describe, descriptor_border, match_descriptors, orientation, Descriptor256, Match, SmoothedLevel,
};
use crate::detect::{count_corners, detect_pyramid, DetectorConfig, Keypoint, Pyramid};
use crate::enhance::{enhance, BrightnessClass, EnhancedFrame};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::threshold::{threshold_map, GlobalStats, ThresholdMap};

/// Wall-clock milliseconds spent in each stage of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub enhance_ms: f64,
    pub threshold_ms: f64,
    pub detect_ms: f64,
    pub describe_ms: f64,
    pub cull_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    pub const NAMES: [&'static str; 6] = ["enhance", "threshold", "detect", "describe", "cull", "total"];

    pub fn values(&self) -> [f64; 6] {
        [self.enhance_ms, self.threshold_ms, self.detect_ms, self.describe_ms, self.cull_ms, self.total_ms]
    }
}

/// Everything the front-end produces for one frame. Apart from `timings`, the content is
/// a pure function of the input image and configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    /// `None` when enhancement is disabled.
    pub brightness: Option<BrightnessClass>,
    pub global: GlobalStats,
    /// Keypoints out of the detector, all of them described.
    pub detected: usize,
    /// Surviving keypoints with their orientation set.
    pub keypoints: Vec<Keypoint>,
    /// Aligned with `keypoints`; `descriptor.keypoint` is the position in that list.
    pub descriptors: Vec<Descriptor256>,
    /// One record per detected keypoint; empty when culling is disabled.
    pub cull_report: Vec<StabilityRecord>,
    pub timings: StageTimings,
}

impl FrameResult {
    pub fn kept(&self) -> usize {
        self.keypoints.len()
    }
}

/// Intermediate rasters kept for debug dumps.
pub struct FrameArtifacts {
    pub enhanced: Option<EnhancedFrame>,
    pub threshold_map: ThresholdMap,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Detector settings actually used: the border grows so every detection can be described.
pub fn effective_detector(cfg: &DetectorConfig) -> DetectorConfig {
    DetectorConfig { border: cfg.border.max(descriptor_border()), ..cfg.clone() }
}

pub fn run_frame(img: &GrayImage, cfg: &PipelineConfig) -> Result<FrameResult> {
    run_frame_detailed(img, cfg).map(|(r, _)| r)
}

pub fn run_frame_detailed(img: &GrayImage, cfg: &PipelineConfig) -> Result<(FrameResult, FrameArtifacts)> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let start = Instant::now();

    let t = Instant::now();
    let enhanced = if cfg.stages.enhance { Some(enhance(img, &cfg.enhancement)?) } else { None };
    let work = enhanced.as_ref().map_or(img, |e| &e.output);
    timings.enhance_ms = ms_since(t);

    let t = Instant::now();
    let tmap = if cfg.stages.adaptive_threshold {
        threshold_map(work, &cfg.threshold)
    } else {
        ThresholdMap::uniform(work.width(), work.height(), cfg.stages.fixed_threshold)
    };
    timings.threshold_ms = ms_since(t);

    let t = Instant::now();
    let detector = effective_detector(&cfg.detector);
    let pyramid = Pyramid::build(work, &detector);
    let mut detected = detect_pyramid(&pyramid, &tmap, &detector);
    timings.detect_ms = ms_since(t);

    let t = Instant::now();
    let smoothed: Vec<SmoothedLevel> = pyramid.levels.iter().map(|l| SmoothedLevel::new(&l.image)).collect();
    let mut descriptors = Vec::with_capacity(detected.len());
    for (i, kp) in detected.iter_mut().enumerate() {
        kp.angle = orientation(&pyramid.levels[kp.octave].image, kp);
        descriptors.push(describe(&smoothed[kp.octave], kp, i)?);
    }
    timings.describe_ms = ms_since(t);

    let t = Instant::now();
    let n_detected = detected.len();
    let (keypoints, descriptors, cull_report) = if cfg.stages.cull {
        let outcome = cull(&detected, work, &cfg.cull)?;
        let mut kept_desc = Vec::with_capacity(outcome.kept.len());
        for (d, r) in descriptors.into_iter().zip(&outcome.report) {
            if !r.culled {
                kept_desc.push(Descriptor256 { keypoint: kept_desc.len(), ..d });
            }
        }
        (outcome.kept, kept_desc, outcome.report)
    } else {
        (detected, descriptors, Vec::new())
    };
    timings.cull_ms = ms_since(t);
    timings.total_ms = ms_since(start);

    let result = FrameResult {
        brightness: enhanced.as_ref().map(|e| e.brightness),
        global: tmap.global,
        detected: n_detected,
        keypoints,
        descriptors,
        cull_report,
        timings,
    };
    Ok((result, FrameArtifacts { enhanced, threshold_map: tmap }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub count_raw: usize,
    pub count_enhanced: usize,
}

/// Parses `start:stop:step` into the inclusive list `start, start+step, ... <= stop`.
pub fn parse_threshold_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("threshold range {spec:?} must be start:stop:step with step > 0"));
    let parts: Vec<f64> =
        spec.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && start <= stop) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Single-scale segment-test counts on the raw and the enhanced image for each threshold.
pub fn sweep(img: &GrayImage, thresholds: &[f64], cfg: &PipelineConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t >= 1.0)) {
        return Err(Error::InvalidConfig("sweep thresholds must be non-empty and >= 1".into()));
    }
    let enhanced = enhance(img, &cfg.enhancement)?.output;
    Ok(thresholds
        .iter()
        .map(|&t| SweepRow {
            threshold: t,
            count_raw: count_corners(img, t),
            count_enhanced: count_corners(&enhanced, t),
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{CSV_MAGIC}\nthreshold,count_raw,count_enhanced\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.threshold, r.count_raw, r.count_enhanced));
    }
    s
}

/// Planar homography in pixel coordinates, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(pub [[f64; 3]; 3]);

impl Homography {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])
    }

    /// Nine comma- or whitespace-separated numbers, row-major.
    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("homography: {e}")))?;
        if vals.len() != 9 {
            return Err(Error::InvalidConfig(format!("homography needs 9 values, got {}", vals.len())));
        }
        let mut m = [[0.0; 3]; 3];
        for (i, v) in vals.into_iter().enumerate() {
            m[i / 3][i % 3] = v;
        }
        Ok(Self(m))
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        ((m[0][0] * x + m[0][1] * y + m[0][2]) / w, (m[1][0] * x + m[1][1] * y + m[1][2]) / w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    pub keypoints_a: usize,
    pub keypoints_b: usize,
    pub matches: Vec<Match>,
    /// Whether each match lands within the inlier tolerance of its projection.
    pub inlier_flags: Vec<bool>,
    pub mean_hamming: f64,
    pub inliers: usize,
    /// `inliers / matches`, 0 without matches.
    pub inlier_ratio: f64,
}

/// Match two processed frames and score matches against a known ground-truth mapping.
pub fn match_results(a: &FrameResult, b: &FrameResult, h: &Homography, cfg: &MatchingConfig) -> MatchReport {
    let matches = match_descriptors(&a.descriptors, &b.descriptors, cfg.ratio_threshold).unwrap_or_default();
    let inlier_flags: Vec<bool> = matches
        .iter()
        .map(|m| {
            let ka = &a.keypoints[a.descriptors[m.index_a].keypoint];
            let kb = &b.keypoints[b.descriptors[m.index_b].keypoint];
            let (px, py) = h.apply(ka.x, ka.y);
            (px - kb.x).hypot(py - kb.y) <= cfg.inlier_tolerance
        })
        .collect();
    let inliers = inlier_flags.iter().filter(|&&f| f).count();
    let n = matches.len();
    let mean_hamming =
        if n == 0 { 0.0 } else { matches.iter().map(|m| m.hamming_distance as f64).sum::<f64>() / n as f64 };
    MatchReport {
        keypoints_a: a.kept(),
        keypoints_b: b.kept(),
        inlier_ratio: if n == 0 { 0.0 } else { inliers as f64 / n as f64 },
        matches,
        inlier_flags,
        mean_hamming,
        inliers,
    }
}

pub fn match_frames(a: &GrayImage, b: &GrayImage, h: &Homography, cfg: &PipelineConfig) -> Result<MatchReport> {
    let ra = run_frame(a, cfg)?;
    let rb = run_frame(b, cfg)?;
    Ok(match_results(&ra, &rb, h, &cfg.matching))
}

pub fn matches_csv_header() -> String {
    format!("{CSV_MAGIC}\nframe_a,frame_b,idx_a,idx_b,hamming,ratio\n")
}

pub fn matches_csv_rows(frame_a: usize, frame_b: usize, matches: &[Match]) -> String {
    let mut s = String::new();
    for m in matches {
        s.push_str(&format!("{frame_a},{frame_b},{},{},{},{}\n", m.index_a, m.index_b, m.hamming_distance, m.ratio));
    }
    s
}
