use std::fmt;

use serde::Serialize;

use super::{run_frame, FrameSource, PipelineConfig, StageTimings};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::io::load_gray;

pub const MIN_BENCH_FRAMES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageStat {
    pub stage: &'static str,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub budget_ms: f64,
    /// One entry per stage, `total` last.
    pub stages: Vec<StageStat>,
}

impl BenchReport {
    pub fn total(&self) -> &StageStat {
        self.stages.last().expect("report has a total row")
    }

    pub fn within_budget(&self) -> bool {
        self.total().p95_ms <= self.budget_ms
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frames: {} ({}x{})", self.frames, self.width, self.height)?;
        writeln!(f, "{:<10} {:>10} {:>10}", "stage", "mean_ms", "p95_ms")?;
        for s in &self.stages {
            writeln!(f, "{:<10} {:>10.3} {:>10.3}", s.stage, s.mean_ms, s.p95_ms)?;
        }
        let verdict = if self.within_budget() { "within" } else { "OVER" };
        write!(f, "p95 total {:.3} ms is {verdict} the {} ms budget", self.total().p95_ms, self.budget_ms)
    }
}

/// Nearest-rank percentile (`q` in 0..=100) of unsorted samples; 0 for an empty slice.
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

/// Time the full pipeline on in-memory frames, sequentially.
pub fn bench_images(frames: &[GrayImage], cfg: &PipelineConfig, budget_ms: f64) -> Result<BenchReport> {
    if frames.len() < MIN_BENCH_FRAMES {
        return Err(Error::TooFewFrames { needed: MIN_BENCH_FRAMES, got: frames.len() });
    }
    // One untimed pass so lazily built tables do not land in the first sample.
    run_frame(&frames[0], cfg)?;
    let timings: Vec<StageTimings> =
        frames.iter().map(|f| run_frame(f, cfg).map(|r| r.timings)).collect::<Result<_>>()?;
    let stages = StageTimings::NAMES
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let samples: Vec<f64> = timings.iter().map(|t| t.values()[i]).collect();
            StageStat {
                stage,
                mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
                p95_ms: percentile(&samples, 95.0),
            }
        })
        .collect();
    Ok(BenchReport { frames: frames.len(), width: frames[0].width(), height: frames[0].height(), budget_ms, stages })
}

/// Load every frame of a sequence up front, then benchmark.
pub fn bench(source: &FrameSource, cfg: &PipelineConfig, budget_ms: f64) -> Result<BenchReport> {
    if source.len() < MIN_BENCH_FRAMES {
        return Err(Error::TooFewFrames { needed: MIN_BENCH_FRAMES, got: source.len() });
    }
    let frames: Vec<GrayImage> = source.frames.iter().map(|f| load_gray(&f.path)).collect::<Result<_>>()?;
    bench_images(&frames, cfg, budget_ms)
}
