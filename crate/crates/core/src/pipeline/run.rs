use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{match_results, matches_csv_header, matches_csv_rows, run_frame_detailed, FrameArtifacts, FrameResult};
use super::{FrameSource, Homography, PipelineConfig};
use crate::error::{Error, Result};
use crate::image::quantize;
use crate::io::{load_gray, save_gray};

/// First line of every CSV the tool writes.
pub const CSV_MAGIC: &str = "# lumen-front v1";

/// Frames processed per parallel batch; bounds memory on long sequences.
const BATCH: usize = 32;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub debug_dump: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub detected: usize,
    pub kept: usize,
    pub matches: usize,
}

struct Outputs {
    frames: BufWriter<File>,
    keypoints: BufWriter<File>,
    cull: BufWriter<File>,
    timings: BufWriter<File>,
    matches: BufWriter<File>,
}

fn create(dir: &Path, name: &str, header: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Write { path: path.clone(), reason: e.to_string() })?;
    let mut w = BufWriter::new(file);
    write!(w, "{CSV_MAGIC}\n{header}\n").map_err(|e| Error::Write { path, reason: e.to_string() })?;
    Ok(w)
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        Ok(Self {
            frames: create(
                dir,
                "frames.csv",
                "frame_id,timestamp_ns,brightness,mean,entropy,mean_gradient,global_threshold,detected,kept",
            )?,
            keypoints: create(dir, "keypoints.csv", "frame_id,x,y,octave,response,angle")?,
            cull: create(dir, "cull.csv", "frame_id,kp_index,x,y,leaf_area,density,h_c,c_light,score,culled")?,
            timings: create(
                dir,
                "timings.csv",
                "frame_id,enhance_ms,threshold_ms,detect_ms,describe_ms,cull_ms,total_ms",
            )?,
            matches: {
                let path = dir.join("matches.csv");
                let file = File::create(&path).map_err(|e| Error::Write { path, reason: e.to_string() })?;
                let mut w = BufWriter::new(file);
                w.write_all(matches_csv_header().as_bytes())?;
                w
            },
        })
    }

    fn write_frame(&mut self, id: usize, timestamp_ns: u64, r: &FrameResult) -> std::io::Result<()> {
        let (level, mean) = match &r.brightness {
            Some(b) => (b.level.to_string(), b.mean.to_string()),
            None => ("none".to_string(), String::new()),
        };
        let g = &r.global;
        writeln!(
            self.frames,
            "{id},{timestamp_ns},{level},{mean},{},{},{},{},{}",
            g.entropy,
            g.mean_gradient,
            g.global_threshold,
            r.detected,
            r.kept()
        )?;
        for k in &r.keypoints {
            writeln!(self.keypoints, "{id},{},{},{},{},{}", k.x, k.y, k.octave, k.response, k.angle)?;
        }
        for c in &r.cull_report {
            writeln!(
                self.cull,
                "{id},{},{},{},{},{},{},{},{},{}",
                c.index, c.leaf.x, c.leaf.y, c.leaf_area, c.density, c.h_c, c.c_light, c.score, c.culled as u8
            )?;
        }
        let t = &r.timings;
        writeln!(
            self.timings,
            "{id},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            t.enhance_ms, t.threshold_ms, t.detect_ms, t.describe_ms, t.cull_ms, t.total_ms
        )
    }

    fn flush(&mut self) -> std::io::Result<()> {
        for w in [&mut self.frames, &mut self.keypoints, &mut self.cull, &mut self.timings, &mut self.matches] {
            w.flush()?;
        }
        Ok(())
    }
}

/// Write the intermediate rasters of one frame into `dir`.
pub fn dump_debug(dir: &Path, art: &FrameArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Write { path: dir.to_path_buf(), reason: e.to_string() })?;
    if let Some(e) = &art.enhanced {
        save_gray(&e.blurred, dir.join("blurred.png"))?;
        save_gray(&e.gamma_corrected, dir.join("gamma.png"))?;
        save_gray(&e.output, dir.join("enhanced.png"))?;
        // Mask is signed; store it offset by 128.
        let mask = e.mask.data().iter().map(|&v| quantize(v + 128.0)).collect();
        let mask = crate::image::GrayImage::from_raw(e.mask.width(), e.mask.height(), mask)?;
        save_gray(&mask, dir.join("mask.png"))?;
    }
    let path = dir.join("threshold_map.json");
    std::fs::write(&path, art.threshold_map.to_json()).map_err(|e| Error::Write { path, reason: e.to_string() })
}

/// Process a whole sequence on `opts.threads` workers. Frames are written in sequence
/// order, so everything except `timings.csv` is independent of the thread count.
/// Consecutive frames are matched under the identity mapping.
pub fn run_sequence(
    source: &FrameSource,
    cfg: &PipelineConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Write { path: out_dir.to_path_buf(), reason: e.to_string() })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut out = Outputs::open(out_dir)?;
    let io_err = |e: std::io::Error| Error::Write { path: out_dir.to_path_buf(), reason: e.to_string() };

    let mut summary = RunSummary::default();
    let mut previous: Option<FrameResult> = None;
    for (batch_no, batch) in source.frames.chunks(BATCH).enumerate() {
        let base = batch_no * BATCH;
        let results: Vec<Result<FrameResult>> = pool.install(|| {
            batch
                .par_iter()
                .enumerate()
                .map(|(i, entry)| {
                    let id = base + i;
                    let frame = || -> Result<FrameResult> {
                        let img = load_gray(&entry.path)?;
                        let (r, art) = run_frame_detailed(&img, cfg)?;
                        if let Some(dir) = &opts.debug_dump {
                            dump_debug(&dir.join(format!("{id:06}")), &art)?;
                        }
                        Ok(r)
                    };
                    frame().map_err(|e| e.in_frame(entry.path.display().to_string()))
                })
                .collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            let r = r?;
            let id = base + i;
            out.write_frame(id, batch[i].timestamp_ns, &r).map_err(io_err)?;
            if let Some(prev) = &previous {
                let rep = match_results(prev, &r, &Homography::identity(), &cfg.matching);
                out.matches.write_all(matches_csv_rows(id - 1, id, &rep.matches).as_bytes()).map_err(io_err)?;
                summary.matches += rep.matches.len();
            }
            summary.frames += 1;
            summary.detected += r.detected;
            summary.kept += r.kept();
            previous = Some(r);
        }
    }
    out.flush().map_err(io_err)?;
    Ok(summary)
}
