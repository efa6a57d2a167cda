use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lumen_front::io::{load_gray, save_gray};
use lumen_front::pipeline::{
    self, bench, dump_debug, load_sequence, match_results, matches_csv_header, matches_csv_rows, parse_threshold_range,
    run_frame, run_frame_detailed, run_sequence, sweep, sweep_csv, DatasetKind, Homography, PipelineConfig, RunOptions,
    CSV_MAGIC,
};
use lumen_front::{synth, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "lumen-front", version, about = "Illumination-adaptive feature front-end")]
struct Cli {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write intermediate images and the threshold map JSON here.
    #[arg(long, global = true)]
    debug_dump: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for generated fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance one image.
    Enhance {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Detect, describe and cull keypoints in an image or a directory of images.
    Detect {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Keypoint counts against uniform FAST thresholds, raw vs enhanced.
    Sweep {
        input: PathBuf,
        /// `start:stop:step`, inclusive.
        #[arg(long, default_value = "5:60:5")]
        thresholds: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Match two images and score matches against a known mapping.
    Match {
        image_a: PathBuf,
        image_b: PathBuf,
        /// Nine row-major values mapping A's pixels into B; identity by default.
        #[arg(long)]
        homography: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time every stage over a sequence.
    Bench {
        dir: PathBuf,
        #[arg(long, default_value = "plain")]
        kind: DatasetKind,
        #[arg(long, default_value_t = 50.0)]
        budget_ms: f64,
    },
    /// Full per-frame reports for a sequence.
    Run {
        dir: PathBuf,
        #[arg(long, default_value = "plain")]
        kind: DatasetKind,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a synthetic panning sequence of PNG frames.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 752)]
        width: usize,
        #[arg(long, default_value_t = 480)]
        height: usize,
    },
}

enum Failure {
    Usage(String),
    Io(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn keypoint_rows(frame: usize, r: &pipeline::FrameResult, out: &mut String) {
    for k in &r.keypoints {
        out.push_str(&format!("{frame},{},{},{},{},{}\n", k.x, k.y, k.octave, k.response, k.angle));
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.threads > 0 {
        // Ignore the error raised when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }

    match cli.command {
        Command::Enhance { input, output } => {
            let img = load_gray(&input)?;
            let (_, art) = run_frame_detailed(&img, &cfg).map_err(|e| e.in_frame(input.display().to_string()))?;
            let out = art.enhanced.as_ref().map_or(&img, |e| &e.output);
            save_gray(out, &output)?;
            if let Some(dir) = &cli.debug_dump {
                dump_debug(dir, &art)?;
            }
        }
        Command::Detect { input, output } => {
            let paths: Vec<PathBuf> = if input.is_dir() {
                load_sequence(&input, DatasetKind::Plain)?.frames.into_iter().map(|f| f.path).collect()
            } else {
                vec![input]
            };
            let mut csv = format!("{CSV_MAGIC}\nframe_id,x,y,octave,response,angle\n");
            for (i, path) in paths.iter().enumerate() {
                let tag = |e: Error| e.in_frame(path.display().to_string());
                let img = load_gray(path).map_err(tag)?;
                let (r, art) = run_frame_detailed(&img, &cfg).map_err(tag)?;
                if let Some(dir) = &cli.debug_dump {
                    dump_debug(&dir.join(format!("{i:06}")), &art)?;
                }
                eprintln!("{}: {} detected, {} kept", path.display(), r.detected, r.kept());
                keypoint_rows(i, &r, &mut csv);
            }
            write_out(output.as_deref(), &csv)?;
        }
        Command::Sweep { input, thresholds, output } => {
            let ts = parse_threshold_range(&thresholds)?;
            let img = load_gray(&input)?;
            let rows = sweep(&img, &ts, &cfg)?;
            write_out(output.as_deref(), &sweep_csv(&rows))?;
        }
        Command::Match { image_a, image_b, homography, output } => {
            let h = match homography {
                Some(text) => Homography::parse(&text)?,
                None => Homography::identity(),
            };
            let a = load_gray(&image_a)?;
            let b = load_gray(&image_b)?;
            let ra = run_frame(&a, &cfg).map_err(|e| e.in_frame(image_a.display().to_string()))?;
            let rb = run_frame(&b, &cfg).map_err(|e| e.in_frame(image_b.display().to_string()))?;
            let rep = match_results(&ra, &rb, &h, &cfg.matching);
            eprintln!(
                "keypoints {} / {}, matches {}, mean hamming {:.2}, inliers {} ({:.3})",
                rep.keypoints_a,
                rep.keypoints_b,
                rep.matches.len(),
                rep.mean_hamming,
                rep.inliers,
                rep.inlier_ratio
            );
            let csv = matches_csv_header() + &matches_csv_rows(0, 1, &rep.matches);
            write_out(output.as_deref(), &csv)?;
        }
        Command::Bench { dir, kind, budget_ms } => {
            let source = load_sequence(&dir, kind)?;
            let report = bench(&source, &cfg, budget_ms)?;
            println!("{report}");
            if !report.within_budget() {
                return Err(Failure::Budget(format!(
                    "p95 {:.3} ms exceeds budget {} ms",
                    report.total().p95_ms,
                    budget_ms
                )));
            }
        }
        Command::Run { dir, kind, output } => {
            let source = load_sequence(&dir, kind)?;
            let opts = RunOptions { threads: cli.threads, debug_dump: cli.debug_dump.clone() };
            let s = run_sequence(&source, &cfg, &output, &opts)?;
            eprintln!("{} frames, {} detected, {} kept, {} matches", s.frames, s.detected, s.kept, s.matches);
        }
        Command::Synth { output, frames, width, height } => {
            if width < 64 || height < 64 || frames == 0 {
                return Err(Failure::Usage("synth needs frames >= 1 and at least 64x64 pixels".into()));
            }
            fs::create_dir_all(&output).map_err(|e| Failure::Io(format!("cannot create {}: {e}", output.display())))?;
            for (i, f) in synth::sequence(frames, width, height, cli.seed).iter().enumerate() {
                save_gray(f, output.join(format!("{i:06}.png")))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_BUDGET)
        }
    }
}
