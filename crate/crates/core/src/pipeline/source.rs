use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// `mav0/cam0/data.csv` plus `mav0/cam0/data/<file>`.
    Euroc,
    /// TUM-VI ships the same `mav0/cam0` layout as EuRoC.
    Tumvi,
    /// Every `*.png` / `*.pgm` in the directory, in lexicographic order.
    Plain,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euroc" => Ok(Self::Euroc),
            "tumvi" | "tum-vi" => Ok(Self::Tumvi),
            "plain" => Ok(Self::Plain),
            other => Err(format!("unknown dataset kind {other:?} (expected euroc, tumvi or plain)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    pub timestamp_ns: u64,
    pub path: PathBuf,
}

/// Ordered monocular frames with strictly increasing timestamps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSource {
    pub kind: DatasetKind,
    pub frames: Vec<FrameEntry>,
}

impl FrameSource {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn load_sequence(dir: impl AsRef<Path>, kind: DatasetKind) -> Result<FrameSource> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let frames = match kind {
        DatasetKind::Euroc | DatasetKind::Tumvi => load_cam0(dir)?,
        DatasetKind::Plain => load_plain(dir)?,
    };
    Ok(FrameSource { kind, frames })
}

fn load_cam0(dir: &Path) -> Result<Vec<FrameEntry>> {
    let cam = dir.join("mav0").join("cam0");
    let index = cam.join("data.csv");
    let images = cam.join("data");
    let text = std::fs::read_to_string(&index).map_err(|_| Error::MissingIndex(index.clone()))?;

    let mut frames: Vec<FrameEntry> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || Error::MalformedIndex { path: index.clone(), line: lineno + 1, content: raw.to_string() };
        let mut fields = line.split(',').map(str::trim);
        let (Some(ts), Some(name), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed());
        };
        let timestamp_ns: u64 = ts.parse().map_err(|_| malformed())?;
        if name.is_empty() {
            return Err(malformed());
        }
        if frames.last().is_some_and(|f| f.timestamp_ns >= timestamp_ns) {
            return Err(Error::NonMonotonicTimestamps {
                path: index.clone(),
                line: lineno + 1,
                timestamp: timestamp_ns,
            });
        }
        let path = images.join(name);
        if !path.is_file() {
            return Err(Error::UnreadableImage { path, reason: "file not found".into() });
        }
        frames.push(FrameEntry { timestamp_ns, path });
    }
    Ok(frames)
}

fn load_plain(dir: &Path) -> Result<Vec<FrameEntry>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    Ok(paths.into_iter().enumerate().map(|(i, path)| FrameEntry { timestamp_ns: i as u64, path }).collect())
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm"))
}
