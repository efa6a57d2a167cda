//! Oriented 256-bit binary descriptors and brute-force Hamming matching.

mod pattern;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::GrayImage;

use pattern::ORB_PATTERN;

/// Radius of the circular patch used for the intensity centroid.
pub const ORIENTATION_RADIUS: usize = 15;

/// Number of discrete pattern rotations (12° apart).
pub const ROTATION_BINS: usize = 30;

/// Each descriptor sample is the sum over a `(2r+1)²` box around the pattern point.
pub const SAMPLE_RADIUS: usize = 2;

/// Distance from the level border a keypoint needs for every rotation of the pattern.
pub fn descriptor_border() -> usize {
    rotated_patterns().iter().map(|p| p.extent).max().unwrap_or(0) + SAMPLE_RADIUS
}

/// Box sums of radius [`SAMPLE_RADIUS`] around every pixel of one pyramid level, for
/// smoothed sampling. Pixels whose box leaves the level hold 0.
pub struct SmoothedLevel {
    width: usize,
    height: usize,
    sums: Vec<u16>,
}

impl SmoothedLevel {
    pub fn new(img: &GrayImage) -> Self {
        let (w, h) = img.dims();
        let r = SAMPLE_RADIUS;
        let side = 2 * r + 1;
        // Horizontal sums, then vertical sums of those.
        let mut horiz = vec![0u16; w * h];
        for y in 0..h {
            let row = img.row(y);
            let out = &mut horiz[y * w..(y + 1) * w];
            let mut acc: u16 = row[..side].iter().map(|&v| v as u16).sum();
            out[r] = acc;
            for x in r + 1..w - r {
                acc = acc + row[x + r] as u16 - row[x - r - 1] as u16;
                out[x] = acc;
            }
        }
        let mut sums = vec![0u16; w * h];
        for y in r..h - r {
            let out = &mut sums[y * w..(y + 1) * w];
            for k in 0..side {
                let src = &horiz[(y + k - r) * w..(y + k - r + 1) * w];
                for (o, &v) in out.iter_mut().zip(src) {
                    *o += v;
                }
            }
        }
        Self { width: w, height: h, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum of the box of radius [`SAMPLE_RADIUS`] centered at `(x, y)`; the box must fit.
    #[inline]
    pub fn box_sum(&self, x: usize, y: usize) -> u32 {
        self.sums[y * self.width + x] as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Descriptor256 {
    pub bits: [u8; 32],
    /// Index of the keypoint this descriptor belongs to.
    pub keypoint: usize,
}

impl Descriptor256 {
    pub fn bit(&self, b: usize) -> bool {
        self.bits[b / 8] >> (b % 8) & 1 == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub hamming_distance: u32,
    /// Best over second-best distance; 0 without a second candidate.
    pub ratio: f64,
}

#[inline]
pub fn hamming(a: &Descriptor256, b: &Descriptor256) -> u32 {
    let mut d = 0;
    for (ca, cb) in a.bits.chunks_exact(8).zip(b.bits.chunks_exact(8)) {
        let wa = u64::from_le_bytes(ca.try_into().unwrap());
        let wb = u64::from_le_bytes(cb.try_into().unwrap());
        d += (wa ^ wb).count_ones();
    }
    d
}

/// Offsets (dx range per row) of the radius-15 disc.
fn disc_spans() -> &'static [i32; 2 * ORIENTATION_RADIUS + 1] {
    static SPANS: OnceLock<[i32; 2 * ORIENTATION_RADIUS + 1]> = OnceLock::new();
    SPANS.get_or_init(|| {
        let r = ORIENTATION_RADIUS as i32;
        let mut spans = [0; 2 * ORIENTATION_RADIUS + 1];
        for dy in -r..=r {
            let mut half = 0;
            while (half + 1) * (half + 1) + dy * dy <= r * r {
                half += 1;
            }
            spans[(dy + r) as usize] = half;
        }
        spans
    })
}

/// Intensity-centroid angle `atan2(m01, m10)` over the radius-15 disc centered at
/// `(x, y)`. Returns 0 when the disc does not fit or both moments vanish.
pub fn orientation_at(img: &GrayImage, x: usize, y: usize) -> f64 {
    let r = ORIENTATION_RADIUS;
    if x < r || y < r || x + r >= img.width() || y + r >= img.height() {
        return 0.0;
    }
    let spans = disc_spans();
    // |m10|, |m01| <= 15 * 255 * 709, well inside i32.
    let (mut m10, mut m01) = (0i32, 0i32);
    for (row, &half) in spans.iter().enumerate() {
        let dy = row as i32 - r as i32;
        let line = &img.row((y as i32 + dy) as usize)[x - half as usize..=x + half as usize];
        let mut row_sum = 0i32;
        for (v, dx) in line.iter().zip(-half..=half) {
            m10 += dx * *v as i32;
            row_sum += *v as i32;
        }
        m01 += dy * row_sum;
    }
    if m10 == 0 && m01 == 0 {
        return 0.0;
    }
    (m01 as f64).atan2(m10 as f64)
}

/// Orientation of `kp`; `img` must be the keypoint's own pyramid level.
pub fn orientation(img: &GrayImage, kp: &Keypoint) -> f64 {
    orientation_at(img, kp.level_x, kp.level_y)
}

struct RotatedPattern {
    pairs: [[i8; 4]; 256],
    /// Largest |offset| over all sample points.
    extent: usize,
}

fn rotated_patterns() -> &'static [RotatedPattern] {
    static TABLES: OnceLock<Vec<RotatedPattern>> = OnceLock::new();
    TABLES.get_or_init(|| {
        (0..ROTATION_BINS)
            .map(|bin| {
                let a = bin as f64 * 2.0 * PI / ROTATION_BINS as f64;
                let (s, c) = a.sin_cos();
                let rot = |x: i8, y: i8| -> (i8, i8) {
                    let (x, y) = (x as f64, y as f64);
                    ((c * x - s * y).round() as i8, (s * x + c * y).round() as i8)
                };
                let mut pairs = [[0i8; 4]; 256];
                let mut extent = 0;
                for (dst, p) in pairs.iter_mut().zip(ORB_PATTERN.iter()) {
                    let (x1, y1) = rot(p[0], p[1]);
                    let (x2, y2) = rot(p[2], p[3]);
                    *dst = [x1, y1, x2, y2];
                    extent = dst.iter().map(|v| v.unsigned_abs() as usize).fold(extent, usize::max);
                }
                RotatedPattern { pairs, extent }
            })
            .collect()
    })
}

/// Nearest 12° bin of an angle in radians.
pub fn rotation_bin(angle: f64) -> usize {
    let step = 2.0 * PI / ROTATION_BINS as f64;
    let a = if angle.is_finite() { angle } else { 0.0 };
    ((a / step).round() as i64).rem_euclid(ROTATION_BINS as i64) as usize
}

/// Steered BRIEF: bit `b` is set iff the box-smoothed intensity at the first rotated
/// point of pair `b` is lower than at the second. `level` must be built from the
/// keypoint's own pyramid level.
pub fn describe(level: &SmoothedLevel, kp: &Keypoint, index: usize) -> Result<Descriptor256> {
    let pat = &rotated_patterns()[rotation_bin(kp.angle)];
    let (x, y) = (kp.level_x, kp.level_y);
    let e = pat.extent + SAMPLE_RADIUS;
    if x < e || y < e || x + e >= level.width() || y + e >= level.height() {
        return Err(Error::PatchOutOfBounds { x, y });
    }
    let sample =
        |dx: i8, dy: i8| level.box_sum((x as isize + dx as isize) as usize, (y as isize + dy as isize) as usize);
    let mut bits = [0u8; 32];
    for (b, p) in pat.pairs.iter().enumerate() {
        if sample(p[0], p[1]) < sample(p[2], p[3]) {
            bits[b / 8] |= 1 << (b % 8);
        }
    }
    Ok(Descriptor256 { bits, keypoint: index })
}

/// Mutual nearest neighbours under Hamming distance that also pass the ratio test
/// `best / second < ratio_threshold`. Ties go to the lower index. Sorted by `index_a`.
pub fn match_descriptors(set_a: &[Descriptor256], set_b: &[Descriptor256], ratio_threshold: f64) -> Result<Vec<Match>> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::EmptySet);
    }
    // Per query in A: (best index, best distance, second distance).
    let mut best_a = vec![(0usize, u32::MAX, u32::MAX); set_a.len()];
    // Per candidate in B: (best index in A, distance).
    let mut best_b = vec![(0usize, u32::MAX); set_b.len()];
    for (i, a) in set_a.iter().enumerate() {
        let entry = &mut best_a[i];
        for (j, b) in set_b.iter().enumerate() {
            let d = hamming(a, b);
            if d < entry.1 {
                *entry = (j, d, entry.1);
            } else if d < entry.2 {
                entry.2 = d;
            }
            if d < best_b[j].1 {
                best_b[j] = (i, d);
            }
        }
    }
    let mut out = Vec::new();
    for (i, &(j, d, second)) in best_a.iter().enumerate() {
        if best_b[j].0 != i {
            continue;
        }
        let ratio = if second == u32::MAX {
            0.0
        } else if second == 0 {
            // Two exact duplicates: ambiguous.
            1.0
        } else {
            d as f64 / second as f64
        };
        if ratio < ratio_threshold {
            out.push(Match { index_a: i, index_b: j, hamming_distance: d, ratio });
        }
    }
    Ok(out)
}
