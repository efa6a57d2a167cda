//! FAST-9 corners over a bilinear image pyramid, with per-cell thresholds taken from a
//! [`ThresholdMap`] computed on the full-resolution frame.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage, MIN_SIDE};
use crate::threshold::ThresholdMap;

/// Contiguous arc length of the segment test.
pub const ARC_LENGTH: usize = 9;

/// Distance from the border that the radius-3 circle needs.
pub const FAST_MARGIN: usize = 3;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
pub const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub n_levels: usize,
    pub scale_factor: f64,
    /// Only 9 is supported.
    pub arc_length: usize,
    pub nms_radius: usize,
    pub max_features: usize,
    /// Minimum distance from the level border for a keypoint; at least 3.
    pub border: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_levels: 4,
            scale_factor: 1.2,
            arc_length: ARC_LENGTH,
            nms_radius: 3,
            max_features: 2000,
            border: FAST_MARGIN,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("detector: {msg}")));
        if self.n_levels == 0 {
            return bad("n_levels must be >= 1");
        }
        if !(self.scale_factor > 1.0 && self.scale_factor.is_finite()) {
            return bad("scale_factor must be > 1");
        }
        if self.arc_length != ARC_LENGTH {
            return bad("arc_length is fixed at 9");
        }
        if self.max_features == 0 {
            return bad("max_features must be > 0");
        }
        if self.border < FAST_MARGIN {
            return bad("border must be >= 3");
        }
        Ok(())
    }
}

/// A detected corner. `x`/`y` are in level-0 pixels; `level_x`/`level_y` locate it in
/// its own pyramid level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub octave: usize,
    pub response: u8,
    /// Radians; NaN until orientation is assigned.
    pub angle: f64,
    pub level_x: usize,
    pub level_y: usize,
}

/// Segment-test hit at integer coordinates of one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub x: usize,
    pub y: usize,
    pub score: u8,
}

pub struct PyramidLevel {
    pub image: GrayImage,
    /// Level-0 pixels per level pixel, per axis.
    pub scale_x: f64,
    pub scale_y: f64,
}

impl PyramidLevel {
    /// Pixel-center aligned projection into level 0.
    #[inline]
    pub fn to_level0(&self, x: f64, y: f64) -> (f64, f64) {
        ((x + 0.5) * self.scale_x - 0.5, (y + 0.5) * self.scale_y - 0.5)
    }
}

pub struct Pyramid {
    pub levels: Vec<PyramidLevel>,
}

impl Pyramid {
    /// Successive bilinear `1/scale_factor` reductions. Levels that would fall below
    /// 8 pixels on a side are not built.
    pub fn build(base: &GrayImage, cfg: &DetectorConfig) -> Pyramid {
        let mut levels = vec![PyramidLevel { image: base.clone(), scale_x: 1.0, scale_y: 1.0 }];
        while levels.len() < cfg.n_levels {
            let prev = levels.last().unwrap();
            let (pw, ph) = prev.image.dims();
            let nw = (pw as f64 / cfg.scale_factor).round() as usize;
            let nh = (ph as f64 / cfg.scale_factor).round() as usize;
            if nw < MIN_SIDE || nh < MIN_SIDE {
                break;
            }
            let image = resize_bilinear(&prev.image, nw, nh);
            let scale_x = prev.scale_x * pw as f64 / nw as f64;
            let scale_y = prev.scale_y * ph as f64 / nh as f64;
            levels.push(PyramidLevel { image, scale_x, scale_y });
        }
        Pyramid { levels }
    }
}

/// Pixel-center aligned bilinear resampling with edge clamping.
pub fn resize_bilinear(src: &GrayImage, nw: usize, nh: usize) -> GrayImage {
    let (pw, ph) = src.dims();
    let taps = |n: usize, p: usize| -> Vec<(usize, usize, f64)> {
        let r = p as f64 / n as f64;
        (0..n)
            .map(|i| {
                let s = ((i as f64 + 0.5) * r - 0.5).clamp(0.0, (p - 1) as f64);
                let i0 = s.floor() as usize;
                (i0, (i0 + 1).min(p - 1), s - i0 as f64)
            })
            .collect()
    };
    let xs = taps(nw, pw);
    let ys = taps(nh, ph);
    let mut data = Vec::with_capacity(nw * nh);
    for &(y0, y1, fy) in &ys {
        let r0 = src.row(y0);
        let r1 = src.row(y1);
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] as f64 + fx * (r0[x1] as f64 - r0[x0] as f64);
            let bot = r1[x0] as f64 + fx * (r1[x1] as f64 - r1[x0] as f64);
            data.push(quantize(top + fy * (bot - top)));
        }
    }
    GrayImage::from_raw(nw, nh, data).expect("pyramid level keeps the minimum size")
}

fn check_margin(img: &GrayImage, x: usize, y: usize) -> Result<()> {
    let (w, h) = img.dims();
    if x < FAST_MARGIN || y < FAST_MARGIN || x + FAST_MARGIN >= w || y + FAST_MARGIN >= h {
        return Err(Error::OutOfBounds { x, y, margin: FAST_MARGIN, width: w, height: h });
    }
    Ok(())
}

/// Smallest integer difference that counts as "brighter than center + t". For integer
/// `d`, `d > t` iff `d >= floor(t) + 1`, and `d < -t` iff `d <= -(floor(t) + 1)`.
#[inline]
fn integer_bound(t: f64) -> i16 {
    t.floor().clamp(-257.0, 256.0) as i16 + 1
}

#[inline]
fn has_arc(mask: u32) -> bool {
    let mut m = mask | (mask << 16);
    // After k steps a bit survives iff it starts a run of k+1 set bits.
    for _ in 1..ARC_LENGTH {
        m &= m >> 1;
    }
    m != 0
}

#[inline]
fn circle_diffs(data: &[u8], stride: usize, x: usize, y: usize) -> [i16; 16] {
    let c = data[y * stride + x] as i16;
    let mut d = [0i16; 16];
    for (k, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let idx = (y as isize + dy as isize) as usize * stride + (x as isize + dx as isize) as usize;
        d[k] = data[idx] as i16 - c;
    }
    d
}

/// Full 16-pixel test with the integer bound `b`: brighter means `d >= b`, darker `d <= -b`.
#[inline]
fn test_diffs(d: &[i16; 16], b: i16) -> bool {
    let mut bright = 0u32;
    let mut dark = 0u32;
    for (k, &v) in d.iter().enumerate() {
        bright |= ((v >= b) as u32) << k;
        dark |= ((v <= -b) as u32) << k;
    }
    has_arc(bright) || has_arc(dark)
}

/// Whether at least 9 contiguous circle pixels are all brighter than `I(x,y) + t` or
/// all darker than `I(x,y) - t`.
pub fn fast_segment_test(img: &GrayImage, x: usize, y: usize, t: f64) -> Result<bool> {
    check_margin(img, x, y)?;
    Ok(test_diffs(&circle_diffs(img.data(), img.width(), x, y), integer_bound(t)))
}

/// Largest integer `t` at which the segment test still passes; 0 if it never does.
pub fn corner_score(img: &GrayImage, x: usize, y: usize) -> Result<u8> {
    check_margin(img, x, y)?;
    Ok(score_diffs(&circle_diffs(img.data(), img.width(), x, y)))
}

/// The test passes at integer `t` iff some 9-arc has every difference `>= t + 1` (or
/// every negated difference), so the score is the best arc minimum less one.
fn score_diffs(d: &[i16; 16]) -> u8 {
    #[inline]
    fn best_arc_min(v: &[i16; 16]) -> i16 {
        // Window minima of widths 2, 4, 8, then 9, all circular.
        let step = |a: &[i16; 16], k: usize| -> [i16; 16] { std::array::from_fn(|i| a[i].min(a[(i + k) & 15])) };
        let m8 = step(&step(&step(v, 1), 2), 4);
        let m9: [i16; 16] = std::array::from_fn(|i| m8[i].min(v[(i + 8) & 15]));
        m9.into_iter().max().unwrap()
    }
    let neg: [i16; 16] = d.map(|v| -v);
    let best = best_arc_min(d).max(best_arc_min(&neg));
    (best - 1).clamp(0, 255) as u8
}

/// Segment-test hits of one image, row-major, with a per-pixel threshold supplied by
/// `threshold(x, y)`. Uses the opposite-pair pretest; every 9-arc contains one of
/// pixels 0/8 and one of 4/12, so no corner is skipped.
pub fn segment_test_candidates(img: &GrayImage, threshold: impl Fn(usize, usize) -> f64) -> Vec<Candidate> {
    candidates_within(img, FAST_MARGIN, |y, row| {
        for (x, b) in row.iter_mut().enumerate() {
            *b = integer_bound(threshold(x, y));
        }
    })
}

/// Segment-test hits at least `border` pixels from the edge. `fill_bounds(y, row)` writes
/// the integer bound of every pixel of row `y`.
fn candidates_within(img: &GrayImage, border: usize, fill_bounds: impl Fn(usize, &mut [i16])) -> Vec<Candidate> {
    let (w, h) = img.dims();
    let border = border.max(FAST_MARGIN);
    if w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let data = img.data();
    let mut bounds = vec![0i16; w];
    let mut pass = vec![false; w];
    let mut out = Vec::new();
    for y in border..h - border {
        fill_bounds(y, &mut bounds);
        let up = img.row(y - 3);
        let mid = img.row(y);
        let down = img.row(y + 3);
        // Circle pixels 0/8 (above/below) and 4/12 (right/left).
        for x in border..w - border {
            let c = mid[x] as i16;
            let b = bounds[x];
            let (hi, lo) = (c + b, c - b);
            let out_of = |v: u8| (v as i16 >= hi) | (v as i16 <= lo);
            pass[x] = (out_of(up[x]) | out_of(down[x])) & (out_of(mid[x + 3]) | out_of(mid[x - 3]));
        }
        for x in border..w - border {
            if !pass[x] {
                continue;
            }
            let d = circle_diffs(data, w, x, y);
            if test_diffs(&d, bounds[x]) {
                out.push(Candidate { x, y, score: score_diffs(&d) });
            }
        }
    }
    out
}

/// Pre-NMS hit count at a single uniform threshold.
pub fn count_corners(img: &GrayImage, t: f64) -> usize {
    segment_test_candidates(img, |_, _| t).len()
}

/// Keeps candidates whose score beats every other candidate within Euclidean `radius`;
/// equal scores defer to the smaller `(y, x)`.
pub fn non_max_suppression(cands: &[Candidate], width: usize, height: usize, radius: usize) -> Vec<Candidate> {
    let mut grid = vec![-1i16; width * height];
    for c in cands {
        grid[c.y * width + c.x] = c.score as i16;
    }
    let r = radius as isize;
    let r2 = r * r;
    cands
        .iter()
        .filter(|c| {
            let s = c.score as i16;
            for dy in -r..=r {
                let ny = c.y as isize + dy;
                if ny < 0 || ny >= height as isize {
                    continue;
                }
                for dx in -r..=r {
                    let nx = c.x as isize + dx;
                    if (dx == 0 && dy == 0) || dx * dx + dy * dy > r2 || nx < 0 || nx >= width as isize {
                        continue;
                    }
                    let q = grid[ny as usize * width + nx as usize];
                    if q < 0 {
                        continue;
                    }
                    // Raster order: earlier neighbors have a smaller (y, x).
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if q > s || (q == s && earlier) {
                        return false;
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}

fn detect_level(level: &PyramidLevel, octave: usize, tmap: &ThresholdMap, cfg: &DetectorConfig) -> Vec<Keypoint> {
    let (w, h) = level.image.dims();
    // Level-0 cell lookup per column and per row.
    let project = |i: usize, scale: f64, limit: usize| -> usize {
        (((i as f64 + 0.5) * scale - 0.5).round().max(0.0) as usize).min(limit - 1)
    };
    let cell_x: Vec<usize> =
        (0..w).map(|x| (project(x, level.scale_x, tmap.width) / tmap.cell_size).min(tmap.grid_w - 1)).collect();
    let cell_y: Vec<usize> = (0..h)
        .map(|y| (project(y, level.scale_y, tmap.height) / tmap.cell_size).min(tmap.grid_h - 1) * tmap.grid_w)
        .collect();
    let bounds: Vec<i16> = tmap.cells.iter().map(|c| integer_bound(c.final_threshold)).collect();
    let cands = candidates_within(&level.image, cfg.border, |y, row| {
        for (b, &cx) in row.iter_mut().zip(&cell_x) {
            *b = bounds[cell_y[y] + cx];
        }
    });
    non_max_suppression(&cands, w, h, cfg.nms_radius)
        .into_iter()
        .map(|c| {
            let (x, y) = level.to_level0(c.x as f64, c.y as f64);
            Keypoint { x, y, octave, response: c.score, angle: f64::NAN, level_x: c.x, level_y: c.y }
        })
        .collect()
}

/// Deterministic output order: response descending, then octave, row, column.
pub fn sort_keypoints(kps: &mut [Keypoint]) {
    kps.sort_by(|a, b| {
        b.response
            .cmp(&a.response)
            .then(a.octave.cmp(&b.octave))
            .then(a.level_y.cmp(&b.level_y))
            .then(a.level_x.cmp(&b.level_x))
    });
}

/// Detect on a prebuilt pyramid.
pub fn detect_pyramid(pyramid: &Pyramid, tmap: &ThresholdMap, cfg: &DetectorConfig) -> Vec<Keypoint> {
    let per_level: Vec<Vec<Keypoint>> =
        pyramid.levels.par_iter().enumerate().map(|(octave, level)| detect_level(level, octave, tmap, cfg)).collect();
    let mut all: Vec<Keypoint> = per_level.into_iter().flatten().collect();
    sort_keypoints(&mut all);
    all.truncate(cfg.max_features);
    all
}

pub fn detect(frame: &GrayImage, tmap: &ThresholdMap, cfg: &DetectorConfig) -> Vec<Keypoint> {
    detect_pyramid(&Pyramid::build(frame, cfg), tmap, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Walks the circle twice looking for 9 consecutive qualifying pixels, with real
    /// comparisons against `center ± t`.
    fn oracle_test(img: &GrayImage, x: usize, y: usize, t: f64) -> bool {
        let c = img.get(x, y) as f64;
        let vals: Vec<f64> =
            CIRCLE.iter().map(|&(dx, dy)| img.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as f64).collect();
        for pred in [|v: f64, c: f64, t: f64| v > c + t, |v: f64, c: f64, t: f64| v < c - t] {
            let mut run = 0;
            for k in 0..32 {
                if pred(vals[k % 16], c, t) {
                    run += 1;
                    if run >= 9 {
                        return true;
                    }
                } else {
                    run = 0;
                }
            }
        }
        false
    }

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    /// Smooth-ish random texture: coarse noise upsampled, more corners than white noise.
    fn blocky(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<u8> = (0..(w / 4 + 1) * (h / 4 + 1)).map(|_| rng.gen()).collect();
        GrayImage::from_fn(w, h, |x, y| cells[(y / 4) * (w / 4 + 1) + x / 4]).unwrap()
    }

    #[test]
    fn arc_detection() {
        assert!(has_arc(0b1_1111_1111));
        assert!(!has_arc(0b1111_1111));
        // Wraps around bit 15 -> bit 0.
        assert!(has_arc(0b1111_1000_0000_0000 | 0b1111));
        assert!(!has_arc(0b1111_0000_0000_0000 | 0b1111));
        assert!(has_arc(0xFFFF));
    }

    #[test]
    fn constant_image_has_no_corners() {
        let img = GrayImage::filled(16, 16, 120).unwrap();
        for y in 3..13 {
            for x in 3..13 {
                assert!(!fast_segment_test(&img, x, y, 1.0).unwrap());
                assert_eq!(corner_score(&img, x, y).unwrap(), 0);
            }
        }
    }

    #[test]
    fn isolated_bright_dot_is_a_corner() {
        // All 16 circle pixels are darker than center - t.
        let img = GrayImage::from_fn(9, 9, |x, y| if (x, y) == (4, 4) { 255 } else { 0 }).unwrap();
        assert!(fast_segment_test(&img, 4, 4, 50.0).unwrap());
        assert!(oracle_test(&img, 4, 4, 50.0));
        assert_eq!(corner_score(&img, 4, 4).unwrap(), 254);
    }

    #[test]
    fn square_corner_versus_interior() {
        let img =
            GrayImage::from_fn(40, 40, |x, y| if (10..30).contains(&x) && (10..30).contains(&y) { 200 } else { 20 })
                .unwrap();
        assert!(fast_segment_test(&img, 10, 10, 30.0).unwrap());
        assert!(oracle_test(&img, 10, 10, 30.0));
        assert!(!fast_segment_test(&img, 20, 20, 30.0).unwrap());
        assert!(!oracle_test(&img, 20, 20, 30.0));
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let img = GrayImage::filled(10, 10, 0).unwrap();
        assert!(matches!(fast_segment_test(&img, 2, 5, 1.0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(corner_score(&img, 5, 7), Err(Error::OutOfBounds { .. })));
        assert!(fast_segment_test(&img, 6, 6, 1.0).is_ok());
    }

    #[test]
    fn score_matches_linear_scan() {
        for seed in 0..4 {
            let img = blocky(48, 48, seed);
            for y in 3..45 {
                for x in 3..45 {
                    let linear = (0..=255u32).filter(|&t| oracle_test(&img, x, y, t as f64)).max().unwrap_or(0) as u8;
                    assert_eq!(corner_score(&img, x, y).unwrap(), linear, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn candidates_match_oracle_including_fractional_thresholds() {
        for seed in 0..6 {
            let img = if seed % 2 == 0 { random_image(40, 32, seed) } else { blocky(40, 32, seed) };
            for t in [0.5, 7.0, 12.25, 33.9] {
                let got: Vec<(usize, usize)> =
                    segment_test_candidates(&img, |_, _| t).iter().map(|c| (c.x, c.y)).collect();
                let mut want = Vec::new();
                for y in 3..29 {
                    for x in 3..37 {
                        if oracle_test(&img, x, y, t) {
                            want.push((x, y));
                        }
                    }
                }
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn single_square_gives_four_corners() {
        let img =
            GrayImage::from_fn(60, 60, |x, y| if (20..40).contains(&x) && (20..40).contains(&y) { 255 } else { 0 })
                .unwrap();
        let cfg = DetectorConfig { n_levels: 1, ..Default::default() };
        let kps = detect(&img, &ThresholdMap::uniform(60, 60, 20.0), &cfg);
        assert_eq!(kps.len(), 4, "{kps:?}");
        for (cx, cy) in [(20.0, 20.0), (39.0, 20.0), (20.0, 39.0), (39.0, 39.0)] {
            assert!(
                kps.iter().any(|k| (k.x - cx).abs() <= 2.0 && (k.y - cy).abs() <= 2.0),
                "no keypoint near ({cx}, {cy}): {kps:?}"
            );
        }
    }

    #[test]
    fn constant_frame_yields_nothing() {
        let img = GrayImage::filled(64, 64, 50).unwrap();
        assert!(detect(&img, &ThresholdMap::uniform(64, 64, 5.0), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn higher_threshold_never_adds_keypoints() {
        let img = blocky(96, 80, 3);
        let cfg = DetectorConfig::default();
        let mut prev = usize::MAX;
        for t in [2.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
            let n = count_corners(&img, t);
            assert!(n <= prev);
            prev = n;
            let a = detect(&img, &ThresholdMap::uniform(96, 80, t), &cfg).len();
            let b = detect(&img, &ThresholdMap::uniform(96, 80, t + 10.0), &cfg).len();
            assert!(b <= a, "t={t}: {b} > {a}");
        }
    }

    #[test]
    fn nms_is_idempotent_and_keeps_local_maxima() {
        let img = blocky(80, 80, 11);
        let cands = segment_test_candidates(&img, |_, _| 10.0);
        let once = non_max_suppression(&cands, 80, 80, 3);
        let twice = non_max_suppression(&once, 80, 80, 3);
        assert_eq!(once, twice);
        assert!(!once.is_empty() && once.len() < cands.len());
        for a in &once {
            for b in &once {
                if a == b {
                    continue;
                }
                let d2 = (a.x as isize - b.x as isize).pow(2) + (a.y as isize - b.y as isize).pow(2);
                assert!(d2 > 9, "{a:?} and {b:?} both survived");
            }
        }
    }

    #[test]
    fn keypoints_respect_margin_and_threshold() {
        let img = blocky(120, 90, 5);
        let cfg = DetectorConfig::default();
        let pyr = Pyramid::build(&img, &cfg);
        assert_eq!(pyr.levels.len(), 4);
        let kps = detect_pyramid(&pyr, &ThresholdMap::uniform(120, 90, 12.0), &cfg);
        for k in &kps {
            let (w, h) = pyr.levels[k.octave].image.dims();
            assert!(k.level_x >= 3 && k.level_x < w - 3 && k.level_y >= 3 && k.level_y < h - 3);
            assert!(k.response >= 12);
            assert!(k.x >= 0.0 && k.x < 120.0 && k.y >= 0.0 && k.y < 90.0);
        }
        assert!(kps.windows(2).all(|w| w[0].response >= w[1].response));
    }

    #[test]
    fn max_features_truncates_and_is_deterministic() {
        let img = random_image(128, 96, 7);
        let cfg = DetectorConfig { max_features: 50, ..Default::default() };
        let tm = ThresholdMap::uniform(128, 96, 10.0);
        let a = detect(&img, &tm, &cfg);
        assert_eq!(a.len(), 50);
        let b = detect(&img, &tm, &cfg);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.x, x.y, x.octave, x.response), (y.x, y.y, y.octave, y.response));
        }
    }

    #[test]
    fn per_cell_thresholds_apply() {
        // Left half is gated by a huge threshold, right half by a small one.
        let img = blocky(80, 40, 13);
        let cfg = crate::threshold::ThresholdConfig { subregion_size: 40, ..Default::default() };
        let mut tm = crate::threshold::threshold_map(&img, &cfg);
        tm.cells[0].final_threshold = 300.0;
        tm.cells[1].final_threshold = 5.0;
        let kps = detect(&img, &tm, &DetectorConfig { n_levels: 1, ..Default::default() });
        assert!(!kps.is_empty());
        assert!(kps.iter().all(|k| k.x >= 40.0));
    }

    #[test]
    fn border_excludes_edge_corners() {
        let img = blocky(80, 80, 17);
        let tm = ThresholdMap::uniform(80, 80, 8.0);
        let cfg = DetectorConfig { n_levels: 1, border: 20, ..Default::default() };
        let kps = detect(&img, &tm, &cfg);
        assert!(!kps.is_empty());
        assert!(kps.iter().all(|k| (20..60).contains(&k.level_x) && (20..60).contains(&k.level_y)));
        assert!(DetectorConfig { border: 2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn pyramid_geometry() {
        let img = GrayImage::filled(752, 480, 9).unwrap();
        let p = Pyramid::build(&img, &DetectorConfig::default());
        let dims: Vec<_> = p.levels.iter().map(|l| l.image.dims()).collect();
        assert_eq!(dims, vec![(752, 480), (627, 400), (523, 333), (436, 278)]);
        assert!(p.levels.iter().all(|l| l.image.data().iter().all(|&v| v == 9)));
        let tiny = GrayImage::filled(8, 8, 0).unwrap();
        assert_eq!(Pyramid::build(&tiny, &DetectorConfig::default()).levels.len(), 1);
    }
}
