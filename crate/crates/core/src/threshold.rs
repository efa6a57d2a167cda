//! Scene-adaptive FAST thresholds.
//!
//! A global ceiling comes from histogram entropy and mean Sobel magnitude. Each square
//! subregion then gets a local threshold from the distance between its center intensity
//! and its Otsu split, clipped to `[f_t_min, global]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{histogram, normalize_histogram, sobel_raw, GrayImage, Histogram, ImageView, Rect};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Weight on entropy (bits).
    pub alpha: f64,
    /// Weight on mean gradient magnitude.
    pub beta: f64,
    /// Scale applied to `|center - otsu|`.
    pub delta: f64,
    /// Side of the square subregions in pixels.
    pub subregion_size: usize,
    /// Floor for every final threshold.
    pub f_t_min: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 0.25, delta: 0.5, subregion_size: 40, f_t_min: 7.0 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("threshold: {msg}")));
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be >= 0");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be > 0");
        }
        if self.subregion_size < 8 {
            return bad("subregion_size must be >= 8");
        }
        if !(self.f_t_min >= 1.0) {
            return bad("f_t_min must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlobalStats {
    /// Histogram entropy in bits.
    pub entropy: f64,
    /// Mean Sobel gradient magnitude.
    pub mean_gradient: f64,
    pub global_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellThreshold {
    pub rect: Rect,
    pub otsu: u8,
    pub center_intensity: u8,
    pub local: f64,
    #[serde(rename = "final")]
    pub final_threshold: f64,
}

/// Per-subregion thresholds tiling an image, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdMap {
    pub width: usize,
    pub height: usize,
    pub cell_size: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub global: GlobalStats,
    pub cells: Vec<CellThreshold>,
}

impl ThresholdMap {
    /// A map that applies `threshold` everywhere; the baseline when adaptation is off.
    pub fn uniform(width: usize, height: usize, threshold: f64) -> Self {
        let rect = Rect::new(0, 0, width, height);
        Self {
            width,
            height,
            cell_size: width.max(height).max(1),
            grid_w: 1,
            grid_h: 1,
            global: GlobalStats { entropy: 0.0, mean_gradient: 0.0, global_threshold: threshold },
            cells: vec![CellThreshold {
                rect,
                otsu: 0,
                center_intensity: 0,
                local: threshold,
                final_threshold: threshold,
            }],
        }
    }

    /// Threshold of the cell containing level-0 pixel `(x, y)`. Coordinates past the
    /// edge are clamped into the last cell.
    #[inline]
    pub fn threshold_at(&self, x: usize, y: usize) -> f64 {
        let cx = (x / self.cell_size).min(self.grid_w - 1);
        let cy = (y / self.cell_size).min(self.grid_h - 1);
        self.cells[cy * self.grid_w + cx].final_threshold
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("threshold map serializes")
    }
}

/// Shannon entropy of the intensity histogram, in bits.
pub fn entropy(img: &GrayImage) -> f64 {
    entropy_of(&histogram(img))
}

fn entropy_of(h: &Histogram) -> f64 {
    let Ok(p) = normalize_histogram(h) else { return 0.0 };
    let e: f64 = p.probs().iter().filter(|&&pi| pi > 0.0).map(|&pi| -pi * pi.log2()).sum();
    // A single occupied bin gives -0.0.
    e.max(0.0)
}

/// Mean Sobel gradient magnitude over every pixel.
pub fn mean_gradient(img: &GrayImage) -> f64 {
    let (gx, gy) = sobel_raw(img);
    let sum: f64 = gx.iter().zip(&gy).map(|(&a, &b)| (((a * a) + (b * b)) as f64).sqrt()).sum();
    sum / (img.width() * img.height()) as f64
}

pub fn global_threshold(entropy: f64, mean_gradient: f64, cfg: &ThresholdConfig) -> f64 {
    cfg.alpha * entropy + cfg.beta * mean_gradient
}

pub fn global_stats(img: &GrayImage, cfg: &ThresholdConfig) -> GlobalStats {
    let entropy = entropy(img);
    let mean_gradient = mean_gradient(img);
    GlobalStats { entropy, mean_gradient, global_threshold: global_threshold(entropy, mean_gradient, cfg) }
}

/// Otsu split of a window: the `t` in `0..=254` maximizing the between-class variance,
/// smallest `t` on ties. Thresholds that leave one class empty are skipped; a window
/// with a single intensity returns that intensity.
///
/// The variance ratio is compared exactly in integers. With `n_t` pixels at or below
/// `t`, `s_t` their intensity sum, `N` pixels and total sum `S`, the between-class
/// variance equals `(S n_t - s_t N)^2 / (N^2 n_t (N - n_t))`; the common `N^2` drops out.
pub fn otsu_threshold(region: &ImageView<'_>) -> u8 {
    otsu_from_histogram(&region.histogram())
}

pub(crate) fn otsu_from_histogram(h: &Histogram) -> u8 {
    let n = h.total() as i128;
    let total_sum: i128 = h.bins.iter().enumerate().map(|(i, &c)| i as i128 * c as i128).sum();

    let mut best: Option<(u8, u128, u128)> = None;
    let mut below = 0i128;
    let mut below_sum = 0i128;
    for t in 0..255usize {
        below += h.bins[t] as i128;
        below_sum += t as i128 * h.bins[t] as i128;
        if below == 0 || below == n {
            continue;
        }
        let diff = total_sum * below - below_sum * n;
        let num = (diff * diff) as u128;
        let den = (below * (n - below)) as u128;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    match best {
        Some((t, _, _)) => t,
        // Single occupied level (or empty window): fall back to that level.
        None => h.bins.iter().position(|&c| c > 0).unwrap_or(0) as u8,
    }
}

/// Center intensity, Otsu split and `delta * |center - otsu|` for one window.
pub fn local_threshold(region: &ImageView<'_>, cfg: &ThresholdConfig) -> (u8, u8, f64) {
    let center = region.get(region.width() / 2, region.height() / 2);
    let otsu = otsu_threshold(region);
    (center, otsu, cfg.delta * (center as f64 - otsu as f64).abs())
}

/// Clip into `[lower, upper]`; the lower bound wins when the range is empty.
#[inline]
pub fn clip_threshold(local: f64, lower: f64, upper: f64) -> f64 {
    local.min(upper).max(lower)
}

pub fn threshold_map(img: &GrayImage, cfg: &ThresholdConfig) -> ThresholdMap {
    let global = global_stats(img, cfg);
    let size = cfg.subregion_size;
    let (w, h) = img.dims();
    let grid_w = w.div_ceil(size);
    let grid_h = h.div_ceil(size);
    let mut cells = Vec::with_capacity(grid_w * grid_h);
    for gy in 0..grid_h {
        for gx in 0..grid_w {
            let rect = Rect::new(gx * size, gy * size, size, size).intersect(&img.bounds());
            let (center_intensity, otsu, local) = local_threshold(&img.view(rect), cfg);
            let final_threshold = clip_threshold(local, cfg.f_t_min, global.global_threshold);
            cells.push(CellThreshold { rect, otsu, center_intensity, local, final_threshold });
        }
    }
    ThresholdMap { width: w, height: h, cell_size: size, grid_w, grid_h, global, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    /// Exhaustive argmax with exact rational arithmetic, written straight from
    /// `P_t`, `mu_t`, `mu_T` and the variance ratio.
    fn otsu_oracle(view: &ImageView<'_>) -> u8 {
        let h = view.histogram();
        let n = h.total() as i128;
        let p: Vec<Ratio<i128>> = h.bins.iter().map(|&c| Ratio::new(c as i128, n)).collect();
        let mu_total: Ratio<i128> = (0..256).map(|i| p[i] * Ratio::from_integer(i as i128)).sum();
        let mut best: Option<(u8, Ratio<i128>)> = None;
        for t in 0..=254usize {
            let pt: Ratio<i128> = (0..=t).map(|i| p[i]).sum();
            if pt == Ratio::from_integer(0) || pt == Ratio::from_integer(1) {
                continue;
            }
            let mut mut_ = Ratio::from_integer(0);
            for (i, pi) in p.iter().enumerate().take(t + 1) {
                mut_ += pi * Ratio::from_integer(i as i128);
            }
            let d = mu_total * pt - mut_;
            let var = d * d / (pt * (Ratio::from_integer(1) - pt));
            if best.is_none_or(|(_, b)| var > b) {
                best = Some((t as u8, var));
            }
        }
        best.map(|b| b.0).unwrap_or_else(|| view.get(0, 0))
    }

    #[test]
    fn entropy_fixtures() {
        assert_eq!(entropy(&GrayImage::filled(8, 8, 9).unwrap()), 0.0);
        let two = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 10 } else { 90 }).unwrap();
        assert_eq!(entropy(&two), 1.0);
        let all = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as u8).unwrap();
        assert_eq!(entropy(&all), 8.0);
    }

    #[test]
    fn mean_gradient_cases() {
        assert_eq!(mean_gradient(&GrayImage::filled(10, 10, 4).unwrap()), 0.0);

        // Border columns see half the slope; the mean converges to 8 with width.
        let mut prev = 0.0;
        for w in [16usize, 64, 200] {
            let ramp = GrayImage::from_fn(w, 12, |x, _| x as u8).unwrap();
            let g = mean_gradient(&ramp);
            assert!(g > prev && g < 8.0);
            prev = g;
        }
        assert!((prev - 8.0).abs() < 0.05);

        for seed in 0..10 {
            let img = random_image(8, 8, seed);
            let mut sum = 0.0;
            for y in 0..8isize {
                for x in 0..8isize {
                    let px = |dx: isize, dy: isize| {
                        img.get((x + dx).clamp(0, 7) as usize, (y + dy).clamp(0, 7) as usize) as f64
                    };
                    let gx = px(1, -1) + 2.0 * px(1, 0) + px(1, 1) - px(-1, -1) - 2.0 * px(-1, 0) - px(-1, 1);
                    let gy = px(-1, 1) + 2.0 * px(0, 1) + px(1, 1) - px(-1, -1) - 2.0 * px(0, -1) - px(1, -1);
                    sum += (gx * gx + gy * gy).sqrt();
                }
            }
            assert!((mean_gradient(&img) - sum / 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn global_threshold_arithmetic() {
        let c = |alpha, beta| ThresholdConfig { alpha, beta, ..Default::default() };
        assert_eq!(global_threshold(8.0, 3.0, &c(1.0, 0.0)), 8.0);
        assert_eq!(global_threshold(8.0, 3.0, &c(0.0, 0.0)), 0.0);
        assert_eq!(global_threshold(5.0, 10.0, &c(2.0, 0.25)), 12.5);
    }

    #[test]
    fn otsu_degenerate_and_tie() {
        let c = GrayImage::filled(8, 8, 128).unwrap();
        assert_eq!(otsu_threshold(&c.view(c.bounds())), 128);
        let two = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 10 } else { 200 }).unwrap();
        assert_eq!(otsu_threshold(&two.view(two.bounds())), 10);
    }

    #[test]
    fn otsu_matches_rational_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..60 {
            // Mix of uniform noise and few-level images to exercise ties.
            let levels: Vec<u8> = (0..rng.gen_range(2..6)).map(|_| rng.gen()).collect();
            let img = if i % 2 == 0 {
                GrayImage::from_fn(40, 40, |_, _| rng.gen()).unwrap()
            } else {
                GrayImage::from_fn(40, 40, |_, _| levels[rng.gen_range(0..levels.len())]).unwrap()
            };
            let v = img.view(img.bounds());
            assert_eq!(otsu_threshold(&v), otsu_oracle(&v));
        }
    }

    #[test]
    fn local_threshold_cases() {
        let cfg = ThresholdConfig { delta: 0.5, ..Default::default() };
        // Center pixel 150 sits with the bright class; the split is at 100.
        let img = GrayImage::from_fn(9, 9, |x, y| {
            if (x, y) == (4, 4) {
                150
            } else if x < 4 {
                100
            } else {
                160
            }
        })
        .unwrap();
        let (center, otsu, local) = local_threshold(&img.view(img.bounds()), &cfg);
        assert_eq!((center, otsu), (150, 100));
        assert_eq!(local, 25.0);

        let c = GrayImage::filled(8, 8, 77).unwrap();
        assert_eq!(local_threshold(&c.view(c.bounds()), &cfg), (77, 77, 0.0));
    }

    #[test]
    fn clipping() {
        assert_eq!(clip_threshold(30.0, 7.0, 20.0), 20.0);
        assert_eq!(clip_threshold(2.0, 7.0, 20.0), 7.0);
        assert_eq!(clip_threshold(12.0, 7.0, 20.0), 12.0);
        // Empty range: the floor wins.
        assert_eq!(clip_threshold(12.0, 7.0, 3.0), 7.0);
    }

    #[test]
    fn map_tiles_with_truncated_edges() {
        let img = random_image(100, 70, 2);
        let cfg = ThresholdConfig::default();
        let map = threshold_map(&img, &cfg);
        assert_eq!((map.grid_w, map.grid_h), (3, 2));
        assert_eq!(map.cells.iter().map(|c| c.rect.area()).sum::<usize>(), 100 * 70);
        assert_eq!(map.cells[2].rect, Rect::new(80, 0, 20, 40));
        assert_eq!(map.threshold_at(99, 69), map.cells[5].final_threshold);
        let upper = cfg.f_t_min.max(map.global.global_threshold);
        assert!(map.cells.iter().all(|c| c.final_threshold >= cfg.f_t_min && c.final_threshold <= upper));
        let json: serde_json::Value = serde_json::from_str(&map.to_json()).unwrap();
        assert_eq!(json["cells"].as_array().unwrap().len(), 6);
        assert!(json["cells"][0]["final"].is_number());
    }

    #[test]
    fn low_global_threshold_falls_to_floor() {
        let img = random_image(64, 64, 8);
        let cfg = ThresholdConfig { alpha: 0.0, beta: 0.0, ..Default::default() };
        let map = threshold_map(&img, &cfg);
        assert!(map.cells.iter().all(|c| c.final_threshold == cfg.f_t_min));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn image_strategy() -> impl Strategy<Value = GrayImage> {
            (8usize..50, 8usize..50).prop_flat_map(|(w, h)| {
                proptest::collection::vec(any::<u8>(), w * h).prop_map(move |d| GrayImage::from_raw(w, h, d).unwrap())
            })
        }

        proptest! {
            #[test]
            fn entropy_bounded_and_permutation_invariant(img in image_strategy(), seed in any::<u64>()) {
                let e = entropy(&img);
                prop_assert!((0.0..=8.0).contains(&e));
                let mut data = img.data().to_vec();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in (1..data.len()).rev() {
                    data.swap(i, rng.gen_range(0..=i));
                }
                let shuffled = GrayImage::from_raw(img.width(), img.height(), data).unwrap();
                prop_assert_eq!(entropy(&shuffled), e);
            }

            #[test]
            fn gradient_ignores_intensity_offsets(img in image_strategy(), offset in 0u8..64) {
                let low = img.map(|v| v / 2);
                let high = low.map(|v| v + offset);
                let (gl, _) = sobel_raw(&low);
                let (gh, _) = sobel_raw(&high);
                prop_assert_eq!(gl, gh);
                prop_assert!((mean_gradient(&low) - mean_gradient(&high)).abs() < 1e-9);
            }

            #[test]
            fn otsu_matches_oracle(img in image_strategy()) {
                let v = img.view(img.bounds());
                prop_assert_eq!(otsu_threshold(&v), otsu_oracle(&v));
            }

            #[test]
            fn cells_tile_and_respect_bounds(img in image_strategy(), size in 8usize..30, alpha in 0.0f64..4.0) {
                let cfg = ThresholdConfig { subregion_size: size, alpha, ..Default::default() };
                let map = threshold_map(&img, &cfg);
                prop_assert_eq!(map.cells.iter().map(|c| c.rect.area()).sum::<usize>(), img.width() * img.height());
                let mut covered = vec![0u8; img.width() * img.height()];
                for c in &map.cells {
                    for y in c.rect.y..c.rect.bottom() {
                        for x in c.rect.x..c.rect.right() {
                            covered[y * img.width() + x] += 1;
                        }
                    }
                }
                prop_assert!(covered.iter().all(|&c| c == 1));
                let upper = cfg.f_t_min.max(map.global.global_threshold);
                for c in &map.cells {
                    prop_assert!(c.final_threshold >= cfg.f_t_min && c.final_threshold <= upper);
                }
            }

            #[test]
            fn larger_delta_never_lowers_local(img in image_strategy(), d1 in 0.01f64..2.0, extra in 0.0f64..2.0) {
                let a = threshold_map(&img, &ThresholdConfig { delta: d1, ..Default::default() });
                let b = threshold_map(&img, &ThresholdConfig { delta: d1 + extra, ..Default::default() });
                for (ca, cb) in a.cells.iter().zip(&b.cells) {
                    prop_assert!(cb.local >= ca.local);
                }
            }
        }
    }
}
