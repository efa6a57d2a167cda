//! Illumination-adaptive preprocessing: Gaussian smoothing, brightness classification,
//! adaptive gamma correction with a weighted distribution (AGCWD), and unsharp masking,
//! blended into a single enhanced frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    convolve, histogram, normalize_histogram, quantize, BorderPolicy, GrayImage, Kernel, ProbDist, SignedImage,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhancementConfig {
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    /// Side of the square Gaussian kernel; odd.
    pub kernel_size: usize,
    /// Exponent applied to the normalized distribution before accumulation.
    pub lambda: f64,
    /// Lower bound on the per-level gamma exponent.
    pub tau: f64,
    /// Mean intensity considered well exposed.
    pub mu_expected: f64,
    /// Relative deviation above which a frame is `Bright`.
    pub t_bright: f64,
    /// Relative deviation below which a frame is `Dim`. Negative.
    pub t_dim: f64,
    /// Weight of the gamma-corrected detail.
    pub epsilon: f64,
    /// Weight of the unsharp mask.
    pub eta: f64,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            kernel_size: 5,
            lambda: 0.5,
            tau: 0.2,
            mu_expected: 110.0,
            t_bright: 0.35,
            t_dim: -0.35,
            epsilon: 0.8,
            eta: 0.6,
        }
    }
}

impl EnhancementConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("enhancement: {msg}")));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be > 0");
        }
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size must be odd and >= 3");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be > 0");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.mu_expected > 0.0 && self.mu_expected < 255.0) {
            return bad("mu_expected must lie in (0, 255)");
        }
        if !(self.epsilon >= 0.0 && self.eta >= 0.0) {
            return bad("epsilon and eta must be >= 0");
        }
        if !(self.t_dim < 0.0 && 0.0 < self.t_bright) {
            return bad("thresholds must satisfy t_dim < 0 < t_bright");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BrightnessLevel {
    Dim,
    Normal,
    Bright,
}

impl std::fmt::Display for BrightnessLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BrightnessLevel::Dim => "dim",
            BrightnessLevel::Normal => "normal",
            BrightnessLevel::Bright => "bright",
        })
    }
}

/// Exposure class plus the relative deviation of the mean from `mu_expected`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrightnessClass {
    pub level: BrightnessLevel,
    pub mean: f64,
    pub deviation: f64,
}

/// Per-level gamma exponents and the resulting intensity mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaLut {
    pub gamma: [f64; 256],
    pub map: [u8; 256],
}

impl GammaLut {
    pub fn identity() -> Self {
        let mut map = [0u8; 256];
        for (i, m) in map.iter_mut().enumerate() {
            *m = i as u8;
        }
        Self { gamma: [1.0; 256], map }
    }
}

/// Intermediate rasters of one enhancement pass. All share the input's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedFrame {
    pub output: GrayImage,
    pub blurred: GrayImage,
    pub gamma_corrected: GrayImage,
    pub mask: SignedImage,
    pub brightness: BrightnessClass,
    pub lut: GammaLut,
}

/// Sampled isotropic Gaussian, renormalized to unit sum.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Kernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadSigma(sigma));
    }
    if size.is_multiple_of(2) {
        return Err(Error::EvenKernel { width: size, height: size });
    }
    let r = (size / 2) as i64;
    let two_s2 = 2.0 * sigma * sigma;
    let norm = 1.0 / (std::f64::consts::PI * two_s2);
    let mut weights = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            weights.push(norm * (-((x * x + y * y) as f64) / two_s2).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Kernel::new(size, size, weights)
}

pub fn gaussian_blur(img: &GrayImage, cfg: &EnhancementConfig) -> Result<GrayImage> {
    blur_with(img, cfg.sigma, cfg.kernel_size)
}

pub(crate) fn blur_with(img: &GrayImage, sigma: f64, size: usize) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma, size)?;
    convolve(img, &kernel, BorderPolicy::Replicate)?.to_gray()
}

pub fn classify_brightness(img: &GrayImage, cfg: &EnhancementConfig) -> BrightnessClass {
    let mean = img.mean();
    let deviation = (mean - cfg.mu_expected) / cfg.mu_expected;
    let level = if deviation > cfg.t_bright {
        BrightnessLevel::Bright
    } else if deviation < cfg.t_dim {
        BrightnessLevel::Dim
    } else {
        BrightnessLevel::Normal
    };
    BrightnessClass { level, mean, deviation }
}

/// Builds the AGCWD lookup table from an intensity distribution.
///
/// `P_min`/`P_max` range over all 256 levels. When they coincide the weighting is
/// undefined and the raw distribution is used instead.
pub fn agcwd_lut(p: &ProbDist, cfg: &EnhancementConfig) -> GammaLut {
    let probs = p.probs();
    let p_max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_min = probs.iter().copied().fold(f64::INFINITY, f64::min);

    let weighted: [f64; 256] = if p_max > p_min {
        let span = p_max - p_min;
        probs.map(|pi| p_max * ((pi - p_min) / span).powf(cfg.lambda))
    } else {
        *probs
    };
    let total: f64 = weighted.iter().sum();

    let mut gamma = [0.0; 256];
    let mut map = [0u8; 256];
    let mut running = 0.0;
    for i in 0..256 {
        running += weighted[i];
        let cdf = running / total;
        gamma[i] = cfg.tau.max(1.0 - cdf);
        map[i] = quantize(255.0 * (i as f64 / 255.0).powf(gamma[i]));
    }
    GammaLut { gamma, map }
}

pub fn apply_gamma(img: &GrayImage, lut: &GammaLut) -> GrayImage {
    img.map(|v| lut.map[v as usize])
}

/// `img - blurred`, kept signed.
pub fn unsharp_mask(img: &GrayImage, blurred: &GrayImage) -> Result<SignedImage> {
    if img.dims() != blurred.dims() {
        return Err(Error::DimensionMismatch { a: img.dims(), b: blurred.dims() });
    }
    let data = img.data().iter().zip(blurred.data()).map(|(&a, &b)| a as f64 - b as f64).collect();
    SignedImage::from_raw(img.width(), img.height(), data)
}

/// AGCWD on `img`, or on its negative and back for over-exposed frames.
fn gamma_correct(img: &GrayImage, level: BrightnessLevel, cfg: &EnhancementConfig) -> Result<(GrayImage, GammaLut)> {
    if level == BrightnessLevel::Bright {
        let inverted = img.inverted();
        let lut = agcwd_lut(&normalize_histogram(&histogram(&inverted))?, cfg);
        Ok((apply_gamma(&inverted, &lut).inverted(), lut))
    } else {
        let lut = agcwd_lut(&normalize_histogram(&histogram(img))?, cfg);
        Ok((apply_gamma(img, &lut), lut))
    }
}

pub fn enhance(img: &GrayImage, cfg: &EnhancementConfig) -> Result<EnhancedFrame> {
    let blurred = gaussian_blur(img, cfg)?;
    let brightness = classify_brightness(&blurred, cfg);
    let (gamma_corrected, lut) = gamma_correct(&blurred, brightness.level, cfg)?;
    let mask = unsharp_mask(img, &blurred)?;

    let out: Vec<u8> = blurred
        .data()
        .iter()
        .zip(gamma_corrected.data())
        .zip(mask.data())
        .map(|((&b, &g), &m)| {
            let b = b as f64;
            quantize(b + cfg.epsilon * (g as f64 - b) + cfg.eta * m)
        })
        .collect();
    let output = GrayImage::from_raw(img.width(), img.height(), out)?;
    Ok(EnhancedFrame { output, blurred, gamma_corrected, mask, brightness, lut })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Histogram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(entries: &[(usize, f64)]) -> ProbDist {
        let mut w = [0.0; 256];
        for &(i, p) in entries {
            w[i] = p;
        }
        ProbDist::from_weights(&w).unwrap()
    }

    /// Straight transcription of the weighting/CDF/gamma/mapping formulas.
    fn lut_oracle(p: &[f64; 256], lambda: f64, tau: f64) -> ([f64; 256], [f64; 256], [u8; 256]) {
        let mut pmax = 0.0f64;
        let mut pmin = 1.0f64;
        for &v in p {
            pmax = pmax.max(v);
            pmin = pmin.min(v);
        }
        let mut pw = [0.0; 256];
        for i in 0..256 {
            pw[i] = if pmax == pmin { p[i] } else { pmax * ((p[i] - pmin) / (pmax - pmin)).powf(lambda) };
        }
        let denom: f64 = pw.iter().sum();
        let mut cw = [0.0; 256];
        let mut map = [0u8; 256];
        for i in 0..256 {
            cw[i] = (0..=i).map(|j| pw[j] / denom).sum();
            let g = f64::max(tau, 1.0 - cw[i]);
            map[i] = (255.0 * (i as f64 / 255.0).powf(g)).round() as u8;
        }
        (pw, cw, map)
    }

    fn cfg(lambda: f64, tau: f64) -> EnhancementConfig {
        EnhancementConfig { lambda, tau, ..Default::default() }
    }

    #[test]
    fn kernel_normalized_and_symmetric() {
        for (s, n) in [(0.5, 3), (1.0, 5), (2.0, 7), (3.3, 9)] {
            let k = gaussian_kernel(s, n).unwrap();
            let sum: f64 = k.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            let c = n / 2;
            let max = k.weights().iter().copied().fold(0.0, f64::max);
            assert_eq!(k.at(c, c), max);
            for y in 0..n {
                for x in 0..n {
                    let v = k.at(x, y);
                    assert_eq!(v, k.at(n - 1 - x, y));
                    assert_eq!(v, k.at(x, n - 1 - y));
                    assert_eq!(v, k.at(y, x));
                }
            }
        }
    }

    #[test]
    fn kernel_sigma_one_size_three() {
        // Unnormalized samples are e^0, e^-1/2, e^-1 for center, edge, corner.
        let (c, e, d) = (1.0f64, (-0.5f64).exp(), (-1.0f64).exp());
        let total = c + 4.0 * e + 4.0 * d;
        let k = gaussian_kernel(1.0, 3).unwrap();
        assert!((k.at(1, 1) - c / total).abs() < 1e-15);
        assert!((k.at(0, 1) - e / total).abs() < 1e-15);
        assert!((k.at(0, 0) - d / total).abs() < 1e-15);
        assert!((k.at(1, 1) - 0.2041799556).abs() < 1e-9);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(gaussian_kernel(0.0, 3), Err(Error::BadSigma(_))));
        assert!(matches!(gaussian_kernel(-1.0, 3), Err(Error::BadSigma(_))));
        assert!(matches!(gaussian_kernel(1.0, 4), Err(Error::EvenKernel { .. })));
    }

    #[test]
    fn blur_constant_and_noise() {
        let c = GrayImage::filled(16, 16, 93).unwrap();
        assert_eq!(gaussian_blur(&c, &EnhancementConfig::default()).unwrap(), c);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let salt = GrayImage::from_fn(20, 20, |_, _| if rng.gen_bool(0.1) { 250 } else { 30 }).unwrap();
        let out = gaussian_blur(&salt, &EnhancementConfig::default()).unwrap();
        assert!(out.data().iter().all(|&v| (30..=250).contains(&v)));
        assert!(*out.data().iter().max().unwrap() < 250);
    }

    #[test]
    fn blur_checkerboard_matches_nested_loop() {
        let img = GrayImage::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 200 } else { 20 }).unwrap();
        let cfg = EnhancementConfig { sigma: 1.0, kernel_size: 5, ..Default::default() };
        let k = gaussian_kernel(1.0, 5).unwrap();
        let out = gaussian_blur(&img, &cfg).unwrap();
        for y in 0..16isize {
            for x in 0..16isize {
                let mut acc = 0.0;
                for ky in 0..5isize {
                    for kx in 0..5isize {
                        let sx = (x + kx - 2).clamp(0, 15) as usize;
                        let sy = (y + ky - 2).clamp(0, 15) as usize;
                        acc += k.at(kx as usize, ky as usize) * img.get(sx, sy) as f64;
                    }
                }
                let expected = (acc.clamp(0.0, 255.0) + 0.5).floor() as u8;
                assert_eq!(out.get(x as usize, y as usize), expected);
            }
        }
    }

    #[test]
    fn brightness_classes() {
        let cfg = EnhancementConfig::default();
        let b = classify_brightness(&GrayImage::filled(8, 8, 110).unwrap(), &cfg);
        assert_eq!((b.level, b.deviation), (BrightnessLevel::Normal, 0.0));
        let b = classify_brightness(&GrayImage::filled(8, 8, 255).unwrap(), &cfg);
        assert_eq!(b.level, BrightnessLevel::Bright);
        assert!((b.deviation - 145.0 / 110.0).abs() < 1e-12);
        assert!((b.deviation - 1.318).abs() < 1e-3);
        let b = classify_brightness(&GrayImage::filled(8, 8, 40).unwrap(), &cfg);
        assert_eq!(b.level, BrightnessLevel::Dim);
        assert!((b.deviation + 0.636).abs() < 1e-3);
    }

    #[test]
    fn three_level_distribution() {
        // P_min over all levels is 0, so with lambda = 1 the weighting is the identity:
        // P_w = {0.5, 0.3, 0.2}, C_w = {0.5, 0.8, 1.0}, gamma = {0.5, 0.2, 0.2}.
        let p = dist(&[(0, 0.5), (128, 0.3), (255, 0.2)]);
        let lut = agcwd_lut(&p, &cfg(1.0, 0.2));
        assert!((lut.gamma[0] - 0.5).abs() < 1e-12);
        assert!((lut.gamma[127] - 0.5).abs() < 1e-12);
        assert_eq!(lut.gamma[128], 0.2);
        assert_eq!(lut.gamma[255], 0.2);
        assert_eq!(lut.map[128], 222);
        assert_eq!(lut.map[0], 0);
        assert_eq!(lut.map[255], 255);
        let (pw, cw, map) = lut_oracle(p.probs(), 1.0, 0.2);
        assert!((pw[128] - 0.3).abs() < 1e-12 && (pw[255] - 0.2).abs() < 1e-12);
        assert!((cw[0] - 0.5).abs() < 1e-12 && (cw[128] - 0.8).abs() < 1e-12);
        assert_eq!(lut.map, map);
    }

    #[test]
    fn uniform_distribution_falls_back() {
        let p = ProbDist::from_weights(&[1.0; 256]).unwrap();
        let lut = agcwd_lut(&p, &cfg(0.5, 0.2));
        for i in 0..256 {
            let expected = f64::max(0.2, 1.0 - (i + 1) as f64 / 256.0);
            assert!((lut.gamma[i] - expected).abs() < 1e-12, "level {i}");
        }
        assert!(lut.map.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(lut.map[255], 255);
        assert_eq!(lut.map, lut_oracle(p.probs(), 0.5, 0.2).2);
    }

    #[test]
    fn lut_matches_oracle_on_random_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let mut w = [0.0; 256];
            for v in w.iter_mut() {
                if rng.gen_bool(0.4) {
                    *v = rng.gen_range(0.0..10.0);
                }
            }
            w[rng.gen_range(0..256)] += 1.0;
            let p = ProbDist::from_weights(&w).unwrap();
            let lambda = rng.gen_range(0.1..2.0);
            let tau = rng.gen_range(0.05..1.0);
            let lut = agcwd_lut(&p, &cfg(lambda, tau));
            let (_, cw, map) = lut_oracle(p.probs(), lambda, tau);
            assert!((cw[255] - 1.0).abs() < 1e-9);
            // Summation order differs from the oracle, so allow one level of rounding slack.
            for (got, want) in lut.map.iter().zip(map.iter()) {
                assert!((*got as i32 - *want as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn apply_gamma_identities() {
        let img = GrayImage::from_fn(16, 16, |x, y| (x * 16 + y) as u8).unwrap();
        assert_eq!(apply_gamma(&img, &GammaLut::identity()), img);

        // Exponent one everywhere: tau = 1 forces gamma(i) = 1.
        let p = normalize_histogram(&histogram(&img)).unwrap();
        let lut = agcwd_lut(&p, &cfg(0.5, 1.0));
        assert!(lut.gamma.iter().all(|&g| g == 1.0));
        assert_eq!(apply_gamma(&img, &lut), img);

        let dark = GrayImage::from_fn(16, 16, |x, y| ((x + 16 * y) / 4) as u8).unwrap();
        let p = dist(&[(0, 0.5), (128, 0.3), (255, 0.2)]);
        let lut = agcwd_lut(&p, &cfg(1.0, 0.2));
        let (_, _, oracle) = lut_oracle(p.probs(), 1.0, 0.2);
        let out = apply_gamma(&dark, &lut);
        for (&src, &dst) in dark.data().iter().zip(out.data()) {
            assert_eq!(dst, oracle[src as usize]);
        }
    }

    #[test]
    fn unsharp_mask_cases() {
        let img = GrayImage::from_fn(12, 12, |x, _| if x < 6 { 20 } else { 220 }).unwrap();
        assert!(unsharp_mask(&img, &img).unwrap().data().iter().all(|&v| v == 0.0));

        let blurred =
            gaussian_blur(&img, &EnhancementConfig { kernel_size: 5, sigma: 1.0, ..Default::default() }).unwrap();
        let mask = unsharp_mask(&img, &blurred).unwrap();
        for y in 0..12 {
            assert!(mask.get(6, y) > 0.0);
            assert!(mask.get(5, y) < 0.0);
            assert_eq!(mask.get(0, y), 0.0);
            assert_eq!(mask.get(11, y), 0.0);
            for x in 0..12 {
                assert_eq!(mask.get(x, y), img.get(x, y) as f64 - blurred.get(x, y) as f64);
            }
        }

        let c = GrayImage::filled(9, 9, 31).unwrap();
        let bc = gaussian_blur(&c, &EnhancementConfig::default()).unwrap();
        assert!(unsharp_mask(&c, &bc).unwrap().data().iter().all(|&v| v == 0.0));

        let other = GrayImage::filled(9, 10, 0).unwrap();
        assert!(matches!(unsharp_mask(&c, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_weights_return_the_blur() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = GrayImage::from_fn(32, 24, |_, _| rng.gen()).unwrap();
        let cfg = EnhancementConfig { epsilon: 0.0, eta: 0.0, ..Default::default() };
        let out = enhance(&img, &cfg).unwrap();
        assert_eq!(out.output, out.blurred);
    }

    #[test]
    fn constant_frame_follows_the_lut() {
        let cfg = EnhancementConfig::default();
        for c in [3u8, 60, 110, 200, 250] {
            let img = GrayImage::filled(16, 16, c).unwrap();
            let out = enhance(&img, &cfg).unwrap();
            assert!(out.mask.data().iter().all(|&m| m == 0.0));
            let g = out.gamma_corrected.get(0, 0) as f64;
            let expected = quantize(c as f64 + cfg.epsilon * (g - c as f64));
            assert!(out.output.data().iter().all(|&v| v == expected), "c = {c}");
        }
    }

    #[test]
    fn bright_frames_are_corrected_in_negative() {
        let cfg = EnhancementConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = GrayImage::from_fn(40, 30, |_, _| rng.gen_range(170..=255)).unwrap();
        let out = enhance(&img, &cfg).unwrap();
        assert_eq!(out.brightness.level, BrightnessLevel::Bright);

        let inv = out.blurred.inverted();
        assert_eq!(inv.inverted(), out.blurred);
        let lut = agcwd_lut(&normalize_histogram(&histogram(&inv)).unwrap(), &cfg);
        assert_eq!(out.lut, lut);
        assert_eq!(out.gamma_corrected, apply_gamma(&inv, &lut).inverted());
        // Correcting the negative brightens it, so the result is darker than its input.
        assert!(out.gamma_corrected.mean() < out.blurred.mean());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = GrayImage::from_fn(64, 48, |_, _| rng.gen()).unwrap();
        let cfg = EnhancementConfig::default();
        assert_eq!(enhance(&img, &cfg).unwrap(), enhance(&img, &cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(EnhancementConfig::default().validate().is_ok());
        for bad in [
            EnhancementConfig { sigma: 0.0, ..Default::default() },
            EnhancementConfig { kernel_size: 4, ..Default::default() },
            EnhancementConfig { tau: 0.0, ..Default::default() },
            EnhancementConfig { mu_expected: 255.0, ..Default::default() },
            EnhancementConfig { t_dim: 0.1, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lut_invariants(
                counts in proptest::collection::vec(0u64..50, 256),
                lambda in 0.05f64..3.0,
                tau in 0.01f64..=1.0,
            ) {
                let mut h = Histogram { bins: [0; 256] };
                h.bins.copy_from_slice(&counts);
                h.bins[0] += 1;
                let p = normalize_histogram(&h).unwrap();
                let lut = agcwd_lut(&p, &cfg(lambda, tau));
                prop_assert_eq!(lut.map[0], 0);
                prop_assert_eq!(lut.map[255], 255);
                prop_assert!(lut.map.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(lut.gamma.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(lut.gamma.iter().all(|&g| g >= tau && g <= 1.0));
                prop_assert_eq!(lut.gamma[255], tau);
            }
        }
    }
}
