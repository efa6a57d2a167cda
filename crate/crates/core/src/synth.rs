//! Seeded synthetic imagery for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{quantize, GrayImage, Rect};

/// Piecewise-constant scene of overlapping rectangles and discs on a soft gradient,
/// with mild per-pixel noise. Rich in corners at every scale.
pub fn textured(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut canvas: Vec<f64> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            90.0 + 40.0 * (x / width as f64) + 30.0 * (y / height as f64)
        })
        .collect();

    // Roughly one shape per 900 px², sizes from 4 to 60 px.
    let shapes = (width * height / 900).max(8);
    for _ in 0..shapes {
        let value = rng.gen_range(30.0..230.0);
        let sw = rng.gen_range(4..60usize).min(width);
        let sh = rng.gen_range(4..60usize).min(height);
        let x0 = rng.gen_range(0..width);
        let y0 = rng.gen_range(0..height);
        if rng.gen_bool(0.65) {
            let r = Rect::new(x0, y0, sw, sh).intersect(&Rect::new(0, 0, width, height));
            for y in r.y..r.bottom() {
                canvas[y * width + r.x..y * width + r.right()].fill(value);
            }
        } else {
            let rad = (sw.min(sh) / 2).max(2) as f64;
            let y_lo = (y0 as f64 - rad).max(0.0) as usize;
            let y_hi = ((y0 as f64 + rad) as usize).min(height - 1);
            let x_lo = (x0 as f64 - rad).max(0.0) as usize;
            let x_hi = ((x0 as f64 + rad) as usize).min(width - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let (dx, dy) = (x as f64 - x0 as f64, y as f64 - y0 as f64);
                    if dx * dx + dy * dy <= rad * rad {
                        canvas[y * width + x] = value;
                    }
                }
            }
        }
    }
    let data = canvas.into_iter().map(|v| quantize(v + rng.gen_range(-3.0..=3.0))).collect();
    GrayImage::from_raw(width, height, data).expect("synthetic size is valid")
}

/// `v -> round(255 (v/255)^3)`, a strong low-light simulation.
pub fn darken_cubic(img: &GrayImage) -> GrayImage {
    let mut lut = [0u8; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = (255.0 * (i as f64 / 255.0).powi(3)).round() as u8;
    }
    img.map(|v| lut[v as usize])
}

/// Copy of a window; the window must lie inside the image.
pub fn crop(img: &GrayImage, rect: Rect) -> GrayImage {
    let view = img.view(rect);
    assert_eq!(view.rect(), rect, "crop window leaves the image");
    GrayImage::from_raw(rect.w, rect.h, view.pixels().collect()).expect("crop keeps the minimum size")
}

/// A camera panning across one large scene. Frame `i` is shifted by `(2i, i)` pixels and
/// exposure cycles through normal, dim and bright.
pub fn sequence(frames: usize, width: usize, height: usize, seed: u64) -> Vec<GrayImage> {
    let scene = textured(width + 2 * frames + 8, height + frames + 8, seed);
    let dim = |v: u8| (v as f64 * 0.35).round() as u8;
    let bright = |v: u8| (255.0 - (255 - v) as f64 * 0.3).round() as u8;
    (0..frames)
        .map(|i| {
            let f = crop(&scene, Rect::new(2 * i, i, width, height));
            match i % 3 {
                0 => f,
                1 => f.map(dim),
                _ => f.map(bright),
            }
        })
        .collect()
}
