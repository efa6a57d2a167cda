//! Raster types and the low-level pixel operations every later stage builds on.
//!
//! All rasters are row-major. Intermediate arithmetic is `f64`; conversion back to
//! 8 bits goes through [`quantize`] (clamp to `[0, 255]`, round half up).

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest accepted side length. FAST needs a 3 pixel margin on every side.
pub const MIN_SIDE: usize = 8;

/// 8-bit single-channel image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::ImageTooSmall { width, height });
        }
        if data.len() != width * height {
            return Err(Error::BufferSize { width, height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::from_raw(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    pub fn view(&self, rect: Rect) -> ImageView<'_> {
        let clipped = rect.intersect(&self.bounds());
        ImageView { image: self, rect: clipped }
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> GrayImage {
        GrayImage { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `255 - v` for every pixel.
    pub fn inverted(&self) -> GrayImage {
        self.map(|v| 255 - v)
    }

    pub fn transposed(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        GrayImage { width: self.height, height: self.width, data }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as u64).sum::<u64>() as f64 / self.data.len() as f64
    }
}

/// Real-valued raster (masks, gradients, unquantized filter output).
#[derive(Clone, Debug, PartialEq)]
pub struct SignedImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SignedImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferSize { width, height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn transposed(&self) -> SignedImage {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        SignedImage { width: self.height, height: self.width, data }
    }

    /// Quantize every sample with [`quantize`].
    pub fn to_gray(&self) -> Result<GrayImage> {
        GrayImage::from_raw(self.width, self.height, self.data.iter().map(|&v| quantize(v)).collect())
    }
}

/// Clamp to `[0, 255]` and round half up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    // The argument is positive after clamping, so truncation is floor.
    (v.clamp(0.0, 255.0) + 0.5) as u8
}

/// Axis-aligned pixel rectangle, half-open on the right and bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    /// Whether the real-valued point lies in `[x, x+w) × [y, y+h)`.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64 && px < self.right() as f64 && py >= self.y as f64 && py < self.bottom() as f64
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

/// Borrowed rectangular window of a [`GrayImage`]. May be smaller than 8×8.
#[derive(Clone, Copy, Debug)]
pub struct ImageView<'a> {
    image: &'a GrayImage,
    rect: Rect,
}

impl<'a> ImageView<'a> {
    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn width(&self) -> usize {
        self.rect.w
    }

    pub fn height(&self) -> usize {
        self.rect.h
    }

    pub fn is_empty(&self) -> bool {
        self.rect.area() == 0
    }

    /// Pixel at view-local coordinates.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.image.get(self.rect.x + x, self.rect.y + y)
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [u8]> + '_ {
        let (x0, x1) = (self.rect.x, self.rect.right());
        (self.rect.y..self.rect.bottom()).map(move |y| &self.image.row(y)[x0..x1])
    }

    pub fn pixels(&self) -> impl Iterator<Item = u8> + '_ {
        self.rows().flat_map(|r| r.iter().copied())
    }

    pub fn histogram(&self) -> Histogram {
        let mut bins = [0u64; 256];
        for row in self.rows() {
            for &v in row {
                bins[v as usize] += 1;
            }
        }
        Histogram { bins }
    }
}

/// 256-bin intensity histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bins: [u64; 256],
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Normalized histogram; sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist {
    p: [f64; 256],
}

impl ProbDist {
    /// Accepts any non-negative weights and renormalizes them.
    pub fn from_weights(weights: &[f64; 256]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::EmptyHistogram);
        }
        let mut p = [0.0; 256];
        for (dst, w) in p.iter_mut().zip(weights) {
            *dst = w / total;
        }
        Ok(Self { p })
    }

    pub fn probs(&self) -> &[f64; 256] {
        &self.p
    }

    #[inline]
    pub fn get(&self, level: u8) -> f64 {
        self.p[level as usize]
    }
}

/// How out-of-image samples are synthesized during filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BorderPolicy {
    /// Clamp coordinates to the nearest edge pixel.
    #[default]
    Replicate,
}

/// Dense 2-D filter kernel with odd dimensions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::EvenKernel { width, height });
        }
        if weights.len() != width * height {
            return Err(Error::BufferSize { width, height, actual: weights.len() });
        }
        Ok(Self { width, height, weights })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, kx: usize, ky: usize) -> f64 {
        self.weights[ky * self.width + kx]
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &v in img.data() {
        bins[v as usize] += 1;
    }
    Histogram { bins }
}

pub fn normalize_histogram(h: &Histogram) -> Result<ProbDist> {
    let total = h.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut p = [0.0; 256];
    for (dst, &count) in p.iter_mut().zip(h.bins.iter()) {
        *dst = count as f64 / total as f64;
    }
    Ok(ProbDist { p })
}

/// Correlation of `img` with `kernel` (no kernel flip).
///
/// Every output sample accumulates `weight * pixel` over the kernel in row-major order,
/// so results round identically to a plain nested loop.
pub fn convolve(img: &GrayImage, kernel: &Kernel, border: BorderPolicy) -> Result<SignedImage> {
    let BorderPolicy::Replicate = border;
    let (w, h) = img.dims();
    let (kw, kh) = (kernel.width(), kernel.height());
    if kw % 2 == 0 || kh % 2 == 0 {
        return Err(Error::EvenKernel { width: kw, height: kh });
    }
    let (rx, ry) = (kw / 2, kh / 2);
    let src = img.data();
    let pw = w + 2 * rx;
    // Rows widened by `rx` replicated samples on each side.
    let mut padded = vec![0.0f64; pw * h];
    for (y, prow) in padded.chunks_exact_mut(pw).enumerate() {
        let row = &src[y * w..(y + 1) * w];
        for (i, dst) in prow.iter_mut().enumerate() {
            *dst = row[i.saturating_sub(rx).min(w - 1)] as f64;
        }
    }
    let mut out = vec![0.0f64; w * h];
    // Tap-major sweep over whole rows: each output still sums its terms in kernel
    // row-major order, matching a per-pixel nested loop bit for bit.
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        for ky in 0..kh {
            let sy = (y + ky).saturating_sub(ry).min(h - 1);
            let prow = &padded[sy * pw..(sy + 1) * pw];
            let krow = &kernel.weights[ky * kw..(ky + 1) * kw];
            match kw {
                3 => accumulate_row::<3>(out_row, prow, krow),
                5 => accumulate_row::<5>(out_row, prow, krow),
                7 => accumulate_row::<7>(out_row, prow, krow),
                _ => {
                    for (kx, &k) in krow.iter().enumerate() {
                        for (dst, &p) in out_row.iter_mut().zip(&prow[kx..kx + w]) {
                            *dst += k * p;
                        }
                    }
                }
            }
        }
    }
    SignedImage::from_raw(w, h, out)
}

/// `out[x] += krow[0] * prow[x] + ... ` with the taps added left to right.
#[inline]
fn accumulate_row<const KW: usize>(out: &mut [f64], prow: &[f64], krow: &[f64]) {
    let k: [f64; KW] = krow.try_into().expect("kernel row width");
    for (x, dst) in out.iter_mut().enumerate() {
        let taps: &[f64; KW] = prow[x..x + KW].try_into().unwrap();
        let mut a = *dst;
        for i in 0..KW {
            a += k[i] * taps[i];
        }
        *dst = a;
    }
}

/// Integer Sobel responses with replicated borders.
///
/// `gx` uses `[-1 0 1; -2 0 2; -1 0 1]`, `gy` its transpose.
pub(crate) fn sobel_raw(img: &GrayImage) -> (Vec<i32>, Vec<i32>) {
    let (w, h) = img.dims();
    let src = img.data();
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h {
        let up = &src[y.saturating_sub(1) * w..][..w];
        let mid = &src[y * w..][..w];
        let down = &src[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            let l = x.saturating_sub(1);
            let r = (x + 1).min(w - 1);
            let (a, b, c) = (up[l] as i32, up[x] as i32, up[r] as i32);
            let (d, f) = (mid[l] as i32, mid[r] as i32);
            let (g, hh, i) = (down[l] as i32, down[x] as i32, down[r] as i32);
            gx[y * w + x] = (c + 2 * f + i) - (a + 2 * d + g);
            gy[y * w + x] = (g + 2 * hh + i) - (a + 2 * b + c);
        }
    }
    (gx, gy)
}

/// Horizontal and vertical Sobel gradients.
pub fn sobel_gradients(img: &GrayImage) -> (SignedImage, SignedImage) {
    let (w, h) = img.dims();
    let (gx, gy) = sobel_raw(img);
    let to_f = |v: Vec<i32>| SignedImage { width: w, height: h, data: v.into_iter().map(f64::from).collect() };
    (to_f(gx), to_f(gy))
}
