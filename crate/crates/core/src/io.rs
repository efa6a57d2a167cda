//! PNG and binary PGM (P5) reading and writing.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Integer BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)`.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    // Weights scaled by 1000 keep the rounding exact.
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let unreadable = |reason: String| Error::UnreadableImage { path: path.to_path_buf(), reason };
    let decoded = image::open(path).map_err(|e| unreadable(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            decoded.to_luma8().into_raw()
        }
        other => other.to_rgb8().pixels().map(|p| luma(p[0], p[1], p[2])).collect(),
    };
    GrayImage::from_raw(w, h, data).map_err(|e| unreadable(e.to_string()))
}

/// Writes PNG or binary PGM depending on the extension (`.pgm` selects PGM).
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    if format == ImageFormat::Pnm {
        // The pnm encoder picks P5 for Luma8 but writes through its own header logic;
        // writing the header by hand keeps the output byte-stable.
        let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        bytes.extend_from_slice(img.data());
        return std::fs::write(path, bytes)
            .map_err(|e| Error::Write { path: path.to_path_buf(), reason: e.to_string() });
    }
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::L8,
        format,
    )
    .map_err(|e| Error::Write { path: path.to_path_buf(), reason: e.to_string() })
}
