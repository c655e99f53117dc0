//! 16-bit grayscale PNG helpers: instance label images, scaled depth or
//! disparity maps, and confidence maps.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn write_label_png(path: &Path, labels: &Grid<u16>) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(
        labels.width() as u32,
        labels.height() as u32,
        |x, y| Luma([labels.at(x as usize, y as usize)]),
    );
    img.save(path)?;
    Ok(())
}

pub fn read_label_png(path: &Path) -> Result<Grid<u16>> {
    let img = image::open(path)?;
    let img = match img {
        DynamicImage::ImageLuma16(img) => img,
        DynamicImage::ImageLuma8(img) => {
            // Tolerate 8-bit label images; ids stay as-is.
            ImageBuffer::from_fn(img.width(), img.height(), |x, y| {
                Luma([img.get_pixel(x, y)[0] as u16])
            })
        }
        other => {
            return Err(Error::Input(format!(
                "label png must be single-channel gray (got {:?})",
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = Grid::filled(w, h, 0u16);
    for (x, y, p) in img.enumerate_pixels() {
        grid.set(x as usize, y as usize, p[0]);
    }
    Ok(grid)
}

/// Write a float grid as a 16-bit PNG with `scale` units per count
/// (e.g. meters per count for depth). Values are rounded to the nearest
/// count and clamped to the u16 range.
pub fn write_scaled_png(path: &Path, grid: &Grid<f32>, scale: f64) -> Result<()> {
    if scale <= 0.0 {
        return Err(Error::Input("png scale must be positive".into()));
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
            let v = grid.at(x as usize, y as usize) as f64 / scale;
            Luma([v.round().clamp(0.0, u16::MAX as f64) as u16])
        });
    img.save(path)?;
    Ok(())
}

/// Read a 16-bit PNG written with [`write_scaled_png`]; counts multiply
/// back by `scale`.
pub fn read_scaled_png(path: &Path, scale: f64) -> Result<Grid<f32>> {
    if scale <= 0.0 {
        return Err(Error::Input("png scale must be positive".into()));
    }
    let labels = read_label_png(path)?;
    Ok(labels.map(|&v| (v as f64 * scale) as f32))
}

/// Read a confidence map: 16-bit gray normalized to [0, 1].
pub fn read_confidence_png(path: &Path) -> Result<Grid<f32>> {
    let raw = read_label_png(path)?;
    Ok(raw.map(|&v| v as f32 / u16::MAX as f32))
}
