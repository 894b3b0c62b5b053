use std::path::Path;

use image::{ColorType, GrayImage, ImageFormat, RgbImage};

use crate::error::{PadError, Result};
use crate::models::write_atomic;
use crate::preproc::Image8;

fn image_err(path: &Path, message: impl Into<String>) -> PadError {
    PadError::Image {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| PadError::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|e| image_err(path, e.to_string()))
}

/// Reads an 8-bit single-channel PNG or PGM.
pub fn read_gray(path: &Path) -> Result<Image8> {
    let img = open(path)?;
    if img.color() != ColorType::L8 {
        return Err(image_err(path, format!("expected 8-bit grayscale, found {:?}", img.color())));
    }
    let g = img.into_luma8();
    Image8::new(g.width() as usize, g.height() as usize, 1, g.into_raw())
}

/// Reads an 8-bit RGB image.
pub fn read_rgb(path: &Path) -> Result<Image8> {
    let img = open(path)?;
    if img.color() != ColorType::Rgb8 {
        return Err(image_err(path, format!("expected 8-bit RGB, found {:?}", img.color())));
    }
    let rgb = img.into_rgb8();
    Image8::from_interleaved(rgb.width() as usize, rgb.height() as usize, 3, rgb.as_raw())
}

fn encode(path: &Path, write: impl FnOnce(&mut std::io::Cursor<Vec<u8>>) -> image::ImageResult<()>) -> Result<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    write(&mut buf).map_err(|e| image_err(path, e.to_string()))?;
    write_atomic(path, buf.get_ref())
}

pub fn write_gray(path: &Path, img: &Image8) -> Result<()> {
    if img.channels() != 1 {
        return Err(image_err(path, format!("cannot write {} planes as grayscale", img.channels())));
    }
    let g = GrayImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("buffer size matches");
    encode(path, |buf| g.write_to(buf, ImageFormat::Png))
}

pub fn write_rgb(path: &Path, img: &Image8) -> Result<()> {
    if img.channels() != 3 {
        return Err(image_err(path, format!("cannot write {} planes as RGB", img.channels())));
    }
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_interleaved())
        .expect("buffer size matches");
    encode(path, |buf| rgb.write_to(buf, ImageFormat::Png))
}
