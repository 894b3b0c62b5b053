use crate::error::{invalid, shape_err, Result};

/// Planar 8-bit image (`channels × height × width`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image8 {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(invalid!("image dimensions must be positive"));
        }
        if data.len() != width * height * channels {
            return Err(shape_err!(
                "{channels}×{height}×{width} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            ));
        }
        Ok(Image8 {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Image8 {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds a planar image from interleaved (`HWC`) bytes.
    pub fn from_interleaved(width: usize, height: usize, channels: usize, pixels: &[u8]) -> Result<Self> {
        if pixels.len() != width * height * channels {
            return Err(shape_err!(
                "interleaved {channels}×{height}×{width} image needs {} bytes, got {}",
                width * height * channels,
                pixels.len()
            ));
        }
        let mut data = vec![0u8; pixels.len()];
        for (i, px) in pixels.chunks_exact(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * width * height + i] = v;
            }
        }
        Image8::new(width, height, channels, data)
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        let n = self.width * self.height;
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..n {
            for c in 0..self.channels {
                out.push(self.data[c * n + i]);
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Extracts one plane as a single-channel image.
    pub fn channel(&self, c: usize) -> Image8 {
        Image8 {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn to_float(&self, c: usize) -> FloatPlane {
        FloatPlane {
            width: self.width,
            height: self.height,
            data: self.plane(c).iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn same_size(&self, other: &Image8) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Single-channel floating point image used between geometric and
/// photometric steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(shape_err!(
                "{height}×{width} plane with {} values",
                data.len()
            ));
        }
        Ok(FloatPlane {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Clips to `[0, 255]` and rounds half away from zero.
    pub fn quantize(&self) -> Image8 {
        Image8 {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| quantize_u8(v)).collect(),
        }
    }
}

/// Clip to `[0, 255]`, then round half away from zero.
pub fn quantize_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleave_round_trip() {
        let px: Vec<u8> = (0..24).collect();
        let img = Image8::from_interleaved(4, 2, 3, &px).unwrap();
        assert_eq!(img.get(1, 0, 0), 1);
        assert_eq!(img.get(0, 1, 3), 21);
        assert_eq!(img.to_interleaved(), px);
    }

    #[test]
    fn quantize_rounding() {
        assert_eq!(quantize_u8(127.5), 128);
        assert_eq!(quantize_u8(42.5), 43);
        assert_eq!(quantize_u8(42.49), 42);
        assert_eq!(quantize_u8(446.25), 255);
        assert_eq!(quantize_u8(-3.0), 0);
    }
}
