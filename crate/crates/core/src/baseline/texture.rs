use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::preproc::Image8;

/// Slack for comparisons against bilinearly interpolated samples, so codes do
/// not depend on floating-point rounding.
const CMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeType {
    Lbp,
    Mct,
}

/// Concatenated per-cell 256-bin code histograms, each normalized to sum 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFeature {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub code: CodeType,
}

/// Offsets of the 8 samples on the unit circle, counter-clockwise from the
/// right neighbour (image rows grow downwards).
const OFFSETS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (0.0, -1.0),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (0.0, 1.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
];

fn sample(img: &Image8, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p = |yy, xx| f64::from(img.get(0, yy, xx));
    // Difference form keeps constant neighbourhoods exact.
    let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
    let bot = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
    top + fy * (bot - top)
}

fn neighbours(img: &Image8, x: usize, y: usize) -> [f64; 8] {
    OFFSETS.map(|(dx, dy)| sample(img, x as f64 + dx, y as f64 + dy))
}

/// LBP_{8,1} code: bit `k` set when neighbour `k` is at least the centre.
pub fn lbp_code(img: &Image8, x: usize, y: usize) -> u8 {
    let c = f64::from(img.get(0, y, x));
    neighbours(img, x, y)
        .iter()
        .enumerate()
        .fold(0u8, |code, (k, &n)| if n >= c - CMP_EPS { code | (1 << k) } else { code })
}

/// MCT_{8,1} code: bit `k` set when neighbour `k` exceeds the mean of the
/// centre and its 8 neighbours.
pub fn mct_code(img: &Image8, x: usize, y: usize) -> u8 {
    let c = f64::from(img.get(0, y, x));
    let n = neighbours(img, x, y);
    let mean = (c + n.iter().sum::<f64>()) / 9.0;
    n.iter()
        .enumerate()
        .fold(0u8, |code, (k, &v)| if v > mean + CMP_EPS { code | (1 << k) } else { code })
}

fn histogram(img: &Image8, rows: usize, cols: usize, code: CodeType) -> Result<HistogramFeature> {
    if img.channels() != 1 {
        return Err(invalid!("texture codes need one plane, got {}", img.channels()));
    }
    if rows == 0 || cols == 0 {
        return Err(invalid!("degenerate {rows}×{cols} grid"));
    }
    let (w, h) = (img.width(), img.height());
    if h / rows < 3 || w / cols < 3 {
        return Err(invalid!("{w}×{h} image too small for a {rows}×{cols} grid"));
    }
    let mut values = vec![0.0; rows * cols * 256];
    let mut counts = vec![0usize; rows * cols];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let cell = (y * rows / h) * cols + x * cols / w;
            let c = match code {
                CodeType::Lbp => lbp_code(img, x, y),
                CodeType::Mct => mct_code(img, x, y),
            };
            values[cell * 256 + c as usize] += 1.0;
            counts[cell] += 1;
        }
    }
    for (cell, &n) in counts.iter().enumerate() {
        if n > 0 {
            values[cell * 256..(cell + 1) * 256].iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    Ok(HistogramFeature { values, rows, cols, code })
}

pub fn lbp_histogram(img: &Image8, rows: usize, cols: usize) -> Result<HistogramFeature> {
    histogram(img, rows, cols, CodeType::Lbp)
}

pub fn mct_histogram(img: &Image8, rows: usize, cols: usize) -> Result<HistogramFeature> {
    histogram(img, rows, cols, CodeType::Mct)
}
