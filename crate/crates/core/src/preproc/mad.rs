//! Robust dynamic-range normalization for NIR and depth planes.
//!
//! Statistics are taken over the non-zero support `v` of the plane:
//! `MAD = median(|v - median(v)|)`, then every pixel is mapped through
//! `(I - median(v) + σ·MAD) / (2·σ·MAD) · 255`, i.e. the band
//! `median(v) ± σ·MAD` is stretched onto `[0, 255]`.

use serde::{Deserialize, Serialize};

use super::image::{quantize_u8, FloatPlane, Image8};
use crate::error::{invalid, Result};

/// Default σ for the NIR channel.
pub const SIGMA_NIR: f64 = 3.0;
/// Default σ for the depth channel.
pub const SIGMA_DEPTH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MadStats {
    pub median_v: f64,
    pub mad: f64,
    pub sigma: f64,
}

/// Median with the even-length convention of averaging the middle pair.
/// Sorts `values` in place.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Median and MAD of the non-zero pixels. `sigma` is carried through as given.
pub fn mad_stats(plane: &FloatPlane, sigma: f64) -> Result<MadStats> {
    if !(sigma > 0.0) {
        return Err(invalid!("sigma must be positive, got {sigma}"));
    }
    let mut v: Vec<f64> = plane.data.iter().copied().filter(|&x| x != 0.0).collect();
    let median_v = median(&mut v).ok_or_else(|| invalid!("empty non-zero support"))?;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - median_v).abs()).collect();
    let mad = median(&mut dev).expect("non-empty");
    Ok(MadStats {
        median_v,
        mad,
        sigma,
    })
}

/// Normalized values before clipping and quantization. A zero MAD is
/// replaced by 1.
pub fn mad_normalize_values(plane: &FloatPlane, sigma: f64) -> Result<(Vec<f64>, MadStats)> {
    let stats = mad_stats(plane, sigma)?;
    let mad = if stats.mad == 0.0 { 1.0 } else { stats.mad };
    let band = sigma * mad;
    let values = plane
        .data
        .iter()
        .map(|&i| (i - stats.median_v + band) / (2.0 * band) * 255.0)
        .collect();
    Ok((values, stats))
}

/// Normalizes and casts to 8 bits (clip to `[0, 255]`, round half away from zero).
pub fn mad_normalize(plane: &FloatPlane, sigma: f64) -> Result<Image8> {
    let (values, _) = mad_normalize_values(plane, sigma)?;
    let data = values.into_iter().map(quantize_u8).collect();
    Image8::new(plane.width, plane.height, 1, data)
}
