use crate::error::{invalid, Result};
use crate::preproc::Image8;

pub const IQM_DIM: usize = 8;
/// PSNR reported when the image equals its blurred reference.
pub const PSNR_CAP: f64 = 100.0;
const BLUR_SIGMA: f64 = 1.5;
const BLUR_RADIUS: isize = 2;

struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }
}

fn gaussian_kernel() -> Vec<f64> {
    let k: Vec<f64> = (-BLUR_RADIUS..=BLUR_RADIUS)
        .map(|i| (-(i * i) as f64 / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// 5×5 Gaussian blur with replicated borders.
fn blur(p: &Plane) -> Vec<f64> {
    let k = gaussian_kernel();
    let mut out = Vec::with_capacity(p.data.len());
    for y in 0..p.h as isize {
        for x in 0..p.w as isize {
            let c = p.at(x, y);
            // Accumulating differences keeps constant regions exact.
            let mut acc = 0.0;
            for (j, ky) in k.iter().enumerate() {
                for (i, kx) in k.iter().enumerate() {
                    let v = p.at(x + i as isize - BLUR_RADIUS, y + j as isize - BLUR_RADIUS);
                    acc += ky * kx * (v - c);
                }
            }
            out.push(c + acc);
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// `[mean, std, Laplacian variance, blur MSE, blur PSNR, blur MAE,
/// mean gradient magnitude, histogram entropy]` of the BT.601 luma plane.
pub fn iqm_features(rgb: &Image8) -> Result<[f64; IQM_DIM]> {
    if rgb.channels() != 3 {
        return Err(invalid!("quality measures need 3 planes, got {}", rgb.channels()));
    }
    let (w, h) = (rgb.width(), rgb.height());
    let (r, g, b) = (rgb.plane(0), rgb.plane(1), rgb.plane(2));
    let data: Vec<f64> = (0..w * h)
        .map(|i| 0.299 * f64::from(r[i]) + 0.587 * f64::from(g[i]) + 0.114 * f64::from(b[i]))
        .collect();
    let p = Plane { w, h, data };

    let m = mean(&p.data);
    let std = variance(&p.data).sqrt();

    let mut lap = Vec::new();
    let mut grad = Vec::new();
    for y in 1..h.saturating_sub(1) as isize {
        for x in 1..w.saturating_sub(1) as isize {
            let c = p.at(x, y);
            lap.push(p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y - 1) + p.at(x, y + 1) - 4.0 * c);
            let gx = (p.at(x + 1, y) - p.at(x - 1, y)) / 2.0;
            let gy = (p.at(x, y + 1) - p.at(x, y - 1)) / 2.0;
            grad.push(gx.hypot(gy));
        }
    }
    let sharpness = if lap.is_empty() { 0.0 } else { variance(&lap) };
    let grad_mean = if grad.is_empty() { 0.0 } else { mean(&grad) };

    let blurred = blur(&p);
    let diffs: Vec<f64> = p.data.iter().zip(&blurred).map(|(a, b)| a - b).collect();
    let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
    let mae = diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64;
    let psnr = if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP)
    };

    let mut hist = [0usize; 256];
    for &v in &p.data {
        hist[v.round().clamp(0.0, 255.0) as usize] += 1;
    }
    let n = p.data.len() as f64;
    let entropy = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum::<f64>()
        .max(0.0);

    Ok([m, std, sharpness, mse, psnr, mae, grad_mean, entropy])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image() {
        let f = iqm_features(&Image8::filled(32, 32, 3, 90)).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 0.0);
        assert_eq!(f[4], PSNR_CAP);
        assert_eq!(f[7], 0.0);
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel();
        assert_eq!(k.len(), 5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k[2] > k[1] && k[1] > k[0]);
    }

    #[test]
    fn wrong_plane_count() {
        assert!(iqm_features(&Image8::filled(8, 8, 1, 0)).is_err());
    }
}
