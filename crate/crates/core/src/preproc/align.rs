use serde::{Deserialize, Serialize};

use super::image::FloatPlane;
use crate::error::{invalid, Result};

/// Row of both eyes in the aligned crop, as a fraction of its size.
pub const EYE_ROW: f64 = 0.35;
/// Column of the image-left eye in the aligned crop.
pub const LEFT_EYE_COL: f64 = 0.3125;
/// Column of the image-right eye in the aligned crop.
pub const RIGHT_EYE_COL: f64 = 0.6875;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Eye centres in pixel coordinates. `left` is the eye that appears on the
/// left side of an upright frontal image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePair {
    pub left: Point,
    pub right: Point,
}

impl EyePair {
    pub fn new(left: (f64, f64), right: (f64, f64)) -> Self {
        EyePair {
            left: Point::new(left.0, left.1),
            right: Point::new(right.0, right.1),
        }
    }

    pub fn distance(&self) -> f64 {
        (self.right.x - self.left.x).hypot(self.right.y - self.left.y)
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        [self.left, self.right].iter().all(|p| {
            p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64
        })
    }

    /// Side of the square face box implied by the eye distance and the crop
    /// geometry (the eyes span `RIGHT_EYE_COL - LEFT_EYE_COL` of the box).
    pub fn face_box_size(&self) -> f64 {
        self.distance() / (RIGHT_EYE_COL - LEFT_EYE_COL)
    }
}

fn bilinear(plane: &FloatPlane, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let sample = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= plane.width as f64 || yi >= plane.height as f64 {
            0.0
        } else {
            plane.get(xi as usize, yi as usize)
        }
    };
    let mut acc = 0.0;
    for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
        for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
            let w = wx * wy;
            if w != 0.0 {
                acc += w * sample(x0 + dx, y0 + dy);
            }
        }
    }
    acc
}

/// Rotates about the eye midpoint so the eye line is horizontal, scales so
/// the eye distance becomes `0.375·out_size`, and crops `out_size²` with the
/// eyes at the fixed anchor positions. Source pixels outside the image read 0.
pub fn align_face(plane: &FloatPlane, eyes: &EyePair, out_size: usize) -> Result<FloatPlane> {
    if out_size == 0 {
        return Err(invalid!("output size must be positive"));
    }
    let dx = eyes.right.x - eyes.left.x;
    let dy = eyes.right.y - eyes.left.y;
    let dist = dx.hypot(dy);
    if !(dist > 0.0) {
        return Err(invalid!("eye landmarks coincide"));
    }
    if !eyes.inside(plane.width, plane.height) {
        return Err(invalid!(
            "eye landmarks {eyes:?} outside {}×{} image",
            plane.width,
            plane.height
        ));
    }
    let size = out_size as f64;
    let target_dist = (RIGHT_EYE_COL - LEFT_EYE_COL) * size;
    let scale = dist / target_dist;
    let (sin, cos) = dy.atan2(dx).sin_cos();
    let mid_src = ((eyes.left.x + eyes.right.x) / 2.0, (eyes.left.y + eyes.right.y) / 2.0);
    let mid_dst = ((LEFT_EYE_COL + RIGHT_EYE_COL) / 2.0 * size, EYE_ROW * size);

    let mut data = Vec::with_capacity(out_size * out_size);
    for v in 0..out_size {
        for u in 0..out_size {
            let ox = (u as f64 - mid_dst.0) * scale;
            let oy = (v as f64 - mid_dst.1) * scale;
            let sx = mid_src.0 + cos * ox - sin * oy;
            let sy = mid_src.1 + sin * ox + cos * oy;
            data.push(bilinear(plane, sx, sy));
        }
    }
    FloatPlane::new(out_size, out_size, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preproc::image::Image8;

    fn marker(size: usize) -> FloatPlane {
        // Distinct value per pixel so any permutation is visible.
        let data = (0..size * size).map(|i| (i % 251) as f64 + 1.0).collect();
        FloatPlane::new(size, size, data).unwrap()
    }

    fn target_eyes(size: usize) -> EyePair {
        let s = size as f64;
        EyePair::new((LEFT_EYE_COL * s, EYE_ROW * s), (RIGHT_EYE_COL * s, EYE_ROW * s))
    }

    #[test]
    fn identity_when_eyes_on_target() {
        let img = marker(64);
        let out = align_face(&img, &target_eyes(64), 64).unwrap();
        for (a, b) in out.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(out.quantize(), img.quantize());
    }

    #[test]
    fn central_crop_of_larger_image() {
        let img = marker(80);
        let mut eyes = target_eyes(64);
        eyes.left.x += 8.0;
        eyes.right.x += 8.0;
        eyes.left.y += 8.0;
        eyes.right.y += 8.0;
        let out = align_face(&img, &eyes, 64).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                assert!((out.get(x, y) - img.get(x + 8, y + 8)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn swapped_eyes_rotate_half_turn() {
        let img = marker(64);
        let eyes = target_eyes(64);
        let swapped = EyePair {
            left: eyes.right,
            right: eyes.left,
        };
        let a = align_face(&img, &eyes, 80).unwrap().quantize();
        let b = align_face(&img, &swapped, 80).unwrap().quantize();
        // Rotation by π about the eye midpoint maps (u, v) to (2m_u - u, 2m_v - v).
        let (mu, mv) = (40.0, 28.0);
        let mut compared = 0;
        for v in 0..80 {
            for u in 0..80 {
                let (ru, rv) = (2.0 * mu - u as f64, 2.0 * mv - v as f64);
                if ru >= 0.0 && rv >= 0.0 && ru < 80.0 && rv < 80.0 {
                    let lhs = b.get(0, v, u) as i32;
                    let rhs = a.get(0, rv as usize, ru as usize) as i32;
                    assert!((lhs - rhs).abs() <= 1, "({u},{v}) {lhs} vs {rhs}");
                    compared += 1;
                }
            }
        }
        assert!(compared > 100);
    }

    #[test]
    fn rotation_levels_eye_line() {
        // A bright dot at each eye of a tilted face ends up on the anchors.
        let mut data = vec![0.0; 100 * 100];
        let eyes = EyePair::new((30.0, 40.0), (60.0, 55.0));
        for p in [eyes.left, eyes.right] {
            data[p.y as usize * 100 + p.x as usize] = 255.0;
        }
        let img = FloatPlane::new(100, 100, data).unwrap();
        let out = align_face(&img, &eyes, 80).unwrap();
        let s = 80.0;
        let l = out.get((LEFT_EYE_COL * s) as usize, (EYE_ROW * s) as usize);
        let r = out.get((RIGHT_EYE_COL * s) as usize, (EYE_ROW * s) as usize);
        assert!(l > 250.0 && r > 250.0, "{l} {r}");
    }

    #[test]
    fn coincident_eyes_rejected() {
        let img = marker(16);
        let eyes = EyePair::new((5.0, 5.0), (5.0, 5.0));
        assert!(align_face(&img, &eyes, 16).is_err());
        let outside = EyePair::new((5.0, 5.0), (50.0, 5.0));
        assert!(align_face(&img, &outside, 16).is_err());
    }

    #[test]
    fn output_in_range() {
        let img = Image8::filled(40, 40, 1, 255).to_float(0);
        let eyes = EyePair::new((10.0, 12.0), (28.0, 9.0));
        let out = align_face(&img, &eyes, 32).unwrap();
        assert!(out.data.iter().all(|&v| (0.0..=255.0 + 1e-9).contains(&v)));
    }
}
