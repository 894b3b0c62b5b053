use super::image::{quantize_u8, Image8};
use crate::error::{invalid, shape_err, Result};
use crate::tensorcore::TensorND;

/// Side length of the stacked face images fed to the autoencoders.
pub const FACE_SIZE: usize = 128;
/// Spacing between neighbouring patches for the 9- and 16-region schemes.
pub const PATCH_STRIDE: usize = 32;

/// BT.601 luma, rounded half away from zero.
pub fn to_grayscale(rgb: &Image8) -> Result<Image8> {
    if rgb.channels() != 3 {
        return Err(invalid!(
            "grayscale conversion needs 3 planes, got {}",
            rgb.channels()
        ));
    }
    let (r, g, b) = (rgb.plane(0), rgb.plane(1), rgb.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            quantize_u8(0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
        })
        .collect();
    Image8::new(rgb.width(), rgb.height(), 1, data)
}

/// A 128×128 three-plane face crop. In multi-channel mode the planes are
/// BW, NIR and depth, in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McFaceImage {
    pub image: Image8,
    pub sample_id: String,
    pub frame: usize,
}

impl McFaceImage {
    pub fn new(image: Image8, sample_id: impl Into<String>, frame: usize) -> Result<Self> {
        if image.width() != FACE_SIZE || image.height() != FACE_SIZE || image.channels() != 3 {
            return Err(shape_err!(
                "face image must be 3×{FACE_SIZE}×{FACE_SIZE}, got {}×{}×{}",
                image.channels(),
                image.height(),
                image.width()
            ));
        }
        Ok(McFaceImage {
            image,
            sample_id: sample_id.into(),
            frame,
        })
    }

    pub fn unstack(&self) -> (Image8, Image8, Image8) {
        (self.image.channel(0), self.image.channel(1), self.image.channel(2))
    }
}

/// Stacks three single-plane images in argument order.
pub fn stack_channels(a: &Image8, b: &Image8, c: &Image8) -> Result<Image8> {
    for p in [a, b, c] {
        if p.channels() != 1 {
            return Err(shape_err!("stacking expects single planes, got {} channels", p.channels()));
        }
    }
    if !a.same_size(b) || !a.same_size(c) {
        return Err(shape_err!(
            "plane sizes differ: {}×{}, {}×{}, {}×{}",
            a.width(),
            a.height(),
            b.width(),
            b.height(),
            c.width(),
            c.height()
        ));
    }
    let mut data = Vec::with_capacity(a.data().len() * 3);
    for p in [a, b, c] {
        data.extend_from_slice(p.data());
    }
    Image8::new(a.width(), a.height(), 3, data)
}

/// Facial regioning scheme: whole face, 3×3 blocks of 64, or 4×4 blocks of 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Regions(usize);

impl Regions {
    pub const WHOLE: Regions = Regions(1);
    pub const NINE: Regions = Regions(9);
    pub const SIXTEEN: Regions = Regions(16);

    pub fn new(n: usize) -> Result<Self> {
        match n {
            1 | 9 | 16 => Ok(Regions(n)),
            other => Err(invalid!("unsupported region count {other}, expected 1, 9 or 16")),
        }
    }

    pub fn count(self) -> usize {
        self.0
    }

    pub fn patch_size(self) -> usize {
        match self.0 {
            1 => FACE_SIZE,
            9 => 64,
            _ => 32,
        }
    }

    pub fn per_side(self) -> usize {
        if self.0 == 1 {
            1
        } else {
            (FACE_SIZE - self.patch_size()) / PATCH_STRIDE + 1
        }
    }

    /// Top-left corners `(row, col)` in row-major order.
    pub fn origins(self) -> Vec<(usize, usize)> {
        let n = self.per_side();
        (0..n)
            .flat_map(|r| (0..n).map(move |c| (r * PATCH_STRIDE, c * PATCH_STRIDE)))
            .collect()
    }
}

impl TryFrom<usize> for Regions {
    type Error = crate::PadError;
    fn try_from(n: usize) -> Result<Self> {
        Regions::new(n)
    }
}

impl From<Regions> for usize {
    fn from(r: Regions) -> usize {
        r.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub image: Image8,
}

impl Patch {
    /// `[3, p, p]` tensor scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> TensorND {
        image_to_tensor(&self.image)
    }
}

pub fn image_to_tensor(image: &Image8) -> TensorND {
    TensorND::new(
        vec![image.channels(), image.height(), image.width()],
        image.data().iter().map(|&v| f64::from(v) / 255.0).collect(),
    )
    .expect("image dimensions are positive")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub regions: Regions,
    pub patches: Vec<Patch>,
}

impl PatchGrid {
    pub fn patch_size(&self) -> usize {
        self.regions.patch_size()
    }
}

pub fn extract_patches(face: &Image8, regions: Regions) -> Result<PatchGrid> {
    if face.width() != FACE_SIZE || face.height() != FACE_SIZE {
        return Err(shape_err!(
            "patch extraction expects a {FACE_SIZE}×{FACE_SIZE} face, got {}×{}",
            face.width(),
            face.height()
        ));
    }
    let p = regions.patch_size();
    let c = face.channels();
    let patches = regions
        .origins()
        .into_iter()
        .map(|(row, col)| {
            let mut data = Vec::with_capacity(c * p * p);
            for ch in 0..c {
                let plane = face.plane(ch);
                for y in row..row + p {
                    data.extend_from_slice(&plane[y * FACE_SIZE + col..y * FACE_SIZE + col + p]);
                }
            }
            Patch {
                row,
                col,
                image: Image8::new(p, p, c, data).expect("patch dims"),
            }
        })
        .collect();
    Ok(PatchGrid { regions, patches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(r: u8, g: u8, b: u8) -> Image8 {
        Image8::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn grayscale_values() {
        assert_eq!(to_grayscale(&rgb(0, 0, 0)).unwrap().data(), &[0]);
        assert_eq!(to_grayscale(&rgb(255, 255, 255)).unwrap().data(), &[255]);
        assert_eq!(to_grayscale(&rgb(255, 0, 0)).unwrap().data(), &[76]);
        assert_eq!(to_grayscale(&rgb(0, 255, 0)).unwrap().data(), &[150]);
        assert!(to_grayscale(&Image8::filled(2, 2, 1, 0)).is_err());
    }

    #[test]
    fn stacking_keeps_argument_order() {
        let planes: Vec<_> = [10u8, 20, 30].iter().map(|&v| Image8::filled(4, 4, 1, v)).collect();
        let s = stack_channels(&planes[0], &planes[1], &planes[2]).unwrap();
        for (c, v) in [10u8, 20, 30].iter().enumerate() {
            assert!(s.plane(c).iter().all(|x| x == v));
        }
        let bad = Image8::filled(3, 4, 1, 0);
        assert!(stack_channels(&planes[0], &bad, &planes[2]).is_err());
    }

    #[test]
    fn unstack_round_trip() {
        let mk = |seed: u8| {
            Image8::new(128, 128, 1, (0..128 * 128).map(|i| (i as u8).wrapping_mul(seed)).collect()).unwrap()
        };
        let (a, b, c) = (mk(3), mk(7), mk(11));
        let face = McFaceImage::new(stack_channels(&a, &b, &c).unwrap(), "s", 0).unwrap();
        assert_eq!(face.unstack(), (a, b, c));
    }

    #[test]
    fn region_geometry() {
        assert!(Regions::new(4).is_err());
        for (n, p) in [(1, 128), (9, 64), (16, 32)] {
            let r = Regions::new(n).unwrap();
            assert_eq!(r.patch_size(), p);
            assert_eq!(r.origins().len(), n);
        }
        assert_eq!(((128 - 32) / 32 + 1) * ((128 - 32) / 32 + 1), 16);
    }

    #[test]
    fn nine_patches_row_major() {
        let face = Image8::new(
            128,
            128,
            3,
            (0..3 * 128 * 128).map(|i| (i % 256) as u8).collect(),
        )
        .unwrap();
        let grid = extract_patches(&face, Regions::NINE).unwrap();
        assert_eq!(grid.patches.len(), 9);
        assert_eq!((grid.patches[0].row, grid.patches[0].col), (0, 0));
        assert_eq!((grid.patches[1].row, grid.patches[1].col), (0, 32));
        assert_eq!((grid.patches[3].row, grid.patches[3].col), (32, 0));
        let p = &grid.patches[0].image;
        for c in 0..3 {
            for y in 0..64 {
                for x in 0..64 {
                    assert_eq!(p.get(c, y, x), face.get(c, y, x));
                }
            }
        }
        let whole = extract_patches(&face, Regions::WHOLE).unwrap();
        assert_eq!(whole.patches[0].image, face);
    }
}
