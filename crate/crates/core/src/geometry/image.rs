use nalgebra::Vector2;

use super::GeometryError;

/// Something that yields an intensity and its spatial gradient at a
/// sub-pixel location. Implemented by [`GrayImage`] (bilinear) and by the
/// analytic scene renderer used for verification.
pub trait ImageSampler: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// `None` when `u` is outside the region where the sampler is defined.
    fn sample(&self, u: &Vector2<f64>) -> Option<(f64, Vector2<f64>)>;
}

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if data.len() != width * height {
            return Err(GeometryError::InvalidImage(format!(
                "{} values for a {}x{} image",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(GeometryError::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("constant image")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    /// Converts 8-bit intensities to `[0, 1]`.
    pub fn from_luma8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, GeometryError> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    pub fn to_luma8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
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

    /// Bilinear intensity plus bilinearly interpolated central-difference
    /// gradient. Defined on `[1, width-2] × [1, height-2]`.
    pub fn sample_bilinear(&self, u: &Vector2<f64>) -> Result<(f64, Vector2<f64>), GeometryError> {
        let (w, h) = (self.width, self.height);
        let (x, y) = (u.x, u.y);
        if w < 4 || h < 4 || !(x >= 1.0 && y >= 1.0 && x <= (w - 2) as f64 && y <= (h - 2) as f64) {
            return Err(GeometryError::OutOfBounds(x, y));
        }
        // x0 ≤ w-3 keeps the right neighbour's central difference in range
        let x0 = (x.floor() as usize).min(w - 3);
        let y0 = (y.floor() as usize).min(h - 3);
        let tx = x - x0 as f64;
        let ty = y - y0 as f64;

        let d = &self.data;
        let i00 = y0 * w + x0;
        let i10 = i00 + 1;
        let i01 = i00 + w;
        let i11 = i01 + 1;

        let w00 = (1.0 - tx) * (1.0 - ty);
        let w10 = tx * (1.0 - ty);
        let w01 = (1.0 - tx) * ty;
        let w11 = tx * ty;

        let value = w00 * d[i00] + w10 * d[i10] + w01 * d[i01] + w11 * d[i11];

        let gx = |i: usize| 0.5 * (d[i + 1] - d[i - 1]);
        let gy = |i: usize| 0.5 * (d[i + w] - d[i - w]);
        let grad = Vector2::new(
            w00 * gx(i00) + w10 * gx(i10) + w01 * gx(i01) + w11 * gx(i11),
            w00 * gy(i00) + w10 * gy(i10) + w01 * gy(i01) + w11 * gy(i11),
        );
        Ok((value, grad))
    }
}

impl ImageSampler for GrayImage {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn sample(&self, u: &Vector2<f64>) -> Option<(f64, Vector2<f64>)> {
        self.sample_bilinear(u).ok()
    }
}
