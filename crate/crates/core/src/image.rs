//! Single-channel floating point images and the filtering primitives shared by
//! the flow estimator, the detector and the simulator.

use std::path::Path;

use crate::error::{Error, Result};

/// A grayscale image with samples normalized to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions {
                width,
                height,
                reason: "image must be nonempty".into(),
            });
        }
        if data.len() != width * height {
            return Err(Error::Dimensions {
                width,
                height,
                reason: format!("expected {} samples, got {}", width * height, data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// 8-bit grayscale buffer, row-major.
    pub fn from_luma8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Horizontal mirror: column `x` becomes column `width - 1 - x`.
    pub fn mirrored(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Circular shift so that `out(x, y) = self(x - dx, y - dy)`.
    pub fn shifted_circular(&self, dx: i64, dy: i64) -> Self {
        let (w, h) = (self.width as i64, self.height as i64);
        Self::from_fn(self.width, self.height, |x, y| {
            let sx = (x as i64 - dx).rem_euclid(w) as usize;
            let sy = (y as i64 - dy).rem_euclid(h) as usize;
            self.get(sx, sy)
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers on
    /// integers), clamping to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.data, self.width, self.height, x, y)
    }

    pub fn to_luma8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Loads a PGM/PNG (or any format enabled on the `image` crate) and
    /// converts it to normalized grayscale.
    pub fn load(path: &Path) -> Result<Self> {
        let frame_err = |reason: String| Error::Frame {
            path: path.to_path_buf(),
            reason,
        };
        let decoded = image::open(path).map_err(|e| frame_err(e.to_string()))?;
        let luma = decoded.to_luma8();
        let (w, h) = luma.dimensions();
        Self::from_luma8(w as usize, h as usize, luma.as_raw())
    }

    /// Writes a binary 8-bit PGM (P5).
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.extend(self.to_luma8());
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        use image::ImageEncoder;
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(
                &self.to_luma8(),
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::L8,
            )
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(out)
    }
}

pub(crate) fn bilinear(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    // both are non-negative here, so truncation is floor
    let x0 = x as usize;
    let y0 = y as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let bottom = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Sampled Gaussian on `[-radius, radius]`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Symmetry of a correlation kernel about its center tap.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Parity {
    Even,
    Odd,
    None,
}

fn parity(kernel: &[f64]) -> Parity {
    let n = kernel.len();
    let pairs = (0..n / 2).map(|k| (kernel[k], kernel[n - 1 - k]));
    if pairs.clone().all(|(a, b)| a == b) {
        Parity::Even
    } else if kernel[n / 2] == 0.0 && pairs.into_iter().all(|(a, b)| a == -b) {
        Parity::Odd
    } else {
        Parity::None
    }
}

/// `dst[x] = sum_k kernel[k] * taps[k][x]`. Even and odd kernels are folded
/// so each pair of taps costs one multiply.
#[inline]
fn accumulate(dst: &mut [f64], taps: &[&[f64]], kernel: &[f64], parity: Parity) {
    let n = kernel.len();
    let c = n / 2;
    match parity {
        Parity::Even | Parity::Odd => {
            let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
            let center = kernel[c];
            for (d, s) in dst.iter_mut().zip(taps[c]) {
                *d = center * s;
            }
            for k in 0..c {
                let kv = kernel[n - 1 - k];
                let (lo, hi) = (taps[k], taps[n - 1 - k]);
                for ((d, a), b) in dst.iter_mut().zip(hi).zip(lo) {
                    *d += kv * (a + sign * b);
                }
            }
        }
        Parity::None => {
            dst.fill(0.0);
            for (tap, &kv) in taps.iter().zip(kernel) {
                for (d, s) in dst.iter_mut().zip(*tap) {
                    *d += kv * s;
                }
            }
        }
    }
}

/// Horizontal correlation `out[x] = sum_k kernel[k] * src[x + k - r]` with
/// replicate-edge padding. `kernel.len()` must be odd.
pub(crate) fn correlate_rows(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let par = parity(kernel);
    let mut out = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * r];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        padded[..r].fill(row[0]);
        padded[r..r + w].copy_from_slice(row);
        padded[r + w..].fill(row[w - 1]);
        let taps: Vec<&[f64]> = (0..kernel.len()).map(|k| &padded[k..k + w]).collect();
        accumulate(&mut out[y * w..(y + 1) * w], &taps, kernel, par);
    }
    out
}

/// Vertical counterpart of [`correlate_rows`].
pub(crate) fn correlate_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() as i64 / 2;
    let par = parity(kernel);
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        let taps: Vec<&[f64]> = (0..kernel.len() as i64)
            .map(|k| {
                let sy = (y + k - r).clamp(0, h as i64 - 1) as usize;
                &src[sy * w..(sy + 1) * w]
            })
            .collect();
        accumulate(&mut out[y as usize * w..(y as usize + 1) * w], &taps, kernel, par);
    }
    out
}

pub(crate) fn blur_plane(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    correlate_rows(&correlate_cols(src, w, h, kernel), w, h, kernel)
}

pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let k = gaussian_kernel(sigma, radius);
    Image {
        width: img.width,
        height: img.height,
        data: blur_plane(&img.data, img.width, img.height, &k),
    }
}

/// Resamples with center-aligned bilinear interpolation. When shrinking, the
/// input is first low-passed with a Gaussian of sigma `0.5 * factor` so the
/// result is not aliased.
pub fn resize(img: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!(
            "resize target {width}x{height} must be nonzero"
        )));
    }
    if (width, height) == img.dims() {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let factor = sx.max(sy);
    let src = if factor > 1.0 {
        gaussian_blur(img, 0.5 * factor)
    } else {
        img.clone()
    };
    Ok(Image::from_fn(width, height, |x, y| {
        src.sample_bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
    }))
}
