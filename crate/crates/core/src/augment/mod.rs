//! Nonlinear image augmentations that inject dependent noise.
//!
//! Images are square and grayscale with values in [0, 1]. Pixel `(x, y)`
//! means row `x`, column `y`.

mod catmap;
mod ode;
pub mod pgm;

pub use catmap::{cat_map, cat_map_inverse, smooth_cat_map, smooth_cat_target, smooth_mod};
pub use ode::{lv_flow, LvParams};

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Row-major pixels of an n x n image.
    pub fn new(n: usize, pixels: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("image side {n} must be at least 2")));
        }
        if pixels.len() != n * n {
            return Err(Error::DimensionMismatch(format!("{} pixels for a {n}x{n} image", pixels.len())));
        }
        if let Some(k) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k / n, col: k % n });
        }
        Ok(Self { n, pixels })
    }

    /// Panics when `n < 2`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 2, "image side must be at least 2");
        let pixels = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self { n, pixels }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[x * self.n + y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[x * self.n + y] = v;
    }

    /// Bilinear sample at fractional pixel coordinates, clamped to the edges.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let top = (self.n - 1) as f64;
        let x = x.clamp(0.0, top);
        let y = y.clamp(0.0, top);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.n - 1), (y0 + 1).min(self.n - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let a = self.get(x0, y0) * (1.0 - fy) + self.get(x0, y1) * fy;
        let b = self.get(x1, y0) * (1.0 - fy) + self.get(x1, y1) * fy;
        a * (1.0 - fx) + b * fx
    }

    /// Mean over the 3 x 3 neighborhood that lies inside the image.
    pub fn local_mean(&self, x: usize, y: usize) -> f64 {
        let (mut sum, mut count) = (0.0, 0.0);
        for xi in x.saturating_sub(1)..=(x + 1).min(self.n - 1) {
            for yi in y.saturating_sub(1)..=(y + 1).min(self.n - 1) {
                sum += self.get(xi, yi);
                count += 1.0;
            }
        }
        sum / count
    }

    fn clamped(mut self) -> Self {
        for v in &mut self.pixels {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

/// What the Lotka-Volterra flow acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LvMode {
    /// Each pixel's (intensity, local mean) pair; the new intensity is the flowed first component.
    #[default]
    Values,
    /// Normalized pixel coordinates; the image is resampled at the flowed position.
    Coordinates,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentKind {
    LotkaVolterra { params: LvParams, mode: LvMode },
    CatMap { iterations: usize },
    SmoothCatMap { m: f64, iterations: usize },
    GaussianNoise { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    /// Share of a batch that is augmented.
    pub fraction: f64,
    /// Extra Gaussian noise added after the map.
    pub noise_sigma: f64,
}

impl AugmentSpec {
    pub fn new(kind: AugmentKind) -> Self {
        Self { kind, fraction: 1.0, noise_sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::InvalidInput(format!("fraction {} outside [0, 1]", self.fraction)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise sigma {} must be nonnegative", self.noise_sigma)));
        }
        match &self.kind {
            AugmentKind::LotkaVolterra { params, .. } => params.validate(),
            AugmentKind::CatMap { .. } => Ok(()),
            AugmentKind::SmoothCatMap { m, .. } => {
                if *m > 0.0 && *m <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("smoothing degree m = {m} outside (0, 1]")))
                }
            }
            AugmentKind::GaussianNoise { sigma } => {
                if *sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("noise sigma {sigma} must be nonnegative")))
                }
            }
        }
    }
}

fn lv_values(img: &Image, params: &LvParams) -> Result<Image> {
    let n = img.size();
    let mut out = img.clone();
    for x in 0..n {
        for y in 0..n {
            let v = match lv_flow(img.get(x, y), img.local_mean(x, y), params) {
                Ok((v, _)) => v,
                Err(Error::Overflow(v)) => v,
                Err(e) => return Err(e),
            };
            out.set(x, y, v.clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

fn lv_coordinates(img: &Image, params: &LvParams) -> Result<Image> {
    let n = img.size();
    let scale = n as f64;
    let mut out = img.clone();
    for x in 0..n {
        for y in 0..n {
            let (tx, ty) = match lv_flow(x as f64 / scale, y as f64 / scale, params) {
                Ok(t) => t,
                Err(Error::Overflow(_)) => (f64::MAX, f64::MAX),
                Err(e) => return Err(e),
            };
            out.set(x, y, img.bilinear(tx * scale, ty * scale));
        }
    }
    Ok(out)
}

fn add_noise(img: &mut Image, sigma: f64, seed: u64) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut r = rng::stream(seed, &[]);
    for v in &mut img.pixels {
        *v += normal.sample(&mut r);
    }
    Ok(())
}

/// Applies the map and any configured noise to one image, clamping to [0, 1].
pub fn augment_image(img: &Image, spec: &AugmentSpec, seed: u64) -> Result<Image> {
    spec.validate()?;
    let mut out = match &spec.kind {
        AugmentKind::LotkaVolterra { params, mode: LvMode::Values } => lv_values(img, params)?,
        AugmentKind::LotkaVolterra { params, mode: LvMode::Coordinates } => lv_coordinates(img, params)?,
        AugmentKind::CatMap { iterations } => cat_map(img, *iterations),
        AugmentKind::SmoothCatMap { m, iterations } => smooth_cat_map(img, *m, *iterations),
        AugmentKind::GaussianNoise { sigma } => {
            let mut out = img.clone();
            add_noise(&mut out, *sigma, rng::derive_seed(seed, &[0]))?;
            out
        }
    };
    add_noise(&mut out, spec.noise_sigma, rng::derive_seed(seed, &[1]))?;
    Ok(out.clamped())
}

/// Sorted indices of the `floor(fraction * count)` images picked for augmentation.
pub fn select_for_augmentation(count: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((fraction * count as f64).floor() as usize).min(count);
    let mut picked = sample(&mut rng::stream(seed, &[0xA5]), count, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Augments a seeded subset of `images`; the rest are returned unchanged.
pub fn augment_batch(images: &[Image], spec: &AugmentSpec, seed: u64) -> Result<Vec<Image>> {
    spec.validate()?;
    let picked = select_for_augmentation(images.len(), spec.fraction, seed);
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            if picked.binary_search(&i).is_ok() {
                augment_image(img, spec, rng::derive_seed(seed, &[i as u64]))
            } else {
                Ok(img.clone())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Image {
        Image::from_fn(n, |x, y| (x + y) as f64 / (2 * n - 2) as f64)
    }

    #[test]
    fn image_validation() {
        assert!(Image::new(1, vec![0.0]).is_err());
        assert!(Image::new(2, vec![0.0; 3]).is_err());
        assert!(Image::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn bilinear_and_local_mean() {
        let img = Image::from_fn(2, |x, y| (2 * x + y) as f64);
        assert_eq!(img.bilinear(0.5, 0.5), 1.5);
        assert_eq!(img.bilinear(-3.0, 9.0), 1.0);
        assert_eq!(img.local_mean(0, 0), 1.5);
    }

    #[test]
    fn fraction_zero_is_identity() {
        let imgs: Vec<Image> = (0..4).map(|k| Image::from_fn(3, |x, y| ((x + y + k) % 3) as f64 / 2.0)).collect();
        let spec = AugmentSpec { fraction: 0.0, ..AugmentSpec::new(AugmentKind::CatMap { iterations: 1 }) };
        assert_eq!(augment_batch(&imgs, &spec, 1).unwrap(), imgs);
        let spec = AugmentSpec::new(AugmentKind::GaussianNoise { sigma: 0.0 });
        assert_eq!(augment_batch(&imgs, &spec, 1).unwrap(), imgs);
    }

    #[test]
    fn selection_replays() {
        let a = select_for_augmentation(10, 0.5, 7);
        assert_eq!(a.len(), 5);
        assert_eq!(a, select_for_augmentation(10, 0.5, 7));
        assert_eq!(select_for_augmentation(10, 1.0, 3), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let imgs = vec![ramp(8); 3];
        for kind in [
            AugmentKind::LotkaVolterra { params: LvParams::default(), mode: LvMode::Values },
            AugmentKind::LotkaVolterra { params: LvParams::default(), mode: LvMode::Coordinates },
            AugmentKind::SmoothCatMap { m: 0.95, iterations: 1 },
            AugmentKind::GaussianNoise { sigma: 0.5 },
        ] {
            let spec = AugmentSpec { noise_sigma: 0.05, ..AugmentSpec::new(kind) };
            for img in augment_batch(&imgs, &spec, 11).unwrap() {
                assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn lv_values_keeps_images_close() {
        let img = ramp(8);
        let spec = AugmentSpec::new(AugmentKind::LotkaVolterra { params: LvParams::default(), mode: LvMode::Values });
        let out = augment_image(&img, &spec, 0).unwrap();
        assert_ne!(out, img);
        let diff: f64 = out.pixels().iter().zip(img.pixels()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 64.0;
        assert!(diff < 0.5);
    }

    #[test]
    fn bad_specs() {
        let spec = AugmentSpec { fraction: 1.5, ..AugmentSpec::new(AugmentKind::CatMap { iterations: 1 }) };
        assert!(spec.validate().is_err());
        assert!(AugmentSpec::new(AugmentKind::SmoothCatMap { m: 0.0, iterations: 1 }).validate().is_err());
    }
}
