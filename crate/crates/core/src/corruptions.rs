//! Parametric image corruptions used to manufacture shifted data.
//!
//! Each transform takes a severity level 0..=4; level 0 is the identity.
//! Outputs are clipped to `[0, 1]`.

use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive, rng_from};

/// `height x width x channels` image, stored HWC with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::input("image dimensions must be positive"));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::DimensionMismatch {
                expected: height * width * channels,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::input("pixels must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        Self {
            pixels: self
                .pixels
                .iter()
                .enumerate()
                .map(|(i, &p)| f(i, p).clamp(0.0, 1.0))
                .collect(),
            ..*self
        }
    }

    fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for (i, p) in self.pixels.iter().enumerate() {
            sums[i % self.channels] += p;
        }
        let n = (self.height * self.width) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Severity(u8);

impl Severity {
    pub const MAX: u8 = 4;

    pub fn new(level: u8) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::config(format!("severity {level} outside 0..=4")));
        }
        Ok(Self(level))
    }

    pub fn level(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Severity> {
        (0..=Self::MAX).map(Severity)
    }
}

pub const BRIGHTNESS_SHIFT: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
pub const CONTRAST_FACTOR: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];
pub const GAUSSIAN_SIGMA: [f64; 5] = [0.0, 0.04, 0.08, 0.12, 0.16];
/// Photon counts; `None` is the identity.
pub const SHOT_LAMBDA: [Option<f64>; 5] = [None, Some(60.0), Some(25.0), Some(12.0), Some(5.0)];
pub const PIXELATE_FACTOR: [usize; 5] = [1, 2, 3, 4, 6];
pub const DEFOCUS_RADIUS: [usize; 5] = [0, 1, 2, 3, 4];

pub fn brightness(img: &ImageTensor, severity: Severity, _seed: u64) -> ImageTensor {
    let b = BRIGHTNESS_SHIFT[severity.level()];
    img.map(|_, p| p + b)
}

pub fn contrast(img: &ImageTensor, severity: Severity, _seed: u64) -> ImageTensor {
    let c = CONTRAST_FACTOR[severity.level()];
    if c == 1.0 {
        return img.clone();
    }
    let means = img.channel_means();
    img.map(|i, p| {
        let m = means[i % img.channels];
        (p - m) * c + m
    })
}

pub fn gaussian_noise(img: &ImageTensor, severity: Severity, seed: u64) -> ImageTensor {
    let sigma = GAUSSIAN_SIGMA[severity.level()];
    if sigma == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = rng_from(seed);
    img.map(|_, p| p + normal.sample(&mut rng))
}

pub fn shot_noise(img: &ImageTensor, severity: Severity, seed: u64) -> ImageTensor {
    let Some(lambda) = SHOT_LAMBDA[severity.level()] else {
        return img.clone();
    };
    let mut rng = rng_from(seed);
    img.map(|_, p| {
        let rate = p * lambda;
        if rate <= 0.0 {
            return 0.0;
        }
        Poisson::new(rate).expect("positive rate").sample(&mut rng) / lambda
    })
}

/// Block-average over `f x f` tiles (partial tiles at the border), then
/// nearest-neighbour back to full size.
pub fn pixelate(img: &ImageTensor, severity: Severity, _seed: u64) -> ImageTensor {
    let f = PIXELATE_FACTOR[severity.level()];
    if f == 1 {
        return img.clone();
    }
    let (h, w, ch) = (img.height, img.width, img.channels);
    let mut out = vec![0.0; img.pixels.len()];
    for by in (0..h).step_by(f) {
        for bx in (0..w).step_by(f) {
            let (y_end, x_end) = ((by + f).min(h), (bx + f).min(w));
            let count = ((y_end - by) * (x_end - bx)) as f64;
            for c in 0..ch {
                let mut sum = 0.0;
                for y in by..y_end {
                    for x in bx..x_end {
                        sum += img.get(y, x, c);
                    }
                }
                let mean = sum / count;
                for y in by..y_end {
                    for x in bx..x_end {
                        out[(y * w + x) * ch + c] = mean;
                    }
                }
            }
        }
    }
    ImageTensor { pixels: out, ..*img }.map(|_, p| p)
}

/// Normalized disk kernel of radius `r` as `(dy, dx, weight)` taps.
pub fn disk_kernel(radius: usize) -> Vec<(isize, isize, f64)> {
    let r = radius as isize;
    let taps: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|&(dy, dx)| dy * dy + dx * dx <= r * r)
        .collect();
    let w = 1.0 / taps.len() as f64;
    taps.into_iter().map(|(dy, dx)| (dy, dx, w)).collect()
}

/// Disk-kernel convolution with edge-clamped borders.
pub fn defocus_blur(img: &ImageTensor, severity: Severity, _seed: u64) -> ImageTensor {
    let r = DEFOCUS_RADIUS[severity.level()];
    if r == 0 {
        return img.clone();
    }
    let kernel = disk_kernel(r);
    let (h, w, ch) = (img.height as isize, img.width as isize, img.channels);
    let mut out = Vec::with_capacity(img.pixels.len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let v: f64 = kernel
                    .iter()
                    .map(|&(dy, dx, k)| {
                        let yy = (y + dy).clamp(0, h - 1) as usize;
                        let xx = (x + dx).clamp(0, w - 1) as usize;
                        k * img.get(yy, xx, c)
                    })
                    .sum();
                out.push(v);
            }
        }
    }
    ImageTensor { pixels: out, ..*img }.map(|_, p| p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    Brightness,
    Contrast,
    GaussianNoise,
    ShotNoise,
    Pixelate,
    DefocusBlur,
}

impl Corruption {
    pub const ALL: [Corruption; 6] = [
        Self::Brightness,
        Self::Contrast,
        Self::GaussianNoise,
        Self::ShotNoise,
        Self::Pixelate,
        Self::DefocusBlur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Brightness => "brightness",
            Self::Contrast => "contrast",
            Self::GaussianNoise => "gaussian-noise",
            Self::ShotNoise => "shot-noise",
            Self::Pixelate => "pixelate",
            Self::DefocusBlur => "defocus-blur",
        }
    }

    pub fn apply(self, img: &ImageTensor, severity: Severity, seed: u64) -> ImageTensor {
        match self {
            Self::Brightness => brightness(img, severity, seed),
            Self::Contrast => contrast(img, severity, seed),
            Self::GaussianNoise => gaussian_noise(img, severity, seed),
            Self::ShotNoise => shot_noise(img, severity, seed),
            Self::Pixelate => pixelate(img, severity, seed),
            Self::DefocusBlur => defocus_blur(img, severity, seed),
        }
    }
}

impl std::str::FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config(format!("unknown corruption `{s}`")))
    }
}

/// Image geometry used to view feature rows as images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    /// Square single-channel shape for a feature width that is a perfect square.
    pub fn square_for(dim: usize) -> Result<Self> {
        let side = (dim as f64).sqrt().round() as usize;
        if side * side != dim {
            return Err(Error::config(format!(
                "feature width {dim} is not a square; pass an explicit image shape"
            )));
        }
        Ok(Self {
            height: side,
            width: side,
            channels: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::str::FromStr for ImageShape {
    type Err = Error;

    /// `HxWxC` or `HxW`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("bad image shape `{s}`")))?;
        match parts[..] {
            [h, w] => Ok(Self { height: h, width: w, channels: 1 }),
            [h, w, c] => Ok(Self { height: h, width: w, channels: c }),
            _ => Err(Error::config(format!("bad image shape `{s}`"))),
        }
    }
}

/// Apply `corruption` to every row of `data`, viewed as images of `shape`.
/// Row `i` uses seed `derive(seed, [i])`.
pub fn corrupt_dataset(
    data: &Dataset,
    corruption: Corruption,
    severity: Severity,
    shape: ImageShape,
    seed: u64,
) -> Result<Dataset> {
    if shape.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: shape.len(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let img = ImageTensor::new(shape.height, shape.width, shape.channels, data.row(i).to_vec())?;
            Ok(corruption
                .apply(&img, severity, derive(seed, &[i as u64]))
                .into_pixels())
        })
        .collect::<Result<_>>()?;
    data.with_features(rows.concat())
}
