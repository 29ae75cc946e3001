//! Image primitives composed by the pleural-line segmentation.

use crate::error::{Error, Result};
use crate::types::Frame;
use serde::{Deserialize, Serialize};

/// Row-major boolean image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bits", width * height),
                actual: format!("{} bits", bits.len()),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
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
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Connected-component labels; `0` is background, regions are `1..=region_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    /// Pixel count per label, index 0 is background.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.region_count + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// Normalized 5-tap Gaussian weights.
pub fn gaussian_kernel_5(sigma: f64) -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *w = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|w| w / sum)
}

fn require_size(frame: &Frame, min: usize) -> Result<()> {
    if frame.width() < min || frame.height() < min {
        return Err(Error::FrameTooSmall { width: frame.width(), height: frame.height(), min });
    }
    Ok(())
}

/// 5×5 Gaussian blur with σ = 1 and replicate border.
pub fn gaussian_blur_5x5(frame: &Frame) -> Result<Frame> {
    gaussian_blur_5x5_sigma(frame, 1.0)
}

pub fn gaussian_blur_5x5_sigma(frame: &Frame, sigma: f64) -> Result<Frame> {
    require_size(frame, 5)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gaussian sigma {sigma}")));
    }
    let k = gaussian_kernel_5(sigma);
    let (w, h) = frame.dims();
    // separable: horizontal then vertical, both clamped
    let horiz = Frame::from_fn(w, h, |x, y| {
        (0..5).map(|i| k[i] * frame.get_clamped(x as isize + i as isize - 2, y as isize)).sum()
    });
    Ok(Frame::from_fn(w, h, |x, y| {
        (0..5).map(|j| k[j] * horiz.get_clamped(x as isize, y as isize + j as isize - 2)).sum()
    }))
}

/// Bilinear resampling with pixel-center alignment and clamped sampling.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Result<Frame> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParameter(format!("resize target {out_w}x{out_h}")));
    }
    let (w, h) = frame.dims();
    if (w, h) == (out_w, out_h) {
        return Ok(frame.clone());
    }
    let xs = axis_taps(w, out_w);
    let ys = axis_taps(h, out_h);
    Ok(Frame::from_fn(out_w, out_h, |x, y| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let top = frame.get(x0, y0) * (1.0 - fx) + frame.get(x1, y0) * fx;
        let bottom = frame.get(x0, y1) * (1.0 - fx) + frame.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Absolute response to the vertical-gradient Sobel kernel
/// `[-1 -2 -1; 0 0 0; 1 2 1]`, replicate border.
pub fn sobel_y(frame: &Frame) -> Result<Frame> {
    require_size(frame, 3)?;
    let (w, h) = frame.dims();
    Ok(Frame::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let below =
            frame.get_clamped(x - 1, y + 1) + 2.0 * frame.get_clamped(x, y + 1) + frame.get_clamped(x + 1, y + 1);
        let above =
            frame.get_clamped(x - 1, y - 1) + 2.0 * frame.get_clamped(x, y - 1) + frame.get_clamped(x + 1, y - 1);
        (below - above).abs()
    }))
}

/// Mean and population standard deviation.
pub fn mean_std(frame: &Frame) -> (f64, f64) {
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in frame.pixels().iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = (m2 / frame.pixels().len() as f64).max(0.0);
    (mean, var.sqrt())
}

/// `true` where the pixel is strictly greater than `t`.
pub fn threshold(frame: &Frame, t: f64) -> BinaryMask {
    BinaryMask { width: frame.width(), height: frame.height(), bits: frame.pixels().iter().map(|&v| v > t).collect() }
}

/// Dilation with a 3×3 square structuring element, repeated `iterations` times.
pub fn dilate(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut current = mask.clone();
    for _ in 0..iterations {
        let mut next = BinaryMask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                if !current.get(x, y) {
                    continue;
                }
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        next.set(nx, ny, true);
                    }
                }
            }
        }
        current = next;
    }
    current
}

pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    connected_components_with(mask, Connectivity::Eight)
}

/// Two-pass union-find labeling. Labels are numbered in raster order of each
/// region's first pixel.
pub fn connected_components_with(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut a: u32) -> u32 {
        while parent[a as usize] != a {
            parent[a as usize] = parent[parent[a as usize] as usize];
            a = parent[a as usize];
        }
        a
    }

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbours[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                push(provisional[y * w + x - 1]);
            }
            if y > 0 {
                push(provisional[(y - 1) * w + x]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(provisional[(y - 1) * w + x - 1]);
                    }
                    if x + 1 < w {
                        push(provisional[(y - 1) * w + x + 1]);
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let mut root = find(&mut parent, neighbours[0]);
                for &other in &neighbours[1..n] {
                    let r = find(&mut parent, other);
                    if r != root {
                        let (lo, hi) = if r < root { (r, root) } else { (root, r) };
                        parent[hi as usize] = lo;
                        root = lo;
                    }
                }
                root
            };
            provisional[y * w + x] = label;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    let labels = provisional
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let root = find(&mut parent, l) as usize;
            if remap[root] == 0 {
                next += 1;
                remap[root] = next;
            }
            remap[root]
        })
        .collect();
    LabelMap { width: w, height: h, labels, region_count: next as usize }
}
