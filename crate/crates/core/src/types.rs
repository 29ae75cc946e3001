use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Single-channel intensity image, row-major, nominal range `[0, 255]`.
///
/// Values are kept as `f64` through the whole pipeline and only quantized to
/// 8 bits at file I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height} = {} pixels", width * height),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        if let Some(index) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { width, height, pixels })
    }

    /// Internal constructor for buffers produced by finite arithmetic.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        debug_assert!(pixels.iter().all(|v| v.is_finite()));
        Self { width, height, pixels }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self::from_raw(width, height, vec![value; width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if `f` returns a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite pixel at ({x}, {y})");
                pixels.push(v);
            }
        }
        Self { width, height, pixels }
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
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel access with coordinates clamped to the frame (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every pixel. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        let pixels: Vec<f64> = self.pixels.iter().map(|&v| f(v)).collect();
        assert!(pixels.iter().all(|v| v.is_finite()));
        Self::from_raw(self.width, self.height, pixels)
    }

    pub fn flip_horizontal(&self) -> Frame {
        Frame::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Ordered frame sequence with uniform dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    frames: Vec<Frame>,
    fps: Option<f64>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptyClip)?;
        let dims = first.dims();
        if let Some(bad) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", dims.0, dims.1),
                actual: format!("{}x{}", bad.width(), bad.height()),
            });
        }
        Ok(Self { frames, fps: None })
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = Some(fps);
        self
    }

    pub fn fps(&self) -> Option<f64> {
        self.fps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Four-level lung ultrasound severity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityScore(u8);

impl SeverityScore {
    pub const COUNT: usize = 4;
    pub const ALL: [SeverityScore; 4] = [SeverityScore(0), SeverityScore(1), SeverityScore(2), SeverityScore(3)];

    pub fn new(value: u8) -> Result<Self> {
        if value < 4 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!("severity score {value} not in 0..=3")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for SeverityScore {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SeverityScore> for u8 {
    fn from(s: SeverityScore) -> u8 {
        s.0
    }
}

impl std::fmt::Display for SeverityScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Polynomial `y(x) = Σ c_k t^k` where `t` is `x` mapped affinely from
/// `[x_min, x_max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    coefficients: Vec<f64>,
    x_min: f64,
    x_max: f64,
}

impl Curve {
    pub fn new(coefficients: Vec<f64>, x_min: f64, x_max: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter("curve needs at least one coefficient".into()));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidParameter(format!("empty curve domain [{x_min}, {x_max}]")));
        }
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { coefficients, x_min, x_max })
    }

    pub fn constant(value: f64, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(vec![value], x_min, x_max)
    }

    /// Degree-1 curve through `(x_min, y_min)` and `(x_max, y_max)`.
    pub fn linear(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(vec![(y_min + y_max) / 2.0, (y_max - y_min) / 2.0], x_min, x_max)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        (2.0 * x - (self.x_min + self.x_max)) / (self.x_max - self.x_min)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.normalize(x);
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// First derivative with respect to the pixel abscissa.
    pub fn derivative(&self, x: f64) -> f64 {
        let t = self.normalize(x);
        let dt = self.coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * t + k as f64 * c);
        dt * 2.0 / (self.x_max - self.x_min)
    }

    /// Sum of squared vertical residuals over `points`.
    pub fn sse(&self, points: &[Point]) -> f64 {
        points.iter().map(|p| (p.y - self.eval(p.x)).powi(2)).sum()
    }

    /// Re-expresses the curve under the coordinate change
    /// `x' = ax·x + bx`, `y' = ay·y + by` (with `ax > 0`).
    pub fn transformed(&self, ax: f64, bx: f64, ay: f64, by: f64) -> Curve {
        assert!(ax > 0.0);
        let mut coefficients: Vec<f64> = self.coefficients.iter().map(|c| c * ay).collect();
        coefficients[0] += by;
        Curve { coefficients, x_min: ax * self.x_min + bx, x_max: ax * self.x_max + bx }
    }
}
