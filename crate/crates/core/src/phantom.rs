//! Synthetic linear-probe B-mode phantoms with exact ground truth.
//!
//! Each frame is drawn on a dark background: flat SubQ tissue layers, a
//! bright pleural band following a cubic, optional A-line reverberations at
//! integer multiples of the pleural depth, vertical B-line streaks from the
//! band to the bottom, an optional consolidation blob, and multiplicative
//! speckle `v·(1 + σ·g)`.

use crate::clips::ClipRng;
use crate::error::{Error, Result};
use crate::masking::{region_partition, RegionMask};
use crate::pleura::{round_row, PleuralSegmentation};
use crate::types::{Clip, Curve, Frame, SeverityScore};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntensityLevels {
    pub background: f64,
    pub subq: f64,
    pub pleura: f64,
    pub b_line: f64,
    pub consolidation: f64,
    /// Multiplier applied per successive A-line replica.
    pub a_line_decay: f64,
}

impl Default for IntensityLevels {
    fn default() -> Self {
        Self { background: 20.0, subq: 90.0, pleura: 220.0, b_line: 180.0, consolidation: 140.0, a_line_decay: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Cubic coefficients of the band's lower edge (row), abscissa
    /// normalized from `[0, width - 1]` to `[-1, 1]`.
    pub pleura_curve: [f64; 4],
    pub band_thickness: usize,
    pub n_blines: usize,
    pub b_line_width: usize,
    pub a_lines: bool,
    pub consolidation: bool,
    pub speckle_sigma: f64,
    pub subq_layers: usize,
    pub frames: usize,
    pub seed: u64,
    /// Requested label; must agree with the rendered findings when set.
    pub score: Option<u8>,
    pub levels: IntensityLevels,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 200,
            height: 200,
            pleura_curve: [80.0, 0.0, 0.0, 0.0],
            band_thickness: 6,
            n_blines: 0,
            b_line_width: 3,
            a_lines: true,
            consolidation: false,
            speckle_sigma: 0.1,
            subq_layers: 3,
            frames: 1,
            seed: 0,
            score: None,
            levels: IntensityLevels::default(),
        }
    }
}

impl PhantomSpec {
    pub fn curve(&self) -> Curve {
        Curve::new(self.pleura_curve.to_vec(), 0.0, (self.width.max(2) - 1) as f64)
            .expect("validated spec has a finite curve")
    }

    /// Lower edge row of the band in every column.
    pub fn lower_rows(&self) -> Vec<i64> {
        let c = self.curve();
        (0..self.width).map(|x| round_row(c.eval(x as f64))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentSpec(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("phantom {}x{} smaller than 16x16", self.width, self.height));
        }
        if self.pleura_curve.iter().any(|c| !c.is_finite()) {
            return bad("non-finite pleura curve".into());
        }
        if self.band_thickness == 0 {
            return bad("band_thickness must be >= 1".into());
        }
        if !(self.speckle_sigma >= 0.0 && self.speckle_sigma.is_finite()) {
            return bad(format!("speckle_sigma {}", self.speckle_sigma));
        }
        if self.frames == 0 {
            return bad("frames must be >= 1".into());
        }
        if self.b_line_width == 0 || self.n_blines > (self.width - 4) / (2 * self.b_line_width) {
            return bad(format!("{} B-lines of width {} do not fit", self.n_blines, self.b_line_width));
        }
        let (lo, hi) = (0.15 * self.height as f64, 0.85 * self.height as f64);
        let c = self.curve();
        for x in 0..self.width {
            let d = c.eval(x as f64);
            if d < lo || d > hi {
                return bad(format!("pleura row {d:.1} at column {x} outside [{lo:.1}, {hi:.1}]"));
            }
        }
        if let Some(s) = self.score {
            SeverityScore::new(s).map_err(|e| Error::InconsistentSpec(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveShape {
    Flat,
    Quadratic,
    Cubic,
}

impl PhantomSpec {
    /// Random anatomy for stress-testing segmentation: pleura of the given
    /// shape, 0–8 B-lines, speckle up to `max_speckle`.
    pub fn randomized(shape: CurveShape, max_speckle: f64, rng: &mut ClipRng) -> PhantomSpec {
        let (width, height) = [(200, 200), (240, 180), (180, 220)][rng.random_range(0..3)];
        let h = height as f64;
        let depth = rng.random_range(0.3 * h..0.6 * h);
        let mut curve = [depth, 0.0, 0.0, 0.0];
        match shape {
            CurveShape::Flat => {}
            CurveShape::Quadratic => curve[2] = rng.random_range(-0.08 * h..0.08 * h),
            CurveShape::Cubic => {
                curve[1] = rng.random_range(-0.05 * h..0.05 * h);
                curve[2] = rng.random_range(-0.05 * h..0.05 * h);
                curve[3] = rng.random_range(-0.06 * h..0.06 * h);
            }
        }
        let n_blines = rng.random_range(0..=8);
        PhantomSpec {
            width,
            height,
            pleura_curve: curve,
            band_thickness: rng.random_range(4..=8),
            n_blines,
            a_lines: n_blines == 0 || rng.random_bool(0.5),
            consolidation: false,
            speckle_sigma: rng.random_range(0.0..=max_speckle),
            subq_layers: rng.random_range(1..=4),
            seed: rng.random(),
            ..Default::default()
        }
    }
}

/// Score implied by the findings: consolidation gives 3, more than five
/// B-lines 2, one to five B-lines 1, none 0.
pub fn severity_of(spec: &PhantomSpec) -> Result<SeverityScore> {
    let derived = if spec.consolidation {
        3
    } else if spec.n_blines > 5 {
        2
    } else if spec.n_blines >= 1 {
        1
    } else {
        0
    };
    match spec.score {
        Some(requested) if requested != derived => Err(Error::InconsistentSpec(format!(
            "score {requested} requested but findings imply {derived} ({} B-lines, a_lines={}, consolidation={})",
            spec.n_blines, spec.a_lines, spec.consolidation
        ))),
        _ => SeverityScore::new(derived),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomTruth {
    pub lower_rows: Vec<f64>,
    pub upper_rows: Vec<f64>,
    pub regions: RegionMask,
    pub severity: SeverityScore,
    pub b_line_columns: Vec<usize>,
}

impl PhantomTruth {
    pub fn band_contains(&self, x: usize, y: usize) -> bool {
        let y = y as f64;
        self.upper_rows[x] <= y && y <= self.lower_rows[x]
    }
}

/// Median absolute and RMS error of a boundary estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryError {
    pub median_abs: f64,
    pub rms: f64,
}

impl BoundaryError {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let n = abs.len();
        let median_abs = if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) };
        let rms = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
        Ok(Self { median_abs, rms })
    }
}

/// Signed per-column error of the work-scale lower curve against the truth,
/// which is resampled to work coordinates with pixel-centre alignment.
pub fn work_lower_errors(seg: &PleuralSegmentation, truth: &PhantomTruth) -> Result<Vec<f64>> {
    let (w, h) = (seg.width(), seg.height());
    if truth.lower_rows.len() != w {
        return Err(Error::LengthMismatch(truth.lower_rows.len(), w));
    }
    let lower = seg
        .work_lower
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("segmentation has no work-scale curve".into()))?;
    let ws = seg.work_upper_rows.len();
    let rx = w as f64 / ws as f64;
    let ry = h as f64 / ws as f64;
    Ok((0..ws)
        .map(|xw| {
            let xn = ((xw as f64 + 0.5) * rx - 0.5).clamp(0.0, (w - 1) as f64);
            let i0 = xn.floor() as usize;
            let i1 = (i0 + 1).min(w - 1);
            let f = xn - i0 as f64;
            let yn = truth.lower_rows[i0] * (1.0 - f) + truth.lower_rows[i1] * f;
            lower.eval(xw as f64) - ((yn + 0.5) / ry - 0.5)
        })
        .collect())
}

pub fn generate_phantom(spec: &PhantomSpec, rng: &mut ClipRng) -> Result<(Clip, PhantomTruth)> {
    spec.validate()?;
    let severity = severity_of(spec)?;
    let (w, h) = (spec.width, spec.height);
    let th = spec.band_thickness as i64;
    let lower = spec.lower_rows();
    let upper: Vec<i64> = lower.iter().map(|&d| d - th + 1).collect();
    let lv = &spec.levels;

    // anatomy is fixed per clip, speckle varies per frame
    // slots two streak-widths apart so neighbouring B-lines never merge
    let stride = 2 * spec.b_line_width;
    let slots = (w - 4) / stride;
    let b_line_columns: Vec<usize> = {
        let mut picked = index::sample(rng, slots, spec.n_blines).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|s| 2 + s * stride).collect()
    };
    let consolidation = spec.consolidation.then(|| {
        let cx = w as f64 * rng.random_range(0.35..0.65);
        let depth = lower.iter().copied().max().unwrap_or(0) as f64;
        let cy = depth + (h as f64 - depth) * 0.45;
        (cx, cy, 0.18 * w as f64, 0.25 * (h as f64 - depth))
    });

    let mut base = vec![lv.background; w * h];
    let top = *upper.iter().min().expect("width >= 16");
    for j in 1..=spec.subq_layers as i64 {
        let centre = j * (top - 2) / (spec.subq_layers as i64 + 1);
        for y in (centre - 1).max(0)..=(centre).min(top - 3) {
            for x in 0..w {
                base[y as usize * w + x] = lv.subq;
            }
        }
    }
    for x in 0..w {
        let d = lower[x];
        if spec.a_lines {
            let mut k = 2;
            let mut level = lv.pleura * lv.a_line_decay;
            while k * d - th / 2 < h as i64 {
                let centre = k * d;
                for y in (centre - th / 2)..(centre - th / 2 + th) {
                    if (0..h as i64).contains(&y) && y > d {
                        let p = &mut base[y as usize * w + x];
                        *p = p.max(level);
                    }
                }
                k += 1;
                level *= lv.a_line_decay;
            }
        }
        if let Some((cx, cy, rx, ry)) = consolidation {
            for y in (d + 1).max(0)..h as i64 {
                let u = (x as f64 - cx) / rx;
                let v = (y as f64 - cy) / ry;
                if u * u + v * v <= 1.0 {
                    let p = &mut base[y as usize * w + x];
                    *p = p.max(lv.consolidation);
                }
            }
        }
    }
    for &c in &b_line_columns {
        for x in c..(c + spec.b_line_width).min(w) {
            for y in (lower[x] + 1).max(0)..h as i64 {
                let p = &mut base[y as usize * w + x];
                *p = p.max(lv.b_line);
            }
        }
    }
    for x in 0..w {
        for y in upper[x].max(0)..=lower[x].min(h as i64 - 1) {
            base[y as usize * w + x] = lv.pleura;
        }
    }

    let mut frames = Vec::with_capacity(spec.frames);
    for _ in 0..spec.frames {
        let pixels: Vec<f64> = if spec.speckle_sigma > 0.0 {
            base.iter()
                .map(|&v| {
                    let g: f64 = StandardNormal.sample(rng);
                    (v * (1.0 + spec.speckle_sigma * g)).clamp(0.0, 255.0)
                })
                .collect()
        } else {
            base.clone()
        };
        frames.push(Frame::new(w, h, pixels)?);
    }

    let lower_rows: Vec<f64> = lower.iter().map(|&v| v as f64).collect();
    let upper_rows: Vec<f64> = upper.iter().map(|&v| v as f64).collect();
    let regions = region_partition(w, h, &upper_rows, &lower_rows)?;
    let truth = PhantomTruth { lower_rows, upper_rows, regions, severity, b_line_columns };
    Ok((Clip::new(frames)?, truth))
}

/// Convenience wrapper seeding the RNG from `spec.seed`.
pub fn generate_seeded(spec: &PhantomSpec) -> Result<(Clip, PhantomTruth)> {
    generate_phantom(spec, &mut ClipRng::seed_from_u64(spec.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::Region;

    fn spec() -> PhantomSpec {
        PhantomSpec { speckle_sigma: 0.0, ..Default::default() }
    }

    #[test]
    fn severity_rules() {
        let mk = |n, a, c| PhantomSpec { n_blines: n, a_lines: a, consolidation: c, ..Default::default() };
        assert_eq!(severity_of(&mk(0, true, false)).unwrap().value(), 0);
        assert_eq!(severity_of(&mk(3, false, false)).unwrap().value(), 1);
        assert_eq!(severity_of(&mk(5, false, false)).unwrap().value(), 1);
        assert_eq!(severity_of(&mk(6, false, false)).unwrap().value(), 2);
        assert_eq!(severity_of(&mk(7, false, false)).unwrap().value(), 2);
        assert_eq!(severity_of(&mk(4, false, true)).unwrap().value(), 3);
        let wrong = PhantomSpec { n_blines: 2, a_lines: true, score: Some(0), ..Default::default() };
        assert!(matches!(severity_of(&wrong), Err(Error::InconsistentSpec(_))));
    }

    #[test]
    fn noiseless_flat_band_rows() {
        let s = PhantomSpec { pleura_curve: [80.0, 0.0, 0.0, 0.0], band_thickness: 6, ..spec() };
        let (clip, truth) = generate_seeded(&s).unwrap();
        let f = &clip.frames()[0];
        for x in [0, 57, 199] {
            let bright: Vec<usize> = (0..200).filter(|&y| f.get(x, y) == 220.0).collect();
            assert_eq!(bright, (75..=80).collect::<Vec<_>>());
        }
        assert_eq!(truth.upper_rows[3], 75.0);
        assert_eq!(truth.lower_rows[3], 80.0);
    }

    #[test]
    fn a_line_replica_at_double_depth() {
        let s = PhantomSpec { pleura_curve: [60.0, 0.0, 0.0, 0.0], subq_layers: 0, ..spec() };
        let (clip, _) = generate_seeded(&s).unwrap();
        let f = &clip.frames()[0];
        let rows: Vec<usize> = (81..150).filter(|&y| f.get(10, y) > 20.0).collect();
        assert_eq!(rows, (117..123).collect::<Vec<_>>());
        let level = s.levels.pleura * s.levels.a_line_decay;
        assert!(rows.iter().all(|&y| f.get(10, y) == level));
        let mean: f64 = rows.iter().map(|&y| y as f64).sum::<f64>() / rows.len() as f64;
        assert!((mean - 120.0).abs() <= 0.5);
    }

    #[test]
    fn a_line_below_intensity_threshold_when_noiseless() {
        use crate::imgops::{gaussian_blur_5x5, resize_bilinear};
        use crate::pleura::{compute_thresholds, SegmentationParams};
        let params = SegmentationParams::default();
        for depth in [60.0, 70.0, 80.0, 90.0] {
            for layers in [0, 1, 4] {
                let s = PhantomSpec {
                    pleura_curve: [depth, 0.0, 0.0, 0.0],
                    band_thickness: 4,
                    subq_layers: layers,
                    speckle_sigma: 0.0,
                    ..spec()
                };
                let (clip, _) = generate_seeded(&s).unwrap();
                let f = &clip.frames()[0];
                let work = resize_bilinear(&gaussian_blur_5x5(f).unwrap(), params.work_size, params.work_size).unwrap();
                let t = compute_thresholds(&work, &params).unwrap();
                let first = ((depth + 5.0) * params.work_size as f64 / 200.0).ceil() as usize;
                let brightest_below = (0..work.width())
                    .flat_map(|x| (first..params.work_size).map(move |y| (x, y)))
                    .map(|(x, y)| work.get(x, y))
                    .fold(f64::MIN, f64::max);
                assert!(
                    brightest_below < t.intensity,
                    "depth {depth} layers {layers}: {brightest_below} vs {}",
                    t.intensity
                );
            }
        }
    }

    #[test]
    fn band_brightest_region() {
        let s = PhantomSpec { pleura_curve: [90.0, 10.0, -8.0, 5.0], n_blines: 7, consolidation: false, ..spec() };
        let (clip, truth) = generate_seeded(&s).unwrap();
        assert_eq!(truth.severity.value(), 2);
        assert_eq!(truth.b_line_columns.len(), 7);
        let f = &clip.frames()[0];
        let mut sums = [(0.0, 0usize); 3];
        for y in 0..s.height {
            for x in 0..s.width {
                let i = match truth.regions.get(x, y) {
                    Region::Subq => 0,
                    Region::Pleura => 1,
                    Region::Merlin => 2,
                };
                sums[i].0 += f.get(x, y);
                sums[i].1 += 1;
            }
        }
        let means: Vec<f64> = sums.iter().map(|(s, n)| s / *n as f64).collect();
        assert!(means[1] > means[0] && means[1] > means[2]);
        assert!(truth.regions.is_column_ordered());
    }

    #[test]
    fn deterministic_and_validated() {
        let s = PhantomSpec { n_blines: 2, consolidation: true, seed: 4, frames: 3, ..Default::default() };
        assert_eq!(generate_seeded(&s).unwrap(), generate_seeded(&s).unwrap());
        let shallow = PhantomSpec { pleura_curve: [10.0, 0.0, 0.0, 0.0], ..Default::default() };
        assert!(matches!(shallow.validate(), Err(Error::InconsistentSpec(_))));
    }
}
