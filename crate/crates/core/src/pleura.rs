//! Pleural-line segmentation.
//!
//! The frame is blurred, resized to a square work grid, and thresholded on
//! both the vertical Sobel magnitude and the raw intensity. The deepest
//! candidate of each column is kept; candidates are clustered after
//! dilation, non-dominant clusters are shifted to the level of the largest
//! one, and a quartic is fitted and extended along its end tangents. The
//! band's upper edge is found by scanning up from the fitted curve while the
//! intensity stays above threshold.

use crate::error::{Error, Result};
use crate::imgops::{self, BinaryMask, Connectivity};
use crate::types::{Curve, Frame, Point};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub work_size: usize,
    pub sobel_factor: f64,
    pub intensity_k: f64,
    pub dilate_iters: usize,
    pub poly_degree: usize,
    pub tangent_extension: f64,
    pub max_band_thickness: usize,
    pub blur_sigma: f64,
    pub connectivity: Connectivity,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            work_size: 150,
            sobel_factor: 0.2,
            intensity_k: 1.3,
            dilate_iters: 2,
            poly_degree: 4,
            tangent_extension: 12.0,
            max_band_thickness: 12,
            blur_sigma: 1.0,
            connectivity: Connectivity::Eight,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.work_size < 16 {
            return bad("work_size must be at least 16");
        }
        if !(self.sobel_factor > 0.0) {
            return bad("sobel_factor must be > 0");
        }
        if !(self.intensity_k >= 0.0) {
            return bad("intensity_k must be >= 0");
        }
        if self.poly_degree < 1 {
            return bad("poly_degree must be >= 1");
        }
        if !(self.tangent_extension > 10.0) {
            return bad("tangent_extension must be > 10");
        }
        if !(self.blur_sigma > 0.0) {
            return bad("blur_sigma must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub sobel: f64,
    pub intensity: f64,
}

/// A polynomial continued linearly along its end tangents for
/// `extension` pixels on each side, and held flat beyond that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentCurve {
    pub curve: Curve,
    pub extension: f64,
}

impl TangentCurve {
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.curve.domain();
        if x < lo {
            let dx = (x - lo).max(-self.extension);
            self.curve.eval(lo) + self.curve.derivative(lo) * dx
        } else if x > hi {
            let dx = (x - hi).min(self.extension);
            self.curve.eval(hi) + self.curve.derivative(hi) * dx
        } else {
            self.curve.eval(x)
        }
    }

    /// The interval on which the curve is polynomial or tangent.
    pub fn extended_domain(&self) -> (f64, f64) {
        let (lo, hi) = self.curve.domain();
        (lo - self.extension, hi + self.extension)
    }

    pub fn transformed(&self, ax: f64, bx: f64, ay: f64, by: f64) -> TangentCurve {
        TangentCurve { curve: self.curve.transformed(ax, bx, ay, by), extension: self.extension * ax }
    }
}

pub fn extend_tangent(curve: &Curve, extension: f64) -> Result<TangentCurve> {
    if !(extension > 10.0) {
        return Err(Error::InvalidParameter(format!("tangent extension {extension} must be > 10")));
    }
    Ok(TangentCurve { curve: curve.clone(), extension })
}

/// Sobel threshold `sobel_factor · mean(|S_y|)` and intensity threshold
/// `mean + intensity_k · std`, both over the given (already blurred and
/// resized) frame.
pub fn compute_thresholds(frame: &Frame, params: &SegmentationParams) -> Result<Thresholds> {
    let sobel = imgops::sobel_y(frame)?;
    Ok(thresholds_from(frame, &sobel, params))
}

fn thresholds_from(frame: &Frame, sobel: &Frame, params: &SegmentationParams) -> Thresholds {
    let (sobel_mean, _) = imgops::mean_std(sobel);
    let (mean, std) = imgops::mean_std(frame);
    Thresholds { sobel: params.sobel_factor * sobel_mean, intensity: mean + params.intensity_k * std }
}

pub fn candidate_mask(frame: &Frame, params: &SegmentationParams) -> Result<BinaryMask> {
    candidates_with_thresholds(frame, params).map(|(m, _)| m)
}

fn candidates_with_thresholds(frame: &Frame, params: &SegmentationParams) -> Result<(BinaryMask, Thresholds)> {
    let sobel = imgops::sobel_y(frame)?;
    let t = thresholds_from(frame, &sobel, params);
    let mask = imgops::threshold(&sobel, t.sobel).and(&imgops::threshold(frame, t.intensity));
    Ok((mask, t))
}

/// Deepest (greatest row) set pixel of every non-empty column.
pub fn lowest_per_column(mask: &BinaryMask) -> Vec<Point> {
    (0..mask.width())
        .filter_map(|x| (0..mask.height()).rev().find(|&y| mask.get(x, y)).map(|y| Point::new(x as f64, y as f64)))
        .collect()
}

/// Clusters the points on a `width × height` grid (after dilation) and
/// shifts every cluster other than the largest so that its shallowest point
/// lines up with the largest cluster's shallowest point.
pub fn consolidate_regions(
    points: &[Point],
    width: usize,
    height: usize,
    params: &SegmentationParams,
) -> Result<Vec<Point>> {
    if points.is_empty() {
        return Err(Error::NoCandidates);
    }
    let cell = |p: &Point| {
        let x = (p.x.round().max(0.0) as usize).min(width - 1);
        let y = (p.y.round().max(0.0) as usize).min(height - 1);
        (x, y)
    };
    let mut raster = BinaryMask::empty(width, height);
    for p in points {
        let (x, y) = cell(p);
        raster.set(x, y, true);
    }
    let dilated = imgops::dilate(&raster, params.dilate_iters);
    let labels = imgops::connected_components_with(&dilated, params.connectivity);
    let areas = labels.areas();
    let largest = (1..areas.len())
        .max_by(|&a, &b| areas[a].cmp(&areas[b]).then(b.cmp(&a)))
        .expect("non-empty raster has a component");

    let point_labels: Vec<usize> = points
        .iter()
        .map(|p| {
            let (x, y) = cell(p);
            labels.get(x, y) as usize
        })
        .collect();
    let mut min_y = vec![f64::INFINITY; areas.len()];
    for (p, &l) in points.iter().zip(&point_labels) {
        min_y[l] = min_y[l].min(p.y);
    }
    Ok(points
        .iter()
        .zip(&point_labels)
        .map(|(p, &l)| if l == largest { *p } else { Point::new(p.x, p.y + (min_y[largest] - min_y[l])) })
        .collect())
}

/// Least-squares polynomial fit on the abscissa normalized to `[-1, 1]`.
pub fn fit_polynomial(points: &[Point], degree: usize) -> Result<Curve> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < degree + 1 {
        return Err(Error::InsufficientPoints { needed: degree + 1, got: xs.len() });
    }
    if let Some(index) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::NonFiniteValue { index });
    }
    let (x_min, x_max) = if xs.len() == 1 { (xs[0] - 0.5, xs[0] + 0.5) } else { (xs[0], xs[xs.len() - 1]) };
    let shell = Curve::new(vec![0.0], x_min, x_max)?;
    let n = points.len();
    let design = DMatrix::from_fn(n, degree + 1, |i, k| shell.normalize(points[i].x).powi(k as i32));
    let rhs = DVector::from_iterator(n, points.iter().map(|p| p.y));
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    Curve::new(coeffs.iter().copied().collect(), x_min, x_max)
}

/// Scans upward from each column's lower row while the pixel stays above
/// `t_intensity`, for at most `max_thickness` rows, and returns the
/// shallowest row reached.
pub fn upper_boundary(frame: &Frame, lower: &[usize], t_intensity: f64, max_thickness: usize) -> Vec<usize> {
    lower
        .iter()
        .enumerate()
        .map(|(x, &l)| {
            let mut upper = l;
            for k in 1..=max_thickness {
                let Some(r) = l.checked_sub(k) else { break };
                if frame.get(x, r) <= t_intensity {
                    break;
                }
                upper = r;
            }
            upper
        })
        .collect()
}

/// Segmented pleural line at native resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PleuralSegmentation {
    width: usize,
    height: usize,
    /// Deepest extent of the bright line, tangent-extended, native coordinates.
    pub lower: TangentCurve,
    /// `lower` sampled at every native column.
    pub lower_rows: Vec<f64>,
    /// Shallowest extent of the line per native column.
    pub upper_rows: Vec<f64>,
    pub band: BinaryMask,
    /// Consolidated candidate points on the work grid.
    pub work_candidates: Vec<Point>,
    /// Lower curve on the work grid.
    pub work_lower: Option<TangentCurve>,
    pub work_upper_rows: Vec<f64>,
}

impl PleuralSegmentation {
    /// Assembles a segmentation from a lower curve and per-column upper rows,
    /// rebuilding the band mask. Upper rows below the curve are clamped to it.
    pub fn from_boundaries(width: usize, height: usize, lower: TangentCurve, upper_rows: Vec<f64>) -> Result<Self> {
        if upper_rows.len() != width {
            return Err(Error::DimensionMismatch {
                expected: format!("{width} upper rows"),
                actual: format!("{}", upper_rows.len()),
            });
        }
        let lower_rows: Vec<f64> = (0..width).map(|x| lower.eval(x as f64)).collect();
        let upper_rows: Vec<f64> = upper_rows.iter().zip(&lower_rows).map(|(&u, &l)| u.min(l)).collect();
        let band = band_mask(width, height, &upper_rows, &lower_rows);
        Ok(Self {
            width,
            height,
            lower,
            lower_rows,
            upper_rows,
            band,
            work_candidates: Vec::new(),
            work_lower: None,
            work_upper_rows: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Rounded row, half away from zero.
#[inline]
pub fn round_row(v: f64) -> i64 {
    v.round() as i64
}

/// Pixels between `upper` and `lower` inclusive (after rounding) per column.
pub fn band_mask(width: usize, height: usize, upper: &[f64], lower: &[f64]) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let y = y as i64;
        round_row(upper[x]) <= y && y <= round_row(lower[x])
    })
}

pub fn segment_pleura(frame: &Frame, params: &SegmentationParams) -> Result<PleuralSegmentation> {
    params.validate()?;
    let (width, height) = frame.dims();
    if width < 16 || height < 16 {
        return Err(Error::FrameTooSmall { width, height, min: 16 });
    }
    let ws = params.work_size;
    let blurred = imgops::gaussian_blur_5x5_sigma(frame, params.blur_sigma)?;
    let work = imgops::resize_bilinear(&blurred, ws, ws)?;
    let (mask, thresholds) = candidates_with_thresholds(&work, params)?;
    let points = lowest_per_column(&mask);
    let consolidated = consolidate_regions(&points, ws, ws, params)?;
    let fitted = fit_polynomial(&consolidated, params.poly_degree)?;
    let work_lower = extend_tangent(&fitted, params.tangent_extension)?;

    let work_lower_rows: Vec<f64> = (0..ws).map(|x| work_lower.eval(x as f64)).collect();
    let lower_idx: Vec<usize> =
        work_lower_rows.iter().map(|&r| round_row(r).clamp(0, ws as i64 - 1) as usize).collect();
    let upper_idx = upper_boundary(&work, &lower_idx, thresholds.intensity, params.max_band_thickness);
    let thickness: Vec<f64> = lower_idx.iter().zip(&upper_idx).map(|(&l, &u)| (l - u) as f64).collect();
    let work_upper_rows: Vec<f64> = work_lower_rows.iter().zip(&thickness).map(|(l, t)| l - t).collect();

    // pixel-centre aligned work -> native mapping
    let rx = width as f64 / ws as f64;
    let ry = height as f64 / ws as f64;
    let lower = work_lower.transformed(rx, 0.5 * rx - 0.5, ry, 0.5 * ry - 0.5);
    let upper_rows: Vec<f64> = (0..width)
        .map(|xn| {
            let xw = ((xn as f64 + 0.5) / rx - 0.5).clamp(0.0, (ws - 1) as f64);
            let i0 = xw.floor() as usize;
            let i1 = (i0 + 1).min(ws - 1);
            let f = xw - i0 as f64;
            let t = thickness[i0] * (1.0 - f) + thickness[i1] * f;
            lower.eval(xn as f64) - t * ry
        })
        .collect();

    let mut seg = PleuralSegmentation::from_boundaries(width, height, lower, upper_rows)?;
    seg.work_candidates = consolidated;
    seg.work_lower = Some(work_lower);
    seg.work_upper_rows = work_upper_rows;
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_frame() -> Frame {
        Frame::from_fn(8, 8, |_, y| if y < 4 { 0.0 } else { 200.0 })
    }

    #[test]
    fn thresholds_constant_and_two_level() {
        let p = SegmentationParams::default();
        let t = compute_thresholds(&Frame::filled(10, 10, 100.0), &p).unwrap();
        assert_eq!((t.sobel, t.intensity), (0.0, 100.0));
        let t = compute_thresholds(&half_frame(), &p).unwrap();
        assert!((t.intensity - 230.0).abs() < 1e-9);
    }

    #[test]
    fn sobel_threshold_step_edge() {
        let f = Frame::from_fn(10, 10, |_, y| if y >= 5 { 100.0 } else { 0.0 });
        // |S_y| is 400 on rows 4 and 5, zero elsewhere
        let expected = 0.2 * (2.0 * 10.0 * 400.0) / 100.0;
        let t = compute_thresholds(&f, &SegmentationParams::default()).unwrap();
        assert!((t.sobel - expected).abs() < 1e-9);
    }

    #[test]
    fn candidate_mask_cases() {
        let p = SegmentationParams::default();
        assert_eq!(candidate_mask(&Frame::filled(20, 20, 50.0), &p).unwrap().count(), 0);

        // a one-row line has zero vertical gradient on the row itself, so
        // candidates come from its blurred flanks
        let f = Frame::from_fn(20, 20, |_, y| if y == 10 { 200.0 } else { 10.0 });
        let m = candidate_mask(&imgops::gaussian_blur_5x5(&f).unwrap(), &p).unwrap();
        assert!(m.count() > 0);
        for y in 0..20 {
            for x in 0..20 {
                if m.get(x, y) {
                    assert!(y.abs_diff(10) <= 1);
                }
            }
        }

        let band = Frame::from_fn(30, 30, |_, y| if (12..16).contains(&y) { 220.0 } else { 20.0 });
        let m = candidate_mask(&band, &p).unwrap();
        let rows: Vec<usize> = (0..30).filter(|&y| (0..30).any(|x| m.get(x, y))).collect();
        assert_eq!(rows, vec![12, 15]);
    }

    #[test]
    fn candidates_satisfy_both_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Frame::from_fn(40, 40, |_, _| rng.random_range(0.0..255.0));
        let p = SegmentationParams::default();
        let t = compute_thresholds(&f, &p).unwrap();
        let m = candidate_mask(&f, &p).unwrap();
        let s = imgops::sobel_y(&f).unwrap();
        assert!(m.is_subset_of(&imgops::threshold(&s, t.sobel)));
        assert!(m.is_subset_of(&imgops::threshold(&f, t.intensity)));
    }

    #[test]
    fn lowest_per_column_cases() {
        let mut m = BinaryMask::empty(3, 12);
        m.set(1, 5, true);
        m.set(1, 9, true);
        assert_eq!(lowest_per_column(&m), vec![Point::new(1.0, 9.0)]);
        assert!(lowest_per_column(&BinaryMask::empty(4, 4)).is_empty());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = BinaryMask::from_fn(30, 20, |_, _| rng.random_bool(0.05));
        let mut expected = Vec::new();
        for x in 0..30 {
            let mut best = None;
            for y in 0..20 {
                if m.get(x, y) {
                    best = Some(y);
                }
            }
            if let Some(y) = best {
                expected.push(Point::new(x as f64, y as f64));
            }
        }
        assert_eq!(lowest_per_column(&m), expected);
    }

    #[test]
    fn consolidate_single_component_unchanged() {
        let pts: Vec<Point> = (10..40).map(|x| Point::new(x as f64, 50.0 + (x % 2) as f64)).collect();
        let out = consolidate_regions(&pts, 100, 100, &SegmentationParams::default()).unwrap();
        assert_eq!(out, pts);
    }

    #[test]
    fn consolidate_moves_minor_run() {
        let mut pts: Vec<Point> = (5..45).map(|x| Point::new(x as f64, 50.0)).collect();
        let right: Vec<Point> = (60..70).map(|x| Point::new(x as f64, 60.0)).collect();
        pts.extend(&right);
        let out = consolidate_regions(&pts, 100, 100, &SegmentationParams::default()).unwrap();
        assert_eq!(out.len(), pts.len());
        for (a, b) in out.iter().zip(&pts) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, 50.0);
        }
        assert_eq!(consolidate_regions(&[], 10, 10, &SegmentationParams::default()), Err(Error::NoCandidates));
    }

    /// Normal equations `(AᵀA) c = Aᵀy` solved with partial-pivot elimination.
    fn normal_equations_sse(points: &[Point], degree: usize) -> f64 {
        let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let t = |x: f64| (2.0 * x - lo - hi) / (hi - lo);
        let m = degree + 1;
        let mut a = vec![vec![0.0; m + 1]; m];
        for p in points {
            let tx = t(p.x);
            for i in 0..m {
                for j in 0..m {
                    a[i][j] += tx.powi(i as i32) * tx.powi(j as i32);
                }
                a[i][m] += tx.powi(i as i32) * p.y;
            }
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=m {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let c: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
        points
            .iter()
            .map(|p| {
                let tx = t(p.x);
                let y: f64 = c.iter().enumerate().map(|(k, ck)| ck * tx.powi(k as i32)).sum();
                (p.y - y).powi(2)
            })
            .sum()
    }

    #[test]
    fn fit_exact_cases() {
        let flat: Vec<Point> = (0..10).map(|x| Point::new(x as f64 * 3.0, 3.0)).collect();
        let c = fit_polynomial(&flat, 0).unwrap();
        assert!(c.sse(&flat) < 1e-20);
        assert!((c.eval(100.0) - 3.0).abs() < 1e-12);

        let quad: Vec<Point> = (0..150).map(|x| Point::new(x as f64, (x * x) as f64 / 100.0)).collect();
        assert!(fit_polynomial(&quad, 4).unwrap().sse(&quad) <= 1e-8);
    }

    #[test]
    fn fit_not_worse_than_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for degree in [3, 4] {
            for _ in 0..20 {
                let pts: Vec<Point> = (0..60)
                    .map(|_| {
                        let x = rng.random_range(0.0..150.0f64).round();
                        Point::new(x, 60.0 + 0.002 * (x - 75.0).powi(2) + rng.random_range(-3.0..3.0))
                    })
                    .collect();
                let c = fit_polynomial(&pts, degree).unwrap();
                assert!(c.sse(&pts) <= normal_equations_sse(&pts, degree) + 1e-8);
            }
        }
    }

    #[test]
    fn fit_requires_distinct_x() {
        let pts = vec![Point::new(1.0, 1.0), Point::new(1.0, 2.0), Point::new(2.0, 0.0)];
        assert_eq!(fit_polynomial(&pts, 2), Err(Error::InsufficientPoints { needed: 3, got: 2 }));
    }

    #[test]
    fn tangent_extension_cases() {
        assert!(extend_tangent(&Curve::constant(1.0, 0.0, 1.0).unwrap(), 10.0).is_err());
        let flat = extend_tangent(&Curve::constant(5.0, 10.0, 20.0).unwrap(), 12.0).unwrap();
        assert_eq!(flat.eval(0.0), 5.0);
        assert_eq!(flat.eval(31.0), 5.0);

        let line = extend_tangent(&Curve::linear(10.0, 20.0, 50.0, 100.0).unwrap(), 12.0).unwrap();
        for x in [-2.0, 0.0, 5.0, 55.0, 62.0] {
            assert!((line.eval(x) - 2.0 * x).abs() < 1e-12);
        }
        assert_eq!(line.extended_domain(), (-2.0, 62.0));

        let quartic = Curve::new(vec![50.0, 4.0, -6.0, 2.0, 3.0], 20.0, 120.0).unwrap();
        let ext = extend_tangent(&quartic, 12.0).unwrap();
        let h = 1e-4;
        for join in [20.0, 120.0] {
            let fd = (quartic.eval(join + h) - quartic.eval(join - h)) / (2.0 * h);
            let left = (ext.eval(join) - ext.eval(join - 1.0)) / 1.0;
            let right = (ext.eval(join + 1.0) - ext.eval(join)) / 1.0;
            let outer = if join < 50.0 { left } else { right };
            assert!((outer - fd).abs() < 1e-6, "{outer} vs {fd}");
            assert!((ext.eval(join) - quartic.eval(join)).abs() < 1e-9);
        }
    }

    #[test]
    fn upper_boundary_cases() {
        let f = Frame::from_fn(4, 60, |_, y| if (40..=45).contains(&y) { 200.0 } else { 10.0 });
        assert_eq!(upper_boundary(&f, &[45; 4], 100.0, 12), vec![40; 4]);
        let thin = Frame::from_fn(2, 20, |_, y| if y == 10 { 200.0 } else { 10.0 });
        assert_eq!(upper_boundary(&thin, &[10, 10], 100.0, 12), vec![10, 10]);
        let bright = Frame::filled(2, 40, 200.0);
        assert_eq!(upper_boundary(&bright, &[30, 5], 100.0, 12), vec![18, 0]);
    }

    #[test]
    fn black_frame_has_no_candidates() {
        let f = Frame::filled(64, 64, 0.0);
        assert_eq!(segment_pleura(&f, &SegmentationParams::default()), Err(Error::NoCandidates));
    }

    #[test]
    fn flat_band_segmentation() {
        let f = Frame::from_fn(200, 180, |_, y| if (80..88).contains(&y) { 220.0 } else { 20.0 });
        let seg = segment_pleura(&f, &SegmentationParams::default()).unwrap();
        for x in 0..200 {
            assert!((seg.lower_rows[x] - 87.0).abs() <= 2.0, "{}", seg.lower_rows[x]);
            assert!(seg.upper_rows[x] <= seg.lower_rows[x]);
            assert!((seg.upper_rows[x] - 80.0).abs() <= 3.0, "{}", seg.upper_rows[x]);
        }
        let again = segment_pleura(&f, &SegmentationParams::default()).unwrap();
        assert_eq!(seg, again);
    }
}
