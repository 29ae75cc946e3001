//! Pleural-line straightening: cut away everything well above the line,
//! fit a cubic to the line's upper boundary and shift each column so the
//! cubic becomes a horizontal line at a fixed row.

use crate::error::Result;
use crate::pleura::{fit_polynomial, round_row, PleuralSegmentation};
use crate::types::{Curve, Frame, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StraightenParams {
    pub crop_margin: usize,
    pub target_row: usize,
    pub fill_value: f64,
}

impl Default for StraightenParams {
    fn default() -> Self {
        Self { crop_margin: 5, target_row: 20, fill_value: 0.0 }
    }
}

pub fn fit_cubic(upper_points: &[Point]) -> Result<Curve> {
    fit_polynomial(upper_points, 3)
}

/// Per-column rows as points `(x, rows[x])`.
pub fn column_points(rows: &[f64]) -> Vec<Point> {
    rows.iter().enumerate().map(|(x, &y)| Point::new(x as f64, y)).collect()
}

/// Fills every row above `min(round(upper)) - margin` with `fill`. The frame
/// keeps its dimensions.
pub fn crop_above(frame: &Frame, upper: &[f64], margin: usize, fill: f64) -> Frame {
    let top = upper.iter().map(|&u| round_row(u)).min().unwrap_or(0);
    let cut = (top - margin as i64).max(0) as usize;
    Frame::from_fn(frame.width(), frame.height(), |x, y| if y < cut { fill } else { frame.get(x, y) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Straightened {
    pub frame: Frame,
    /// Upward shift applied to each column (negative moves down).
    pub shifts: Vec<i64>,
}

impl Straightened {
    /// Moves per-column rows by the same shifts that were applied to the frame.
    pub fn shift_rows(&self, rows: &[f64]) -> Vec<f64> {
        rows.iter().zip(&self.shifts).map(|(r, &s)| r - s as f64).collect()
    }
}

/// Shifts column `x` up by `round(cubic(x) - target_row)` rows. Vacated
/// pixels take `fill_value`; pixels pushed past the border are dropped.
pub fn straighten(frame: &Frame, cubic: &Curve, params: &StraightenParams) -> Straightened {
    let (w, h) = frame.dims();
    let shifts: Vec<i64> = (0..w).map(|x| round_row(cubic.eval(x as f64) - params.target_row as f64)).collect();
    let out = Frame::from_fn(w, h, |x, y| {
        let src = y as i64 + shifts[x];
        if (0..h as i64).contains(&src) {
            frame.get(x, src as usize)
        } else {
            params.fill_value
        }
    });
    Straightened { frame: out, shifts }
}

/// Crop, cubic fit to the segmented upper boundary, then straighten.
pub fn straighten_segmented(
    frame: &Frame,
    seg: &PleuralSegmentation,
    params: &StraightenParams,
) -> Result<(Straightened, Curve)> {
    let cropped = crop_above(frame, &seg.upper_rows, params.crop_margin, params.fill_value);
    let cubic = fit_cubic(&column_points(&seg.upper_rows))?;
    Ok((straighten(&cropped, &cubic, params), cubic))
}

/// Fraction of columns where a cubic refit to `rows` lies within `tol` of
/// `target`.
pub fn flatness(rows: &[f64], target: f64, tol: f64) -> Result<f64> {
    let cubic = fit_cubic(&column_points(rows))?;
    let flat = (0..rows.len()).filter(|&x| (cubic.eval(x as f64) - target).abs() <= tol).count();
    Ok(flat as f64 / rows.len() as f64)
}
