use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::inputs::{collect, expand_inputs, segmentation_for, stem};
use lus_core::curves::straighten_segmented;
use lus_core::io::{read_frame, write_frame, write_toml};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Cubic used for straightening and the per-column upward shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraightenRecord {
    pub target_row: usize,
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub shifts: Vec<i64>,
}

fn straighten_one(path: &Path, curves: Option<&Path>, out: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let frame = read_frame(path)?;
    let stem = stem(path);
    let seg = segmentation_for(&frame, &stem, curves, &cfg.segmentation)?;
    let (st, cubic) = straighten_segmented(&frame, &seg, &cfg.straighten)?;
    let (lo, hi) = cubic.domain();
    let rec = StraightenRecord {
        target_row: cfg.straighten.target_row,
        coefficients: cubic.coefficients().to_vec(),
        domain: [lo, hi],
        shifts: st.shifts.clone(),
    };
    let img = out.join(format!("{stem}.straight.{}", cfg.image_format()?.extension()));
    let toml = out.join(format!("{stem}.straight.toml"));
    write_frame(&img, &st.frame)?;
    write_toml(&toml, &rec)?;
    Ok(vec![img, toml])
}

/// Crops and straightens each frame, writing `<stem>.straight.<ext>` and
/// `<stem>.straight.toml`.
pub fn cmd_straighten(inputs: &[PathBuf], curves: Option<&Path>, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let frames = expand_inputs(inputs)?;
    let results: Vec<_> = frames.par_iter().map(|p| (p.clone(), straighten_one(p, curves, out, cfg))).collect();
    Ok(collect(results)?.into_iter().flatten().collect())
}
