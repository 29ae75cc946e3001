use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::inputs::{collect, expand_inputs, record_path, stem};
use lus_core::io::{read_frame, write_frame, write_toml, SegmentationRecord};
use lus_core::pleura::{round_row, segment_pleura, PleuralSegmentation};
use lus_core::Frame;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Band mask as a 0/255 image.
pub fn band_image(seg: &PleuralSegmentation) -> Frame {
    Frame::from_fn(seg.width(), seg.height(), |x, y| if seg.band.get(x, y) { 255.0 } else { 0.0 })
}

/// The frame with both band edges drawn at 255.
pub fn overlay_image(frame: &Frame, seg: &PleuralSegmentation) -> Frame {
    let h = frame.height() as i64;
    let mut px = frame.pixels().to_vec();
    for x in 0..frame.width() {
        for row in [seg.upper_rows[x], seg.lower_rows[x]] {
            let y = round_row(row);
            if (0..h).contains(&y) {
                px[y as usize * frame.width() + x] = 255.0;
            }
        }
    }
    Frame::new(frame.width(), frame.height(), px).expect("same dimensions")
}

fn segment_one(path: &Path, out: &Path, overlay: bool, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let frame = read_frame(path)?;
    let seg = segment_pleura(&frame, &cfg.segmentation)?;
    let stem = stem(path);
    let ext = cfg.image_format()?.extension();
    let rec_path = record_path(out, &stem);
    write_toml(&rec_path, &SegmentationRecord::from(&seg))?;
    let band_path = out.join(format!("{stem}.band.{ext}"));
    write_frame(&band_path, &band_image(&seg))?;
    let mut written = vec![rec_path, band_path];
    if overlay {
        let p = out.join(format!("{stem}.overlay.{ext}"));
        write_frame(&p, &overlay_image(&frame, &seg))?;
        written.push(p);
    }
    Ok(written)
}

/// Segments every input frame and writes `<stem>.seg.toml`,
/// `<stem>.band.<ext>` and optionally `<stem>.overlay.<ext>`.
pub fn cmd_segment(inputs: &[PathBuf], overlay: bool, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let frames = expand_inputs(inputs)?;
    let results: Vec<(PathBuf, CliResult<Vec<PathBuf>>)> =
        frames.par_iter().map(|p| (p.clone(), segment_one(p, out, overlay, cfg))).collect();
    Ok(collect(results)?.into_iter().flatten().collect())
}
