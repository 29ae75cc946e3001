use crate::error::{CliError, CliResult, ExitKind};
use lus_core::io::{list_frames, read_toml, SegmentationRecord};
use lus_core::pleura::{segment_pleura, PleuralSegmentation, SegmentationParams};
use lus_core::Frame;
use std::path::{Path, PathBuf};

/// Expands directories to the images they contain; files pass through.
pub fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_frames(p)?);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::new(ExitKind::Input, "no input frames"));
    }
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "frame".into())
}

pub fn record_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.seg.toml"))
}

/// The frame's segmentation: loaded from `curves` when given, computed
/// otherwise.
pub fn segmentation_for(
    frame: &Frame,
    stem: &str,
    curves: Option<&Path>,
    params: &SegmentationParams,
) -> CliResult<PleuralSegmentation> {
    let Some(dir) = curves else {
        return Ok(segment_pleura(frame, params)?);
    };
    let path = record_path(dir, stem);
    let rec: SegmentationRecord = read_toml(&path).map_err(|e| CliError::from(e).context(path.display()))?;
    if (rec.width, rec.height) != frame.dims() || rec.lower_rows.len() != rec.width {
        return Err(CliError::new(
            ExitKind::Mismatch,
            format!(
                "{}: record is {}x{}, frame is {}x{}",
                path.display(),
                rec.width,
                rec.height,
                frame.width(),
                frame.height()
            ),
        ));
    }
    rec.to_segmentation().map_err(|e| CliError::from(e).context(path.display()))
}

/// Reports every failure on stderr and folds them into one error carrying
/// the first failure's exit kind.
pub fn collect<T>(results: Vec<(PathBuf, CliResult<T>)>) -> CliResult<Vec<T>> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first: Option<ExitKind> = None;
    let mut failed = 0;
    for (path, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("error: {}: {}", path.display(), e.message);
                first.get_or_insert(e.kind);
                failed += 1;
            }
        }
    }
    match first {
        None => Ok(ok),
        Some(kind) => Err(CliError::new(kind, format!("{failed} of {total} inputs failed"))),
    }
}
