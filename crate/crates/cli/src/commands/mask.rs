use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::inputs::{collect, expand_inputs, segmentation_for, stem};
use lus_core::io::{read_frame, write_frame};
use lus_core::masking::{MaskStrategy, StrategyRegistry};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

fn mask_one(
    path: &Path,
    curves: Option<&Path>,
    registry: &StrategyRegistry,
    strategies: &[&dyn MaskStrategy],
    out: &Path,
    cfg: &PipelineConfig,
) -> CliResult<Vec<PathBuf>> {
    let frame = read_frame(path)?;
    let stem = stem(path);
    let seg = segmentation_for(&frame, &stem, curves, &cfg.segmentation)?;
    let ext = cfg.image_format()?.extension();
    let mut written = Vec::new();
    for (name, img) in registry.render(strategies, &frame, &seg, &cfg.masking())? {
        let p = out.join(format!("{stem}.{name}.{ext}"));
        write_frame(&p, &img)?;
        written.push(p);
    }
    Ok(written)
}

/// Writes `<stem>.<variant>.<ext>` for each input frame and selected
/// variant. Segmentations come from `<curves>/<stem>.seg.toml` when
/// `curves` is given.
pub fn cmd_mask(inputs: &[PathBuf], curves: Option<&Path>, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let out = cfg.require_out()?;
    let registry = StrategyRegistry::default();
    let strategies = registry.select(&cfg.variant)?;
    let frames = expand_inputs(inputs)?;
    let results: Vec<_> =
        frames.par_iter().map(|p| (p.clone(), mask_one(p, curves, &registry, &strategies, out, cfg))).collect();
    Ok(collect(results)?.into_iter().flatten().collect())
}
