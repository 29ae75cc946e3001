use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, ExitKind};
use lus_core::clips::{
    clip_rng, clip_seed, preprocess_frame, sampler, upsample_dataset, Augmentation, DatasetIndex, IndexEntry,
};
use lus_core::io::{list_frames, read_frame, write_frame, write_toml};
use lus_core::masking::{MaskStrategy, StrategyRegistry};
use lus_core::pleura::{segment_pleura, PleuralSegmentation};
use lus_core::{Error, Frame, SeverityScore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Stream name for the class-balancing draw; cannot clash with a clip id
/// read from CSV.
const UPSAMPLE_STREAM: &str = "\u{0}upsample";

pub fn read_index(path: &Path) -> CliResult<DatasetIndex> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::new(ExitKind::Input, format!("{}: {e}", path.display())))?;
    let entries = rdr
        .deserialize::<IndexEntry>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::new(ExitKind::Input, format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::new(ExitKind::Input, format!("{}: empty index", path.display())));
    }
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.clip_id.as_str()) {
            return Err(CliError::new(ExitKind::Input, format!("duplicate clip id `{}`", e.clip_id)));
        }
    }
    Ok(DatasetIndex::new(entries))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub clips: usize,
    pub patients: usize,
    pub class_counts: [usize; SeverityScore::COUNT],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Patients declared in more than one split.
    pub overlapping_patients: Vec<String>,
    pub splits: BTreeMap<String, SplitSummary>,
}

/// Per-split sizes and the patients that appear in more than one split.
/// Entries without a patient id or split are not checked.
pub fn split_report(index: &DatasetIndex) -> SplitReport {
    let mut patient_splits: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut patients: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut splits: BTreeMap<String, SplitSummary> = BTreeMap::new();
    for e in &index.entries {
        let s = splits.entry(e.split.clone()).or_default();
        s.clips += 1;
        s.class_counts[e.score.index()] += 1;
        if !e.patient_id.is_empty() {
            patients.entry(e.split.as_str()).or_default().insert(&e.patient_id);
            if !e.split.is_empty() {
                patient_splits.entry(&e.patient_id).or_default().insert(&e.split);
            }
        }
    }
    for (name, s) in splits.iter_mut() {
        s.patients = patients.get(name.as_str()).map_or(0, BTreeSet::len);
    }
    let overlapping_patients =
        patient_splits.into_iter().filter(|(_, s)| s.len() > 1).map(|(p, _)| p.to_string()).collect();
    SplitReport { overlapping_patients, splits }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub score: u8,
    pub patient_id: String,
    pub split: String,
    /// Seed of the clip's random stream.
    pub seed: u64,
    pub frame_indices: Vec<usize>,
    pub flip: bool,
    pub scale: f64,
    /// Sampled positions whose segmentation failed and that were masked
    /// with the nearest successfully segmented frame's curve.
    pub fallback_frames: Vec<usize>,
    /// Output directory per variant, relative to the output root.
    pub outputs: BTreeMap<String, String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub sampler: String,
    pub n_segments: usize,
    pub target_size: usize,
    pub augment: bool,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingList {
    /// Split the list was drawn from; empty when the index declares no
    /// `train` split and every clip is used.
    pub source_split: String,
    pub class_counts: [usize; SeverityScore::COUNT],
    pub balanced_counts: [usize; SeverityScore::COUNT],
    pub clip_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub training: TrainingList,
    pub split_report: SplitReport,
    pub clips: Vec<ClipRecord>,
}

fn clip_frame_paths(index_dir: &Path, entry: &IndexEntry) -> CliResult<Vec<PathBuf>> {
    let rel = if entry.path.is_empty() { entry.clip_id.as_str() } else { entry.path.as_str() };
    let p = index_dir.join(rel);
    let paths = if p.is_dir() { list_frames(&p)? } else { vec![p] };
    if paths.is_empty() {
        return Err(Error::EmptyClip.into());
    }
    Ok(paths)
}

/// Each position's segmentation, substituting the nearest successfully
/// segmented position (earlier wins ties) where no candidates were found.
fn with_fallback(
    segs: Vec<lus_core::Result<PleuralSegmentation>>,
) -> CliResult<(Vec<PleuralSegmentation>, Vec<usize>)> {
    let good: Vec<usize> = segs.iter().enumerate().filter(|(_, s)| s.is_ok()).map(|(i, _)| i).collect();
    if good.is_empty() {
        return Err(Error::NoCandidates.into());
    }
    let mut fallback = Vec::new();
    let mut resolved: Vec<Option<PleuralSegmentation>> = Vec::with_capacity(segs.len());
    for (i, s) in segs.iter().enumerate() {
        match s {
            Ok(s) => resolved.push(Some(s.clone())),
            Err(Error::NoCandidates) => {
                fallback.push(i);
                resolved.push(None);
            }
            Err(e) => return Err(CliError::from(e.clone()).context(format!("frame position {i}"))),
        }
    }
    let out = (0..segs.len())
        .map(|i| {
            resolved[i].clone().unwrap_or_else(|| {
                let j = *good.iter().min_by_key(|&&j| (j.abs_diff(i), j)).expect("non-empty");
                resolved[j].clone().expect("successful position")
            })
        })
        .collect();
    Ok((out, fallback))
}

struct ClipJob<'a> {
    cfg: &'a PipelineConfig,
    seed: u64,
    index_dir: &'a Path,
    out: &'a Path,
    registry: &'a StrategyRegistry,
    strategies: &'a [&'a dyn MaskStrategy],
}

impl ClipJob<'_> {
    fn run(&self, entry: &IndexEntry, record: &mut ClipRecord) -> CliResult<()> {
        let spec = self.cfg.sample_spec();
        let mut rng = clip_rng(self.seed, &entry.clip_id);
        let paths = clip_frame_paths(self.index_dir, entry)?;
        let sampler = sampler(&spec.sampler).expect("validated sampler");
        let indices = sampler.sample(paths.len(), spec.n_segments, &mut rng)?;
        record.frame_indices = indices.clone();
        let aug = if self.cfg.augment && entry.split == "train" {
            Augmentation::draw(&spec, &mut rng)
        } else {
            Augmentation::IDENTITY
        };
        record.flip = aug.flip;
        record.scale = aug.scale;

        let mut cache: BTreeMap<usize, Frame> = BTreeMap::new();
        for &i in &indices {
            if let Entry::Vacant(slot) = cache.entry(i) {
                slot.insert(preprocess_frame(&read_frame(&paths[i])?, &spec)?);
            }
        }
        let frames: Vec<Frame> = indices.iter().map(|i| aug.apply(&cache[i])).collect();
        if frames.iter().any(|f| f.dims() != frames[0].dims()) {
            return Err(CliError::new(ExitKind::Mismatch, "frames differ in size"));
        }
        let segs = frames.iter().map(|f| segment_pleura(f, &self.cfg.segmentation)).collect();
        let (segs, fallback) = with_fallback(segs)?;
        record.fallback_frames = fallback;

        let ext = self.cfg.image_format()?.extension();
        let params = self.cfg.masking();
        for (k, (frame, seg)) in frames.iter().zip(&segs).enumerate() {
            for (name, img) in self.registry.render(self.strategies, frame, seg, &params)? {
                let rel = format!("clips/{}/{name}", entry.clip_id);
                write_frame(&self.out.join(&rel).join(format!("frame_{k:02}.{ext}")), &img)?;
                record.outputs.insert(name, rel);
            }
        }
        Ok(())
    }
}

/// Samples, resizes, segments and masks every clip of the index, then
/// writes `manifest.toml` with per-clip records, the class-balanced
/// training list and the split report. Fails with exit 6 before any work
/// when a patient appears in two splits; clips that fail are recorded in
/// the manifest and the first failure's exit kind is returned.
pub fn cmd_pipeline(index_path: &Path, cfg: &PipelineConfig) -> CliResult<Manifest> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    let out = cfg.require_out()?;
    let registry = StrategyRegistry::default();
    let strategies = registry.select(&cfg.variant)?;
    let index = read_index(index_path)?;
    let report = split_report(&index);
    if !report.overlapping_patients.is_empty() {
        return Err(CliError::new(
            ExitKind::PatientOverlap,
            format!("patients in more than one split: {}", report.overlapping_patients.join(", ")),
        ));
    }

    let has_train = index.entries.iter().any(|e| e.split == "train");
    let train = if has_train { index.split("train") } else { index.clone() };
    let mut rng = clip_rng(seed, UPSAMPLE_STREAM);
    let picks = upsample_dataset(&train, &mut rng)
        .map_err(|e| CliError::from(e).context("training split must contain every class"))?;
    let clip_ids: Vec<String> = picks.iter().map(|&i| train.entries[i].clip_id.clone()).collect();
    let mut balanced_counts = [0; SeverityScore::COUNT];
    for &i in &picks {
        balanced_counts[train.entries[i].score.index()] += 1;
    }
    let training = TrainingList {
        source_split: if has_train { "train".into() } else { String::new() },
        class_counts: train.class_counts(),
        balanced_counts,
        clip_ids,
    };

    let index_dir = index_path.parent().unwrap_or(Path::new("."));
    let job = ClipJob { cfg, seed, index_dir, out, registry: &registry, strategies: &strategies };
    let results: Vec<(ClipRecord, Option<CliError>)> = index
        .entries
        .par_iter()
        .map(|e| {
            let mut rec = ClipRecord {
                clip_id: e.clip_id.clone(),
                score: e.score.value(),
                patient_id: e.patient_id.clone(),
                split: e.split.clone(),
                seed: clip_seed(seed, &e.clip_id),
                frame_indices: Vec::new(),
                flip: false,
                scale: 1.0,
                fallback_frames: Vec::new(),
                outputs: BTreeMap::new(),
                error: None,
            };
            let err = job.run(e, &mut rec).err().map(|err| err.context(&e.clip_id));
            rec.error = err.as_ref().map(|e| e.message.clone());
            (rec, err)
        })
        .collect();

    let mut first_err = None;
    let mut clips = Vec::with_capacity(results.len());
    for (rec, err) in results {
        if let Some(e) = err {
            eprintln!("error: {}", e.message);
            first_err.get_or_insert(e);
        }
        clips.push(rec);
    }
    let manifest = Manifest {
        run: RunInfo {
            seed,
            sampler: cfg.sampling.sampler.clone(),
            n_segments: cfg.sampling.n_segments,
            target_size: cfg.sampling.target_size,
            augment: cfg.augment,
            variants: strategies.iter().map(|s| s.name().to_string()).collect(),
        },
        training,
        split_report: report,
        clips,
    };
    write_toml(&out.join("manifest.toml"), &manifest)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}
