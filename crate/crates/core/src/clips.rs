//! Clip-level dataset procedures: temporal frame sampling, augmentation,
//! resizing and minority-class upsampling.

use crate::error::{Error, Result};
use crate::imgops::resize_bilinear;
use crate::types::{Clip, Frame, SeverityScore};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// RNG used by every stochastic operation in the crate.
pub type ClipRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub n_segments: usize,
    pub target_size: usize,
    pub flip_prob: f64,
    pub scale_range: (f64, f64),
    pub seed: u64,
    pub sampler: String,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            n_segments: 18,
            target_size: 224,
            flip_prob: 0.5,
            scale_range: (0.8, 1.1),
            seed: 0,
            sampler: SharedOffsetSampler::NAME.to_string(),
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if self.n_segments == 0 {
            return Err(Error::InvalidParameter("n_segments must be >= 1".into()));
        }
        if self.target_size == 0 {
            return Err(Error::InvalidParameter("target_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidParameter(format!("flip_prob {} not in [0, 1]", self.flip_prob)));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!("scale range [{lo}, {hi}]")));
        }
        if sampler(&self.sampler).is_none() {
            return Err(Error::InvalidParameter(format!("unknown sampler `{}`", self.sampler)));
        }
        Ok(())
    }
}

/// Seed of the stream for one clip, derived from the run seed and the id.
pub fn clip_seed(seed: u64, clip_id: &str) -> u64 {
    // FNV-1a over the id, folded into the seed with a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in clip_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent, reproducible RNG stream for one clip.
pub fn clip_rng(seed: u64, clip_id: &str) -> ClipRng {
    ClipRng::seed_from_u64(clip_seed(seed, clip_id))
}

/// Index `floor(i·T/n) + offset` for each segment `i`, or `i mod T` sorted
/// when the clip has fewer than `n` frames.
pub fn segment_indices(clip_len: usize, n_segments: usize, offset: usize) -> Result<Vec<usize>> {
    if clip_len == 0 {
        return Err(Error::EmptyClip);
    }
    if n_segments == 0 {
        return Err(Error::InvalidParameter("n_segments must be >= 1".into()));
    }
    if clip_len < n_segments {
        let mut idx: Vec<usize> = (0..n_segments).map(|i| i % clip_len).collect();
        idx.sort_unstable();
        return Ok(idx);
    }
    let stride = clip_len / n_segments;
    if offset >= stride {
        return Err(Error::InvalidParameter(format!("offset {offset} must be < {stride}")));
    }
    Ok((0..n_segments).map(|i| i * clip_len / n_segments + offset).collect())
}

/// Picks `n_segments` frame indices from a clip of `clip_len` frames.
pub trait FrameSampler: Send + Sync {
    fn name(&self) -> &'static str;

    fn sample(&self, clip_len: usize, n_segments: usize, rng: &mut ClipRng) -> Result<Vec<usize>>;
}

/// One random start offset shared by all segments.
pub struct SharedOffsetSampler;

impl SharedOffsetSampler {
    pub const NAME: &'static str = "shared-offset";
}

impl FrameSampler for SharedOffsetSampler {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn sample(&self, clip_len: usize, n_segments: usize, rng: &mut ClipRng) -> Result<Vec<usize>> {
        if clip_len == 0 {
            return Err(Error::EmptyClip);
        }
        let stride = clip_len / n_segments.max(1);
        let offset = if stride > 0 { rng.random_range(0..stride) } else { 0 };
        segment_indices(clip_len, n_segments, offset)
    }
}

/// An independent uniform offset inside each segment.
pub struct IndependentOffsetSampler;

impl FrameSampler for IndependentOffsetSampler {
    fn name(&self) -> &'static str {
        "independent-offset"
    }

    fn sample(&self, clip_len: usize, n_segments: usize, rng: &mut ClipRng) -> Result<Vec<usize>> {
        if clip_len < n_segments {
            return segment_indices(clip_len, n_segments, 0);
        }
        Ok((0..n_segments)
            .map(|i| {
                let start = i * clip_len / n_segments;
                let end = (i + 1) * clip_len / n_segments;
                rng.random_range(start..end)
            })
            .collect())
    }
}

pub fn samplers() -> Vec<Box<dyn FrameSampler>> {
    vec![Box::new(SharedOffsetSampler), Box::new(IndependentOffsetSampler)]
}

pub fn sampler(name: &str) -> Option<Box<dyn FrameSampler>> {
    samplers().into_iter().find(|s| s.name() == name)
}

pub fn sample_frame_indices(clip_len: usize, spec: &SampleSpec, rng: &mut ClipRng) -> Result<Vec<usize>> {
    let s =
        sampler(&spec.sampler).ok_or_else(|| Error::InvalidParameter(format!("unknown sampler `{}`", spec.sampler)))?;
    s.sample(clip_len, spec.n_segments, rng)
}

/// Transform parameters drawn once per clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub flip: bool,
    pub scale: f64,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation { flip: false, scale: 1.0 };

    pub fn draw(spec: &SampleSpec, rng: &mut ClipRng) -> Self {
        let flip = rng.random::<f64>() < spec.flip_prob;
        let (lo, hi) = spec.scale_range;
        let scale = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        Self { flip, scale }
    }

    pub fn apply(&self, frame: &Frame) -> Frame {
        let flipped = if self.flip { frame.flip_horizontal() } else { frame.clone() };
        if self.scale == 1.0 {
            return flipped;
        }
        let s = self.scale;
        flipped.map(|v| (v * s).clamp(0.0, 255.0))
    }
}

pub fn augment_clip(clip: &Clip, spec: &SampleSpec, rng: &mut ClipRng) -> Clip {
    let aug = Augmentation::draw(spec, rng);
    apply_augmentation(clip, aug)
}

pub fn apply_augmentation(clip: &Clip, aug: Augmentation) -> Clip {
    let frames = clip.frames().iter().map(|f| aug.apply(f)).collect();
    let out = Clip::new(frames).expect("augmentation keeps dimensions");
    match clip.fps() {
        Some(fps) => out.with_fps(fps),
        None => out,
    }
}

pub fn preprocess_frame(frame: &Frame, spec: &SampleSpec) -> Result<Frame> {
    resize_bilinear(frame, spec.target_size, spec.target_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub clip_id: String,
    pub score: SeverityScore,
    #[serde(default)]
    pub path: String,
    #[serde(default)]
    pub patient_id: String,
    #[serde(default)]
    pub split: String,
}

impl IndexEntry {
    pub fn new(clip_id: impl Into<String>, score: SeverityScore) -> Self {
        Self { clip_id: clip_id.into(), score, path: String::new(), patient_id: String::new(), split: String::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<IndexEntry>,
}

impl DatasetIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Self {
        Self { entries }
    }

    pub fn class_counts(&self) -> [usize; SeverityScore::COUNT] {
        let mut counts = [0; SeverityScore::COUNT];
        for e in &self.entries {
            counts[e.score.index()] += 1;
        }
        counts
    }

    /// Entries whose `split` equals `name`.
    pub fn split(&self, name: &str) -> DatasetIndex {
        DatasetIndex::new(self.entries.iter().filter(|e| e.split == name).cloned().collect())
    }
}

/// Balances classes by replicating minority-class entries up to the
/// majority count. Full cycles are replicated exactly; the remainder is a
/// seeded draw without replacement. Returns shuffled entry indices.
pub fn upsample_dataset(index: &DatasetIndex, rng: &mut ClipRng) -> Result<Vec<usize>> {
    let counts = index.class_counts();
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(missing as u8));
    }
    let target = *counts.iter().max().expect("four classes");
    let mut out = Vec::with_capacity(target * SeverityScore::COUNT);
    for class in SeverityScore::ALL {
        let members: Vec<usize> =
            index.entries.iter().enumerate().filter(|(_, e)| e.score == class).map(|(i, _)| i).collect();
        let n = members.len();
        for _ in 0..target / n {
            out.extend_from_slice(&members);
        }
        let rem = target % n;
        if rem > 0 {
            let mut picked = index::sample(rng, n, rem).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| members[i]));
        }
    }
    out.shuffle(rng);
    Ok(out)
}
