//! SubQ / pleura / Merlin partition and the masked input variants.
//!
//! Each variant is a [`MaskStrategy`] registered by name in a
//! [`StrategyRegistry`]; the seven built-in variants keep a fixed subset of
//! regions and zero the rest, one of them on the straightened frame.

use crate::curves::{straighten_segmented, StraightenParams};
use crate::error::{Error, Result};
use crate::pleura::{round_row, PleuralSegmentation};
use crate::types::Frame;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Subq,
    Pleura,
    Merlin,
}

/// Total per-pixel partition into regions, ordered SubQ, pleura, Merlin
/// from top to bottom within each column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    labels: Vec<Region>,
}

impl RegionMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Region {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }

    /// Checks the top-to-bottom region order in every column.
    pub fn is_column_ordered(&self) -> bool {
        (0..self.width).all(|x| (1..self.height).all(|y| self.get(x, y - 1) <= self.get(x, y)))
    }
}

/// Rows `< round(upper)` are SubQ, rows in `[round(upper), round(lower)]`
/// are pleura, the rest Merlin.
pub fn region_partition(width: usize, height: usize, upper: &[f64], lower: &[f64]) -> Result<RegionMask> {
    if upper.len() != width || lower.len() != width {
        return Err(Error::DimensionMismatch {
            expected: format!("{width} boundary rows"),
            actual: format!("{} upper, {} lower", upper.len(), lower.len()),
        });
    }
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height as i64 {
        for x in 0..width {
            let u = round_row(upper[x]);
            let l = round_row(lower[x]).max(u - 1);
            labels.push(if y < u {
                Region::Subq
            } else if y <= l {
                Region::Pleura
            } else {
                Region::Merlin
            });
        }
    }
    Ok(RegionMask { width, height, labels })
}

pub fn partition_segmentation(seg: &PleuralSegmentation) -> RegionMask {
    region_partition(seg.width(), seg.height(), &seg.upper_rows, &seg.lower_rows)
        .expect("segmentation rows match its width")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegionSet {
    pub subq: bool,
    pub pleura: bool,
    pub merlin: bool,
}

impl RegionSet {
    pub const ALL: RegionSet = RegionSet { subq: true, pleura: true, merlin: true };

    pub fn contains(self, region: Region) -> bool {
        match region {
            Region::Subq => self.subq,
            Region::Pleura => self.pleura,
            Region::Merlin => self.merlin,
        }
    }
}

/// Zeroes pixels whose region is not in `keep`. With `context_margin > 0`,
/// excluded pixels within that many rows of a kept pixel in the same
/// column are retained as well.
pub fn mask_regions(frame: &Frame, mask: &RegionMask, keep: RegionSet, context_margin: usize) -> Result<Frame> {
    if frame.dims() != (mask.width, mask.height) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", mask.width, mask.height),
            actual: format!("{}x{}", frame.width(), frame.height()),
        });
    }
    let (w, h) = frame.dims();
    let kept = |x: usize, y: usize| {
        let lo = y.saturating_sub(context_margin);
        let hi = (y + context_margin).min(h - 1);
        (lo..=hi).any(|yy| keep.contains(mask.get(x, yy)))
    };
    Ok(Frame::from_fn(w, h, |x, y| {
        if keep.contains(mask.get(x, y)) || (context_margin > 0 && kept(x, y)) {
            frame.get(x, y)
        } else {
            0.0
        }
    }))
}

/// The seven ablation inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Subq,
    Pleural,
    Merlin,
    SubqPleural,
    PleuralMerlin,
    StraightenedPleuralMerlin,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Original,
        Variant::Subq,
        Variant::Pleural,
        Variant::Merlin,
        Variant::SubqPleural,
        Variant::PleuralMerlin,
        Variant::StraightenedPleuralMerlin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Subq => "subq",
            Variant::Pleural => "pleural",
            Variant::Merlin => "merlin",
            Variant::SubqPleural => "subq+pleural",
            Variant::PleuralMerlin => "pleural+merlin",
            Variant::StraightenedPleuralMerlin => "straightened-pleural+merlin",
        }
    }

    pub fn from_name(name: &str) -> Result<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name).ok_or_else(|| Error::UnknownVariant(name.to_string()))
    }

    pub fn regions(self) -> RegionSet {
        let set = |subq, pleura, merlin| RegionSet { subq, pleura, merlin };
        match self {
            Variant::Original => RegionSet::ALL,
            Variant::Subq => set(true, false, false),
            Variant::Pleural => set(false, true, false),
            Variant::Merlin => set(false, false, true),
            Variant::SubqPleural => set(true, true, false),
            Variant::PleuralMerlin | Variant::StraightenedPleuralMerlin => set(false, true, true),
        }
    }

    pub fn is_straightened(self) -> bool {
        self == Variant::StraightenedPleuralMerlin
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Applies a variant to a frame and its region mask. For the straightened
/// variant the caller passes the straightened frame and its mask.
pub fn apply_variant(frame: &Frame, mask: &RegionMask, variant: Variant) -> Result<Frame> {
    mask_regions(frame, mask, variant.regions(), 0)
}

/// Inputs shared by every strategy for one frame.
pub struct VariantInput<'a> {
    pub frame: &'a Frame,
    pub mask: &'a RegionMask,
    /// Straightened frame and its re-derived mask, when any selected
    /// strategy asked for it.
    pub straightened: Option<(&'a Frame, &'a RegionMask)>,
    pub context_margin: usize,
}

pub trait MaskStrategy: Send + Sync {
    fn name(&self) -> &str;

    fn needs_straightening(&self) -> bool {
        false
    }

    fn render(&self, input: &VariantInput<'_>) -> Result<Frame>;
}

/// Keeps a fixed region set, optionally on the straightened frame.
pub struct RegionStrategy {
    variant: Variant,
}

impl RegionStrategy {
    pub fn new(variant: Variant) -> Self {
        Self { variant }
    }
}

impl MaskStrategy for RegionStrategy {
    fn name(&self) -> &str {
        self.variant.name()
    }

    fn needs_straightening(&self) -> bool {
        self.variant.is_straightened()
    }

    fn render(&self, input: &VariantInput<'_>) -> Result<Frame> {
        let (frame, mask) = if self.variant.is_straightened() {
            input
                .straightened
                .ok_or_else(|| Error::InvalidParameter(format!("{} requires a straightened frame", self.variant)))?
        } else {
            (input.frame, input.mask)
        };
        if self.variant == Variant::Original {
            return Ok(frame.clone());
        }
        mask_regions(frame, mask, self.variant.regions(), input.context_margin)
    }
}

/// Name-indexed collection of mask strategies.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn MaskStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        for v in Variant::ALL {
            reg.register(Box::new(RegionStrategy::new(v))).expect("builtin names are unique");
        }
        reg
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn register(&mut self, strategy: Box<dyn MaskStrategy>) -> Result<()> {
        if self.get(strategy.name()).is_some() {
            return Err(Error::InvalidParameter(format!("strategy `{}` already registered", strategy.name())));
        }
        self.entries.push(strategy);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn MaskStrategy> {
        self.entries.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|s| s.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves `all` or a single name to strategies in registration order.
    pub fn select(&self, selector: &str) -> Result<Vec<&dyn MaskStrategy>> {
        if selector == "all" {
            return Ok(self.entries.iter().map(|s| s.as_ref()).collect());
        }
        self.get(selector).map(|s| vec![s]).ok_or_else(|| Error::UnknownVariant(selector.to_string()))
    }

    /// Renders `strategies` for one segmented frame, straightening at most
    /// once when any of them needs it.
    pub fn render(
        &self,
        strategies: &[&dyn MaskStrategy],
        frame: &Frame,
        seg: &PleuralSegmentation,
        params: &MaskingParams,
    ) -> Result<Vec<(String, Frame)>> {
        let mask = partition_segmentation(seg);
        let straightened = if strategies.iter().any(|s| s.needs_straightening()) {
            Some(straightened_input(frame, seg, &params.straighten)?)
        } else {
            None
        };
        let input = VariantInput {
            frame,
            mask: &mask,
            straightened: straightened.as_ref().map(|(f, m)| (f, m)),
            context_margin: params.context_margin,
        };
        strategies.iter().map(|s| Ok((s.name().to_string(), s.render(&input)?))).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskingParams {
    pub straighten: StraightenParams,
    pub context_margin: usize,
}

/// Crop and straighten, then re-derive the partition with the pleural band
/// laid flat: upper edge at `target_row`, lower edge at `target_row` plus
/// the column's band thickness.
pub fn straightened_input(
    frame: &Frame,
    seg: &PleuralSegmentation,
    params: &StraightenParams,
) -> Result<(Frame, RegionMask)> {
    let (s, _) = straighten_segmented(frame, seg, params)?;
    let target = params.target_row as f64;
    let upper = vec![target; seg.width()];
    let lower: Vec<f64> = seg.lower_rows.iter().zip(&seg.upper_rows).map(|(l, u)| target + (l - u)).collect();
    let mask = region_partition(seg.width(), seg.height(), &upper, &lower)?;
    Ok((s.frame, mask))
}

pub fn make_all_variants(
    frame: &Frame,
    seg: &PleuralSegmentation,
    straighten: &StraightenParams,
) -> Result<BTreeMap<Variant, Frame>> {
    let registry = StrategyRegistry::default();
    let all = registry.select("all")?;
    let params = MaskingParams { straighten: straighten.clone(), context_margin: 0 };
    registry
        .render(&all, frame, seg, &params)?
        .into_iter()
        .map(|(name, f)| Ok((Variant::from_name(&name)?, f)))
        .collect()
}
