use crate::error::{CliError, CliResult, ExitKind};
use lus_core::clips::SampleSpec;
use lus_core::curves::StraightenParams;
use lus_core::io::ImageFormat;
use lus_core::masking::MaskingParams;
use lus_core::pleura::SegmentationParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Settings shared by every command, read from a TOML file. Command-line
/// flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Run seed; required by `pipeline` and `phantom`. Overrides
    /// `sampling.seed`.
    pub seed: Option<u64>,
    /// Mask strategy name or `all`.
    pub variant: String,
    /// Output image format, `pgm` or `png`.
    pub format: String,
    pub out: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Rows of the neighbouring regions kept around each selected region.
    pub context_margin: usize,
    /// Flip/scale augmentation of training clips in `pipeline`.
    pub augment: bool,
    pub segmentation: SegmentationParams,
    pub straighten: StraightenParams,
    pub sampling: SampleSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            variant: "all".into(),
            format: "pgm".into(),
            out: None,
            index: None,
            context_margin: 0,
            augment: false,
            segmentation: SegmentationParams::default(),
            straighten: StraightenParams::default(),
            sampling: SampleSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ExitKind::Input, format!("{}: {e}", path.display())))?;
        let cfg: Self = lus_core::io::from_toml(&text)
            .map_err(|e| CliError::new(ExitKind::Config, format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |e: lus_core::Error| CliError::new(ExitKind::Config, e.to_string());
        self.segmentation.validate().map_err(bad)?;
        self.sampling.validate().map_err(bad)?;
        self.image_format()?;
        Ok(())
    }

    pub fn image_format(&self) -> CliResult<ImageFormat> {
        match self.format.as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            f => Err(CliError::new(ExitKind::Config, format!("unknown image format `{f}`"))),
        }
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::new(ExitKind::Config, "this command needs --seed or `seed` in the config"))
    }

    pub fn require_out(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::new(ExitKind::Config, "no output directory; pass --out or set `out`"))
    }

    pub fn masking(&self) -> MaskingParams {
        MaskingParams { straighten: self.straighten.clone(), context_margin: self.context_margin }
    }

    /// Sampling spec with the run seed filled in.
    pub fn sample_spec(&self) -> SampleSpec {
        let mut s = self.sampling.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig = lus_core::io::from_toml("seed = 9\n[segmentation]\nwork_size = 100\n").unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.segmentation.work_size, 100);
        assert_eq!(cfg.segmentation.poly_degree, 4);
        assert_eq!(cfg.variant, "all");
        assert_eq!(cfg.sample_spec().seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(lus_core::io::from_toml::<PipelineConfig>("sed = 9\n").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let cfg = PipelineConfig { format: "jpg".into(), ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().kind, ExitKind::Config);
        let mut cfg = PipelineConfig::default();
        cfg.sampling.flip_prob = 2.0;
        assert_eq!(cfg.validate().unwrap_err().kind, ExitKind::Config);
        assert_eq!(PipelineConfig::default().require_seed().unwrap_err().kind, ExitKind::Config);
    }
}
