//! Command-line front end for the lung ultrasound preprocessing crate.
//!
//! Exit codes: 0 success, 1 other failure, 2 I/O or parse failure,
//! 3 no pleural-line candidates, 4 bad configuration or inconsistent
//! phantom spec, 5 frame/curve mismatch, 6 patient overlap between splits.

pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;

use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use error::{CliError, CliResult, ExitKind};
use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "lus", version, about = "Lung ultrasound preprocessing: segmentation, straightening, masking")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Mask variant name or `all`
    #[arg(long, global = true, value_name = "NAME")]
    pub variant: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment the pleural line of each frame
    Segment {
        /// Image files or directories of images
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the frame with the band edges drawn in
        #[arg(long)]
        overlay: bool,
    },
    /// Write masked variants of each frame
    Mask {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory of `<stem>.seg.toml` records; frames are segmented when omitted
        #[arg(long, value_name = "DIR")]
        curves: Option<PathBuf>,
    },
    /// Crop above the pleura and straighten each frame
    Straighten {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        curves: Option<PathBuf>,
    },
    /// Sample, segment and mask every clip of a dataset index
    Pipeline {
        /// CSV with columns clip_id,path,score,patient_id,split
        index: Option<PathBuf>,
        /// Flip/scale augmentation of training clips
        #[arg(long)]
        augment: bool,
    },
    /// Accuracy, F1 and ROC/AUC from a scores file
    Metrics {
        /// CSV with header clip_id,true,score0,score1,score2,score3
        scores: PathBuf,
    },
    /// Generate synthetic phantom clips with ground truth
    Phantom {
        /// TOML phantom spec files
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        /// Phantoms per spec file
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

pub fn resolve_config(common: &CommonArgs) -> CliResult<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(v) = &common.variant {
        cfg.variant = v.clone();
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

/// Stdout output of a successful command.
fn execute(cli: Cli) -> CliResult<String> {
    let mut cfg = resolve_config(&cli.common)?;
    let paths = match cli.command {
        Command::Segment { inputs, overlay } => commands::cmd_segment(&inputs, overlay, &cfg)?,
        Command::Mask { inputs, curves } => commands::cmd_mask(&inputs, curves.as_deref(), &cfg)?,
        Command::Straighten { inputs, curves } => commands::cmd_straighten(&inputs, curves.as_deref(), &cfg)?,
        Command::Pipeline { index, augment } => {
            cfg.augment |= augment;
            let index = index
                .or_else(|| cfg.index.clone())
                .ok_or_else(|| CliError::new(ExitKind::Config, "no dataset index; pass INDEX or set `index`"))?;
            commands::cmd_pipeline(&index, &cfg)?;
            vec![cfg.require_out()?.join("manifest.toml")]
        }
        Command::Metrics { scores } => return commands::cmd_metrics(&scores, cfg.out.as_deref()),
        Command::Phantom { specs, count } => commands::cmd_phantom(&specs, count, &cfg)?,
    };
    if std::io::stdout().is_terminal() {
        return Ok(String::new());
    }
    Ok(paths.iter().map(|p| format!("{}\n", p.display())).collect())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitKind::Input.code() } else { 0 };
        }
    };
    match execute(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.kind.code()
        }
    }
}
