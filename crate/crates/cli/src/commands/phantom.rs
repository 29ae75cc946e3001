use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, ExitKind};
use lus_core::clips::clip_seed;
use lus_core::io::{read_toml, write_atomic, write_frame, write_toml, TruthRecord};
use lus_core::phantom::{generate_seeded, severity_of, PhantomSpec};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn phantom_id(n: usize) -> String {
    format!("phantom_{n:03}")
}

fn load_spec(path: &Path) -> CliResult<PhantomSpec> {
    let spec: PhantomSpec = read_toml(path).map_err(|e| {
        let kind = match e {
            lus_core::Error::Parse(_) => ExitKind::Config,
            _ => ExitKind::Input,
        };
        CliError::new(kind, format!("{}: {e}", path.display()))
    })?;
    spec.validate().map_err(|e| CliError::from(e).context(path.display()))?;
    severity_of(&spec).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(spec)
}

fn write_phantom(dir: &Path, spec: &PhantomSpec) -> CliResult<u8> {
    let (clip, truth) = generate_seeded(spec)?;
    for (j, f) in clip.frames().iter().enumerate() {
        write_frame(&dir.join(format!("frame_{j:03}.pgm")), f)?;
    }
    write_toml(&dir.join("spec.toml"), spec)?;
    write_toml(&dir.join("truth.toml"), &TruthRecord::new(&truth))?;
    Ok(truth.severity.value())
}

/// Generates `count` phantoms per spec file under `<out>/phantom_NNN/`
/// (frames, resolved spec, truth) plus an `index.csv` listing them, one
/// patient per phantom, all in the `train` split. Phantom `n` uses the seed
/// derived from the run seed and its id.
pub fn cmd_phantom(specs: &[PathBuf], count: usize, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let seed = cfg.require_seed()?;
    let out = cfg.require_out()?;
    if specs.is_empty() {
        return Err(CliError::new(ExitKind::Input, "no phantom spec files"));
    }
    let loaded = specs.iter().map(|p| load_spec(p)).collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(String, PhantomSpec)> = loaded
        .iter()
        .flat_map(|s| std::iter::repeat_n(s, count))
        .enumerate()
        .map(|(n, s)| {
            let id = phantom_id(n);
            let spec = PhantomSpec { seed: clip_seed(seed, &id), ..s.clone() };
            (id, spec)
        })
        .collect();
    let scores = jobs
        .par_iter()
        .map(|(id, spec)| write_phantom(&out.join(id), spec).map_err(|e| e.context(id)))
        .collect::<CliResult<Vec<u8>>>()?;
    let mut index = String::from("clip_id,path,score,patient_id,split\n");
    let mut dirs = Vec::with_capacity(jobs.len());
    for ((id, _), score) in jobs.iter().zip(&scores) {
        let _ = writeln!(index, "{id},{id},{score},{id},train");
        dirs.push(out.join(id));
    }
    write_atomic(&out.join("index.csv"), index.as_bytes())?;
    Ok(dirs)
}
