//! Plumbing behind the `safedrive` binary: run descriptions on disk, batch
//! case discovery and the mapping from failures to exit codes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use safedrive_core::pipeline::{run_safedrive, write_outputs, MetricsReport, PipelineError, PipelineParams, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

/// File name a batch looks for in each case directory.
pub const CASE_FILE: &str = safedrive_synth::case::CASE_FILE;
/// Per-case output directory used by `batch`.
pub const BATCH_OUT_DIR: &str = "out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Pipeline(e) if e.is_config() => EXIT_CONFIG,
            CliError::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))
}

/// Threshold file, or defaults when absent.
pub fn load_params(path: Option<&Path>) -> Result<PipelineParams, CliError> {
    match path {
        None => Ok(PipelineParams::default()),
        Some(p) => {
            PipelineParams::from_toml(&read_text(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Makes every relative path in `config` relative to `base` instead.
pub fn resolve_paths(mut config: RunConfig, base: &Path) -> RunConfig {
    config.manifest = resolve_path(base, &config.manifest);
    config.image = resolve_path(base, &config.image);
    config.truth = config.truth.map(|t| resolve_path(base, &t));
    config
}

/// Reads a `case.toml` run description; relative paths resolve against its directory.
pub fn load_case(path: &Path) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config
        .params
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(resolve_paths(config, path.parent().unwrap_or(Path::new("."))))
}

/// `dir/case.toml` if present, otherwise every `dir/*/case.toml`, sorted.
pub fn find_cases(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let direct = dir.join(CASE_FILE);
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("listing {}: {e}", dir.display())))?;
    let mut cases: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join(CASE_FILE))
        .filter(|p| p.is_file())
        .collect();
    cases.sort();
    if cases.is_empty() {
        return Err(CliError::Config(format!(
            "no {CASE_FILE} found under {}",
            dir.display()
        )));
    }
    Ok(cases)
}

/// Runs one configuration and writes overlay, report and timings into `out`.
pub fn execute(config: &RunConfig, out: &Path) -> Result<MetricsReport, CliError> {
    let output = run_safedrive(config)?;
    write_outputs(&output, out).map_err(|source| PipelineError {
        stage: "write_outputs",
        source,
    })?;
    Ok(output.report)
}

#[derive(Debug)]
pub struct CaseOutcome {
    pub case: PathBuf,
    pub result: Result<MetricsReport, CliError>,
}

/// Runs every case concurrently; each writes into `<case dir>/out`.
pub fn run_batch(cases: &[PathBuf]) -> Vec<CaseOutcome> {
    cases
        .par_iter()
        .map(|case| {
            let dir = case.parent().unwrap_or(Path::new("."));
            let result = load_case(case).and_then(|config| execute(&config, &dir.join(BATCH_OUT_DIR)));
            CaseOutcome {
                case: case.clone(),
                result,
            }
        })
        .collect()
}

/// Worst exit code over a batch: config errors outrank pipeline errors.
pub fn batch_exit_code(outcomes: &[CaseOutcome]) -> i32 {
    let codes = outcomes
        .iter()
        .map(|o| o.result.as_ref().err().map_or(EXIT_OK, CliError::exit_code));
    if codes.clone().any(|c| c == EXIT_CONFIG) {
        EXIT_CONFIG
    } else {
        codes.max().unwrap_or(EXIT_OK)
    }
}
