//! Batch front end for `bpvei-core`: model ingestion, subcommand dispatch
//! and deterministic result files with a replayable manifest.

pub mod args;
mod commands;
pub mod manifest;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use bpvei_core::{build_model, preset, BpveiModel, LawSpec};
use clap::Parser;
use thiserror::Error;

pub use args::{Cli, Command};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_GUARD: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] bpvei_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Result of one subcommand: the files written (or printed) and whether a
/// numeric guard tripped.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub guard: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.guard.is_some() {
            EXIT_GUARD
        } else {
            EXIT_OK
        }
    }
}

/// Parses `argv`, runs one subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(g) = &outcome.guard {
                eprintln!("warning: {g}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

/// Runs a parsed command line inside a pool of `--threads` workers.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    if let Command::Replay(r) = &cli.command {
        let m = RunManifest::read(&r.manifest)?;
        let mut config = m.config.clone();
        if matches!(config.command, Command::Replay(_)) {
            return Err(CliError::Usage("a manifest cannot replay a replay".into()));
        }
        config.global.threads = cli.global.threads;
        if cli.global.out.is_some() {
            config.global.out = cli.global.out.clone();
        }
        let model = build_model(&m.model.to_string())?;
        return in_pool(config.global.threads, || run_with_model(&config, &model));
    }
    let model = resolve_model(&cli.global.model, cli.global.offspring.as_deref())?;
    in_pool(cli.global.threads, || run_with_model(cli, &model))
}

fn in_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// `preset:NAME` or a model JSON file.
pub fn resolve_model(source: &str, offspring: Option<&str>) -> Result<BpveiModel, CliError> {
    let offspring = offspring
        .map(|s| {
            serde_json::from_str::<LawSpec>(s)
                .map_err(|e| CliError::Usage(format!("--offspring: {e}")))
        })
        .transpose()?;
    if let Some(name) = source.strip_prefix("preset:") {
        return Ok(preset(name, offspring)?);
    }
    if offspring.is_some() {
        return Err(CliError::Usage(
            "--offspring applies to presets only".into(),
        ));
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(build_model(&text)?)
}

fn run_with_model(cli: &Cli, model: &BpveiModel) -> Result<Outcome, CliError> {
    let report = commands::dispatch(cli, model)?;
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| report.default_out.map(PathBuf::from));
    let mut outcome = Outcome {
        guard: report.guard,
        ..Outcome::default()
    };
    match out {
        None => {
            for a in &report.artifacts {
                print!("{}", a.content);
            }
        }
        Some(out) => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            for a in &report.artifacts {
                let path = a.path(&out);
                std::fs::write(&path, &a.content).map_err(|e| CliError::io(&path, e))?;
                outcome.outputs.push(path);
            }
            let manifest = RunManifest {
                subcommand: commands::name(&cli.command).to_string(),
                model_source: cli.global.model.clone(),
                model: serde_json::to_value(model).expect("model serializes"),
                config: cli.clone(),
                seed: cli.global.seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: outcome
                    .outputs
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect(),
            };
            let path = output::manifest_path(&out);
            std::fs::write(&path, output::json(&manifest)).map_err(|e| CliError::io(&path, e))?;
            outcome.manifest = Some(path);
        }
    }
    Ok(outcome)
}
