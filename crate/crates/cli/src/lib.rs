//! Command-line driver: one command per pipeline stage, each reading the
//! artifacts of earlier stages from the output directory.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{parse_value, read_table, set_path, RunConfig};

/// Exit code of a pipeline or data error.
pub const EXIT_DATA: i32 = 1;
/// Exit code of a usage or configuration error.
pub const EXIT_USAGE: i32 = 2;

pub const LOCK_FILE: &str = ".wikichurn.lock";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wikichurn",
    version,
    about = "Predict which prolific Wikipedia editors are about to stop editing",
    after_help = "Any config field can be overridden with a flag of its dotted name, \
                  e.g. --cohort.window=50 or --explain.samples 2000."
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Feature groups, e.g. g1,g4,g5.
    #[arg(long, global = true)]
    pub groups: Option<String>,
    #[arg(long, global = true, value_parser = ["tree", "forest", "adaboost", "gboost"])]
    pub classifier: Option<String>,
    #[arg(long, global = true)]
    pub min_confidence: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    /// Large bundle with full-size cohort counts.
    Cohort,
    /// Small end-to-end bundle with a scoring pool.
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the data source and warm the cache.
    Ingest,
    /// Build the missing and matched active cohorts.
    Curate,
    /// Extract feature vectors for the cohort (and the scoring pool).
    Featurize,
    /// Split, fit the configured classifier and save it.
    Train,
    /// Evaluate the saved model on the held-out rows.
    Evaluate,
    /// Best classifier per feature-group combination.
    Ablate,
    /// Global importances, local explanations and a 2-D projection.
    Explain,
    /// Score the pool and write the risk report.
    Score,
    /// Write a synthetic fixture bundle into the output directory.
    Synth {
        #[arg(value_enum)]
        kind: FixtureKind,
    },
}

/// Splits `--a.b=v` / `--a.b v` overrides from the arguments clap sees.
pub fn split_overrides(args: &[String]) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter().peekable();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a.clone());
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if !name.contains('.') {
            rest.push(a.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("--{name} needs a value")))?,
        };
        overrides.push((name.to_string(), value));
    }
    Ok((rest, overrides))
}

/// Merges file, dotted overrides and shortcut flags into one config.
pub fn load_config(cli: &Cli, overrides: &[(String, String)]) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let (mut table, base) = match &cli.config {
        Some(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (read_table(p)?, Some(base))
        }
        None => (toml::Table::new(), None),
    };
    for (k, v) in overrides {
        set_path(&mut table, k, parse_value(v))?;
    }
    let int = |v: u64, what: &str| {
        i64::try_from(v)
            .map(toml::Value::Integer)
            .map_err(|_| CliError::Usage(format!("--{what} {v} is too large")))
    };
    if let Some(s) = cli.seed {
        set_path(&mut table, "seed", int(s, "seed")?)?;
    }
    if let Some(g) = &cli.groups {
        set_path(&mut table, "model.groups", toml::Value::String(g.clone()))?;
    }
    if let Some(c) = &cli.classifier {
        set_path(&mut table, "model.classifier", toml::Value::String(c.clone()))?;
    }
    if let Some(p) = cli.min_confidence {
        set_path(&mut table, "score.min_confidence", toml::Value::Float(p))?;
    }
    if let Some(o) = &cli.out {
        set_path(&mut table, "out", toml::Value::String(o.display().to_string()))?;
    }
    if let Some(w) = cli.workers {
        set_path(&mut table, "workers", int(w as u64, "workers")?)?;
    }
    let config: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid configuration: {}", e.message())))?;
    Ok((config, base))
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(LOCK_FILE);
        let mut f = std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::Data(format!(
                        "{} is locked by another run ({}); remove the file if no run is active",
                        dir.display(),
                        path.display()
                    ))
                } else {
                    CliError::Data(format!("cannot create {}: {e}", path.display()))
                }
            })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(DirLock { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Parses `args` (without the program name) and runs one command,
/// writing its human-readable summary to `stdout`.
pub fn run(args: &[String], stdout: &mut dyn Write) -> Result<(), CliError> {
    let (rest, overrides) = split_overrides(args)?;
    let argv = std::iter::once("wikichurn".to_string()).chain(rest);
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let (config, base) = load_config(&cli, &overrides)?;
    if let Command::Synth { kind } = cli.command {
        let _lock = DirLock::acquire(&config.out)?;
        return commands::synth(kind, &config, stdout);
    }
    let resolved = config::validate(config, base.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.config.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", resolved.config.workers)))?;
    let _lock = DirLock::acquire(resolved.out())?;
    let mut buf = Vec::new();
    let result = pool.install(|| commands::dispatch(cli.command, &resolved, &mut buf));
    let _ = stdout.write_all(&buf);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_out() {
        let (rest, ov) = split_overrides(&strings(&[
            "train", "--cohort.window=20", "--seed", "3", "--explain.samples", "100", "--out", "a.b",
        ]))
        .unwrap();
        assert_eq!(rest, strings(&["train", "--seed", "3", "--out", "a.b"]));
        assert_eq!(
            ov,
            vec![("cohort.window".into(), "20".into()), ("explain.samples".into(), "100".into())]
        );
    }

    #[test]
    fn unknown_command_is_usage_error() {
        let err = run(&strings(&["frobnicate"]), &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }
}
