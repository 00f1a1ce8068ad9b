#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

pub const PIPELINE: [&str; 8] =
    ["ingest", "curate", "featurize", "train", "evaluate", "ablate", "explain", "score"];

/// A temporary directory holding the synthetic pipeline bundle and a
/// config that points at it.
pub struct Fixture {
    pub dir: TempDir,
    pub config: PathBuf,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_config("")
    }

    /// `extra` is appended to the generated config.
    pub fn with_config(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let fx = dir.path().join("fx");
        run_ok(&strings(&["synth", "pipeline", "--out", fx.to_str().unwrap()])).unwrap();
        let config = dir.path().join("run.toml");
        let text = format!(
            "seed = 11\n\n[source]\nfixture = \"fx\"\n\n[explain]\nsamples = 1000\n\n[score]\npool = \"fx/pool.txt\"\n{extra}"
        );
        std::fs::write(&config, text).unwrap();
        Fixture { dir, config }
    }

    pub fn bundle(&self) -> PathBuf {
        self.dir.path().join("fx")
    }

    pub fn args(&self, cmd: &str, out: &Path, extra: &[&str]) -> Vec<String> {
        let mut v = strings(&[cmd, "--config", self.config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        v.extend(strings(extra));
        v
    }
}

pub fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Runs in-process, returning stdout or the error with its exit code.
pub fn run(args: &[String]) -> Result<String, (i32, String)> {
    let mut buf = Vec::new();
    match wikichurn_cli::run(args, &mut buf) {
        Ok(()) => Ok(String::from_utf8(buf).unwrap()),
        Err(e) => Err((e.exit_code(), e.to_string())),
    }
}

pub fn run_ok(args: &[String]) -> Result<String, String> {
    run(args).map_err(|(code, msg)| format!("`{}` exited {code}: {msg}", args.join(" ")))
}

/// CSV rows after the provenance comment line.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// Relative path to contents of every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn diff_names(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
