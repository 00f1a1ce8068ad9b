//! Run configuration: a TOML file plus dotted command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use wikichurn::cohort::CohortParams;
use wikichurn::explain::{
    SurrogateParams, DEFAULT_KERNEL_WIDTH, DEFAULT_RIDGE, DEFAULT_SAMPLES, DEFAULT_TOP_K,
};
use wikichurn::features::GroupSet;
use wikichurn::ingest::LiveConfig;
use wikichurn::model::{Hyperparams, ModelKind, SplitSpec, DEFAULT_MIN_CONFIDENCE};

use crate::CliError;

/// Overrides the configured cache directory in live mode.
pub const CACHE_DIR_ENV: &str = "WIKICHURN_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Fixture bundle directory.
    pub fixture: Option<PathBuf>,
    /// Missing-list snapshot, live mode only.
    pub missing_list: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub cache_ttl_secs: f64,
    pub live: LiveConfig,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            kind: SourceKind::Fixture,
            fixture: None,
            missing_list: None,
            cache_dir: None,
            cache_ttl_secs: 7.0 * 86_400.0,
            live: LiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// `hashing` or `none`; ignored when `embeddings` is set.
    pub encoder: String,
    /// Precomputed sentence vectors, one `{editor, vector}` record per line.
    pub embeddings: Option<PathBuf>,
    /// Directory of lexicon word lists replacing the built-in ones.
    pub lexicons: Option<PathBuf>,
    pub remove_common_words: bool,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            encoder: "hashing".into(),
            embeddings: None,
            lexicons: None,
            remove_common_words: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.8, stratified: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub classifier: String,
    pub groups: String,
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        ModelConfig {
            classifier: "forest".into(),
            groups: "G1G4G5".into(),
            trees: hp.trees,
            max_depth: hp.max_depth,
            min_leaf: hp.min_leaf,
            learning_rate: hp.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub classifiers: Vec<String>,
    /// Empty means the thirteen default combinations.
    pub combos: Vec<String>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            classifiers: ModelKind::ALL.iter().map(|k| k.cli_name().to_string()).collect(),
            combos: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub repeats: usize,
    pub samples: usize,
    pub kernel_width: f64,
    pub ridge: f64,
    pub top_k: usize,
    /// Test rows given a local explanation; 0 means all.
    pub instances: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            repeats: 5,
            samples: DEFAULT_SAMPLES,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            ridge: DEFAULT_RIDGE,
            top_k: DEFAULT_TOP_K,
            instances: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub min_confidence: f64,
    /// Editors to score, one username per line.
    pub pool: Option<PathBuf>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { min_confidence: DEFAULT_MIN_CONFIDENCE, pool: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
    pub source: SourceConfig,
    pub cohort: CohortParams,
    pub features: FeaturesConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub ablate: AblateConfig,
    pub explain: ExplainConfig,
    pub score: ScoreConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            out: PathBuf::from("out"),
            workers: 0,
            source: SourceConfig::default(),
            cohort: CohortParams::default(),
            features: FeaturesConfig::default(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            ablate: AblateConfig::default(),
            explain: ExplainConfig::default(),
            score: ScoreConfig::default(),
        }
    }
}

/// A validated configuration with its hash.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub seed: u64,
    pub hash: String,
    pub groups: GroupSet,
    pub kind: ModelKind,
}

impl Resolved {
    pub fn hyperparams(&self) -> Hyperparams {
        let m = &self.config.model;
        Hyperparams {
            trees: m.trees,
            max_depth: m.max_depth,
            min_leaf: m.min_leaf,
            learning_rate: m.learning_rate,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.config.split.train_fraction,
            seed: self.seed,
            stratified: self.config.split.stratified,
        }
    }

    pub fn surrogate_params(&self) -> SurrogateParams {
        let e = &self.config.explain;
        SurrogateParams {
            n_samples: e.samples,
            kernel_width: e.kernel_width,
            ridge: e.ridge,
            k: e.top_k,
            seed: self.seed,
        }
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }
}

/// Parses a command-line value as TOML, falling back to a plain string.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `a.b.c = value`, creating intermediate tables.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad override key {path:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Usage(format!("override {path}: {p} is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// SHA-256 over the canonical JSON form, without the fields that only
/// affect where and how fast a run happens.
pub fn config_hash(config: &RunConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("out");
        obj.remove("workers");
        if let Some(src) = obj.get_mut("source").and_then(|s| s.as_object_mut()) {
            src.remove("cache_dir");
        }
    }
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve(base: Option<&Path>, p: &mut Option<PathBuf>) {
    if let (Some(base), Some(path)) = (base, p.as_mut()) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn must_exist(what: &str, p: &Option<PathBuf>) -> Result<(), CliError> {
    match p {
        Some(path) if !path.exists() => Err(CliError::Usage(format!(
            "{what} path does not exist: {}",
            path.display()
        ))),
        _ => Ok(()),
    }
}

/// Checks the config, fills in the hash and resolves relative input paths
/// against `base` (the config file's directory).
pub fn validate(mut config: RunConfig, base: Option<&Path>) -> Result<Resolved, CliError> {
    let usage = CliError::Usage;
    let seed = config
        .seed
        .ok_or_else(|| usage("a seed is required: set `seed` in the config or pass --seed".into()))?;
    let hash = config_hash(&config);

    resolve(base, &mut config.source.fixture);
    resolve(base, &mut config.source.missing_list);
    resolve(base, &mut config.features.embeddings);
    resolve(base, &mut config.features.lexicons);
    resolve(base, &mut config.score.pool);
    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        if !dir.is_empty() {
            config.source.cache_dir = Some(PathBuf::from(dir));
        }
    }

    must_exist("source.fixture", &config.source.fixture)?;
    must_exist("source.missing_list", &config.source.missing_list)?;
    must_exist("features.embeddings", &config.features.embeddings)?;
    must_exist("features.lexicons", &config.features.lexicons)?;
    must_exist("score.pool", &config.score.pool)?;

    let groups: GroupSet = config
        .model
        .groups
        .parse()
        .map_err(|e| usage(format!("model.groups: {e}")))?;
    let kind: ModelKind = config
        .model
        .classifier
        .parse()
        .map_err(|e| usage(format!("model.classifier: {e}")))?;
    for c in &config.ablate.classifiers {
        c.parse::<ModelKind>()
            .map_err(|e| usage(format!("ablate.classifiers: {e}")))?;
    }
    for c in &config.ablate.combos {
        c.parse::<GroupSet>()
            .map_err(|e| usage(format!("ablate.combos: {e}")))?;
    }
    let f = config.split.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(usage(format!("split.train_fraction {f} outside (0, 1)")));
    }
    let p = config.score.min_confidence;
    if !(0.0..=1.0).contains(&p) {
        return Err(usage(format!("score.min_confidence {p} outside [0, 1]")));
    }
    if !matches!(config.features.encoder.as_str(), "hashing" | "none") {
        return Err(usage(format!(
            "features.encoder {:?}: expected hashing or none",
            config.features.encoder
        )));
    }
    if config.model.trees == 0 || config.model.max_depth == 0 || config.model.min_leaf == 0 {
        return Err(usage("model.trees, model.max_depth and model.min_leaf must be positive".into()));
    }
    if config.explain.repeats == 0 || config.explain.samples == 0 || config.explain.top_k == 0 {
        return Err(usage("explain.repeats, explain.samples and explain.top_k must be positive".into()));
    }
    Ok(Resolved { config, seed, hash, groups, kind })
}
