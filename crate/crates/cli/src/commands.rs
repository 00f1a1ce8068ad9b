use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use wikichurn::artifact::{self, Provenance};
use wikichurn::cohort::{self, build_record, Cohort, EditorRecord, Label, COHORT_FILE};
use wikichurn::explain::{
    explain_rows, gini_importance, permutation_importance, project_2d, projection_csv,
    surrogate_ranking, top_k_frequency, ExplainError, LocalExplanation,
};
use wikichurn::features::{
    FeatureMatrix, FeatureSet, FileEncoder, HashingEncoder, Lexicons, SentenceEncoder,
    TextPipeline, FEATURES_FILE,
};
use wikichurn::ingest::{
    CachedSource, EditSource, EditorId, FixtureBundle, FixtureSource, LiveSource, MissingEntry,
    SystemClock, load_missing_list,
};
use wikichurn::model::{
    default_combos, fit_on_rows, flag, run_ablation, score_editors, split_set, EvalReport,
    FitSpec, ModelKind, TrainedModel,
};
use wikichurn::synth::{self, CohortShape, PipelineShape};

use crate::config::{Resolved, RunConfig, SourceKind};
use crate::{CliError, Command, FixtureKind};

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const CURATION_REPORT: &str = "curation_report.json";
pub const POOL_RECORDS: &str = "pool.ndjson";
pub const POOL_DIR: &str = "pool";
pub const MODEL_FILE: &str = "model.json";
pub const SPLIT_FILE: &str = "split.json";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const GINI_CSV: &str = "importance_gini.csv";
pub const PERMUTATION_CSV: &str = "importance_permutation.csv";
pub const SURROGATE_CSV: &str = "importance_surrogate.csv";
pub const SURROGATE_TOPK_CSV: &str = "surrogate_topk.csv";
pub const LOCAL_EXPLANATIONS: &str = "local_explanations.ndjson";
pub const PROJECTION_CSV: &str = "projection.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const RISK_REPORT: &str = "risk_report.md";
pub const POOL_LIST: &str = "pool.txt";

pub fn dispatch(cmd: Command, run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Ingest => ingest(run, out),
        Command::Curate => curate(run, out),
        Command::Featurize => featurize(run, out),
        Command::Train => train(run, out),
        Command::Evaluate => evaluate(run, out),
        Command::Ablate => ablate(run, out),
        Command::Explain => explain(run, out),
        Command::Score => score(run, out),
        Command::Synth { kind } => synth(kind, &run.config, out),
    }
}

fn provenance(run: &Resolved) -> Provenance {
    Provenance { config_hash: run.hash.clone(), seed: run.seed }
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write output: {e}")))
}

/// Fails with a message naming the absent artifact and its producer.
fn require(dir: &Path, file: &str, producer: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(file);
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Data(format!(
            "missing artifact {}; run `wikichurn {producer}` first",
            path.display()
        )))
    }
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    #[serde(flatten)]
    provenance: Provenance,
    #[serde(flatten)]
    body: &'a T,
}

fn write_report<T: Serialize>(path: &Path, run: &Resolved, body: &T) -> Result<(), CliError> {
    let doc = WithProvenance { provenance: provenance(run), body };
    artifact::write_json(path, &doc).map_err(CliError::data)
}

enum Source {
    Fixture(FixtureSource),
    Live {
        cached: CachedSource<LiveSource>,
        cache_dir: Option<PathBuf>,
        missing: Vec<MissingEntry>,
    },
}

impl Source {
    fn open(config: &RunConfig) -> Result<Self, CliError> {
        let src = &config.source;
        match src.kind {
            SourceKind::Fixture => {
                let dir = src.fixture.as_ref().ok_or_else(|| {
                    CliError::Usage("source.fixture must name a fixture bundle directory".into())
                })?;
                Ok(Source::Fixture(FixtureSource::open(dir).map_err(CliError::data)?))
            }
            SourceKind::Live => {
                let list = src.missing_list.as_ref().ok_or_else(|| {
                    CliError::Usage("live mode needs source.missing_list".into())
                })?;
                let missing = load_missing_list(list).map_err(CliError::data)?;
                let clock = Arc::new(SystemClock);
                let live = LiveSource::with_http(src.live.clone(), clock.clone());
                let cached = CachedSource::new(live, src.cache_ttl_secs, clock);
                if let Some(dir) = &src.cache_dir {
                    let n = cached.load(dir).map_err(CliError::data)?;
                    log::info!("loaded {n} cached records from {}", dir.display());
                }
                Ok(Source::Live { cached, cache_dir: src.cache_dir.clone(), missing })
            }
        }
    }

    fn edits(&self) -> &dyn EditSource {
        match self {
            Source::Fixture(f) => f,
            Source::Live { cached, .. } => cached,
        }
    }

    fn missing_list(&self) -> &[MissingEntry] {
        match self {
            Source::Fixture(f) => f.missing_list(),
            Source::Live { missing, .. } => missing,
        }
    }

    fn save_cache(&self) -> Result<(), CliError> {
        if let Source::Live { cached, cache_dir: Some(dir), .. } = self {
            cached.save(dir).map_err(CliError::data)?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct IngestReport {
    pub mode: String,
    pub editors: usize,
    pub pages: usize,
    pub missing_list: usize,
    pub editors_fetched: usize,
    pub editors_skipped: usize,
}

fn ingest(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let config = &run.config;
    let report = match config.source.kind {
        SourceKind::Fixture => {
            let dir = config.source.fixture.as_ref().ok_or_else(|| {
                CliError::Usage("source.fixture must name a fixture bundle directory".into())
            })?;
            let bundle = FixtureBundle::load(dir).map_err(CliError::data)?;
            let counts = bundle.counts();
            if bundle.meta.counts != counts {
                return Err(CliError::Data(format!(
                    "fixture manifest counts {:?} disagree with the bundle contents {:?}",
                    bundle.meta.counts, counts
                )));
            }
            IngestReport {
                mode: "fixture".into(),
                editors: counts.editors,
                pages: counts.pages,
                missing_list: counts.missing_list,
                editors_fetched: counts.editors,
                editors_skipped: 0,
            }
        }
        SourceKind::Live => {
            let source = Source::open(config)?;
            let list = source.missing_list();
            let mut fetched = 0;
            let mut skipped = 0;
            let mut pages = 0;
            for entry in list {
                let got = build_record(source.edits(), &entry.editor, Label::Missing, &config.cohort)
                    .and_then(|_| {
                        let mut n = 0;
                        for ns in cohort::HARVEST_NAMESPACES {
                            n += source
                                .edits()
                                .fetch_top_pages(&entry.editor, ns, config.cohort.pages_per_ns)?
                                .len();
                        }
                        Ok(n)
                    });
                match got {
                    Ok(n) => {
                        fetched += 1;
                        pages += n;
                    }
                    Err(e) => {
                        log::warn!("ingest skipped {}: {e}", entry.editor);
                        skipped += 1;
                    }
                }
            }
            source.save_cache()?;
            IngestReport {
                mode: "live".into(),
                editors: fetched,
                pages,
                missing_list: list.len(),
                editors_fetched: fetched,
                editors_skipped: skipped,
            }
        }
    };
    write_report(&run.out().join(INGEST_REPORT), run, &report)?;
    say(
        out,
        &format!(
            "ingest ({}): {} editors, {} pages, {} missing-list entries; fetched {}, skipped {}\n",
            report.mode,
            report.editors,
            report.pages,
            report.missing_list,
            report.editors_fetched,
            report.editors_skipped
        ),
    )
}

fn read_pool_list(path: &Path) -> Result<Vec<EditorId>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read pool list {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| EditorId::new(l).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

fn curate(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let config = &run.config;
    let prov = provenance(run);
    let source = Source::open(config)?;
    let (cohort, report) = cohort::curate(source.edits(), source.missing_list(), &config.cohort)
        .map_err(|e| CliError::Data(format!("curate: {e}")))?;
    cohort.write(run.out(), &prov).map_err(CliError::data)?;
    write_report(&run.out().join(CURATION_REPORT), run, &report)?;

    let pool_path = run.out().join(POOL_RECORDS);
    let mut pool_line = String::new();
    match &config.score.pool {
        Some(list) => {
            let ids = read_pool_list(list)?;
            let mut records: Vec<EditorRecord> = Vec::new();
            for id in &ids {
                match build_record(source.edits(), id, Label::Unlabeled, &config.cohort) {
                    Ok(r) => records.push(r),
                    Err(e) => log::warn!("pool editor {id} skipped: {e}"),
                }
            }
            artifact::write_ndjson(&pool_path, "pool", &prov, &records).map_err(CliError::data)?;
            pool_line = format!("pool: {} of {} editors collected\n", records.len(), ids.len());
        }
        None => {
            if pool_path.exists() {
                std::fs::remove_file(&pool_path).map_err(CliError::data)?;
            }
        }
    }
    source.save_cache()?;

    let mut text = format!(
        "listed {} -> filtered {} (skipped {}) -> pages {} -> candidates {} (skipped {}) -> matched {} (skipped {})\n\
         m = {:.6} edits/day, sigma = {:.6}, Mann-Whitney p = {:.6}\n",
        report.listed,
        report.filtered,
        report.missing_skipped,
        report.pages_scanned,
        report.candidates,
        report.harvest_skipped,
        report.matched,
        report.candidates_skipped,
        report.matching_mean,
        report.matching_sigma,
        report.mwu_p,
    );
    for w in &report.warnings {
        let _ = writeln!(text, "WARNING: {w}");
    }
    text.push_str(&pool_line);
    say(out, &text)
}

fn text_pipeline(config: &RunConfig) -> Result<TextPipeline, CliError> {
    let f = &config.features;
    let mut text = TextPipeline::default();
    if let Some(dir) = &f.lexicons {
        text.lexicons = Lexicons::load(dir).map_err(CliError::data)?;
    }
    text.encoder = match (&f.embeddings, f.encoder.as_str()) {
        (Some(path), _) => Some(Box::new(FileEncoder::load(path).map_err(CliError::data)?)
            as Box<dyn SentenceEncoder>),
        (None, "none") => None,
        (None, _) => Some(Box::new(HashingEncoder)),
    };
    Ok(text)
}

fn featurize(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let prov = provenance(run);
    require(run.out(), COHORT_FILE, "curate")?;
    let cohort = Cohort::read(run.out()).map_err(CliError::data)?;
    let text = text_pipeline(&run.config)?;
    let set = FeatureSet::from_cohort(&cohort, &text);
    set.write(run.out(), &prov).map_err(CliError::data)?;
    let mut summary = format!(
        "featurized {} editors ({} skipped)\n",
        set.vectors.len(),
        set.skipped.len()
    );
    let pool_path = run.out().join(POOL_RECORDS);
    let pool_dir = run.out().join(POOL_DIR);
    if pool_path.exists() {
        let records: Vec<EditorRecord> = artifact::read_ndjson(&pool_path).map_err(CliError::data)?;
        let pool = FeatureSet::from_records(&records, &text);
        pool.write(&pool_dir, &prov).map_err(CliError::data)?;
        let _ = writeln!(summary, "featurized {} pool editors ({} skipped)", pool.vectors.len(), pool.skipped.len());
    } else if pool_dir.exists() {
        std::fs::remove_dir_all(&pool_dir).map_err(CliError::data)?;
    }
    say(out, &summary)
}

fn read_features(dir: &Path) -> Result<FeatureSet, CliError> {
    require(dir, FEATURES_FILE, "featurize")?;
    FeatureSet::read(dir).map_err(CliError::data)
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    #[serde(flatten)]
    provenance: Provenance,
    train: Vec<EditorId>,
    test: Vec<EditorId>,
}

fn rows_of(set: &FeatureSet, editors: &[EditorId]) -> Result<Vec<usize>, CliError> {
    let index: HashMap<&EditorId, usize> =
        set.vectors.iter().enumerate().map(|(i, v)| (&v.editor, i)).collect();
    editors
        .iter()
        .map(|e| {
            index.get(e).copied().ok_or_else(|| {
                CliError::Data(format!("split names {e}, which has no feature vector; rerun `wikichurn train`"))
            })
        })
        .collect()
}

struct Trained {
    set: FeatureSet,
    model: TrainedModel,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn load_trained(run: &Resolved) -> Result<Trained, CliError> {
    let dir = run.out();
    let set = read_features(dir)?;
    let model_path = require(dir, MODEL_FILE, "train")?;
    let split_path = require(dir, SPLIT_FILE, "train")?;
    let model = TrainedModel::load(&model_path).map_err(CliError::data)?;
    let split: SplitFile = artifact::read_json(&split_path).map_err(CliError::data)?;
    let train = rows_of(&set, &split.train)?;
    let test = rows_of(&set, &split.test)?;
    Ok(Trained { set, model, train, test })
}

fn metrics_text(r: &EvalReport) -> String {
    format!(
        "accuracy {:.4}, weighted precision {:.4}, recall {:.4}, F1 {:.4}",
        r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1
    )
}

fn train(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = run.out();
    let set = read_features(dir)?;
    let part = split_set(&set, &run.split_spec()).map_err(CliError::data)?;
    let spec = FitSpec {
        kind: run.kind,
        groups: run.groups.clone(),
        hyperparams: run.hyperparams(),
        seed: run.seed,
        remove_common_words: run.config.features.remove_common_words,
    };
    let mut model = fit_on_rows(&set, &part.train, &spec).map_err(CliError::data)?;
    let test = model.prepare(&set, &part.test).map_err(CliError::data)?;
    let report = model.evaluate(&test).map_err(CliError::data)?;
    model.metrics = Some(report);
    model.config_hash = run.hash.clone();
    model.save(&dir.join(MODEL_FILE)).map_err(CliError::data)?;
    let editors = |rows: &[usize]| rows.iter().map(|&i| set.vectors[i].editor.clone()).collect();
    let split = SplitFile {
        provenance: provenance(run),
        train: editors(&part.train),
        test: editors(&part.test),
    };
    artifact::write_json(&dir.join(SPLIT_FILE), &split).map_err(CliError::data)?;
    say(
        out,
        &format!(
            "trained {} on {} ({} columns, {} train / {} test rows)\ntest {}\n",
            run.kind,
            run.groups,
            model.n_features,
            part.train.len(),
            part.test.len(),
            metrics_text(&report)
        ),
    )
}

fn evaluate(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let t = load_trained(run)?;
    let test = t.model.prepare(&t.set, &t.test).map_err(CliError::data)?;
    let r = t.model.evaluate(&test).map_err(CliError::data)?;
    let c = r.confusion;
    let body = format!(
        "metric,value\naccuracy,{}\nweighted_precision,{}\nweighted_recall,{}\nweighted_f1,{}\n\
         true_missing_pred_missing,{}\ntrue_missing_pred_active,{}\n\
         true_active_pred_missing,{}\ntrue_active_pred_active,{}\n",
        r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1, c[0][0], c[0][1], c[1][0], c[1][1]
    );
    artifact::write_csv(&run.out().join(EVALUATION_CSV), &provenance(run), &body).map_err(CliError::data)?;
    say(
        out,
        &format!(
            "{} on {} test rows: {}\nconfusion (rows true missing/active): [{} {}] [{} {}]\n",
            t.model.kind,
            test.rows.len(),
            metrics_text(&r),
            c[0][0],
            c[0][1],
            c[1][0],
            c[1][1]
        ),
    )
}

fn ablate(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let set = read_features(run.out())?;
    let combos = if run.config.ablate.combos.is_empty() {
        default_combos()
    } else {
        run.config
            .ablate
            .combos
            .iter()
            .map(|c| c.parse().expect("validated"))
            .collect()
    };
    let kinds: Vec<ModelKind> = run
        .config
        .ablate
        .classifiers
        .iter()
        .map(|c| c.parse().expect("validated"))
        .collect();
    let rows = run_ablation(
        &set,
        &combos,
        &kinds,
        &run.split_spec(),
        &run.hyperparams(),
        run.seed,
        run.config.features.remove_common_words,
    )
    .map_err(CliError::data)?;
    let mut body = format!("{}\n", wikichurn::model::ABLATION_HEADER);
    for r in &rows {
        body.push_str(&r.csv_line());
        body.push('\n');
    }
    artifact::write_csv(&run.out().join(ABLATION_CSV), &provenance(run), &body).map_err(CliError::data)?;
    say(out, &body)
}

/// Rows of `m` at the given positions.
fn subset(m: &FeatureMatrix, keep: &[usize]) -> FeatureMatrix {
    FeatureMatrix {
        columns: m.columns.clone(),
        editors: keep.iter().map(|&i| m.editors[i].clone()).collect(),
        rows: keep.iter().map(|&i| m.rows[i].clone()).collect(),
        labels: keep.iter().map(|&i| m.labels[i]).collect(),
    }
}

fn explain(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = run.out();
    let prov = provenance(run);
    let t = load_trained(run)?;
    let train_m = t.model.prepare(&t.set, &t.train).map_err(CliError::data)?;
    let test_m = t.model.prepare(&t.set, &t.test).map_err(CliError::data)?;
    let mut summary = String::new();
    let top = |r: &wikichurn::explain::ImportanceRanking| r.top(5).collect::<Vec<_>>().join(", ");

    match gini_importance(&t.model) {
        Ok(r) => {
            artifact::write_csv(&dir.join(GINI_CSV), &prov, &r.to_csv()).map_err(CliError::data)?;
            let _ = writeln!(summary, "gini top 5: {}", top(&r));
        }
        Err(ExplainError::NoSplits) => {
            let _ = writeln!(summary, "WARNING: model has no splits; gini importance not written");
        }
        Err(e) => return Err(CliError::data(e)),
    }

    let perm = permutation_importance(&t.model, &test_m, run.config.explain.repeats, run.seed)
        .map_err(CliError::data)?;
    artifact::write_csv(&dir.join(PERMUTATION_CSV), &prov, &perm.to_csv()).map_err(CliError::data)?;
    let _ = writeln!(summary, "permutation top 5: {}", top(&perm));

    let n = match run.config.explain.instances {
        0 => test_m.rows.len(),
        k => k.min(test_m.rows.len()),
    };
    let targets = subset(&test_m, &(0..n).collect::<Vec<_>>());
    let fits = explain_rows(&t.model, &targets, &train_m, &run.surrogate_params()).map_err(CliError::data)?;
    let locals: Vec<LocalExplanation> = fits.iter().map(|f| f.explanation.clone()).collect();
    artifact::write_ndjson(&dir.join(LOCAL_EXPLANATIONS), "local_explanation", &prov, &locals)
        .map_err(CliError::data)?;
    let global = surrogate_ranking(&fits, &test_m.columns);
    artifact::write_csv(&dir.join(SURROGATE_CSV), &prov, &global.to_csv()).map_err(CliError::data)?;
    let mut freq = String::from("feature,count\n");
    for (name, count) in top_k_frequency(&locals) {
        let _ = writeln!(freq, "{name},{count}");
    }
    artifact::write_csv(&dir.join(SURROGATE_TOPK_CSV), &prov, &freq).map_err(CliError::data)?;
    let _ = writeln!(summary, "surrogate top 5 over {n} editors: {}", top(&global));

    if t.set.has_sentence_vectors {
        let rows: Vec<usize> = wikichurn::model::labeled_rows(&t.set);
        let vectors: Vec<Vec<f64>> = rows
            .iter()
            .filter_map(|&i| t.set.vectors[i].sentence_vec.clone())
            .collect();
        let labels: Vec<Label> = rows.iter().map(|&i| t.set.vectors[i].label).collect();
        let editors: Vec<EditorId> = rows.iter().map(|&i| t.set.vectors[i].editor.clone()).collect();
        match project_2d(&vectors, &labels) {
            Ok(points) => {
                artifact::write_csv(&dir.join(PROJECTION_CSV), &prov, &projection_csv(&editors, &points))
                    .map_err(CliError::data)?;
                let _ = writeln!(summary, "projection of {} sentence vectors written", points.len());
            }
            Err(e) => {
                let _ = writeln!(summary, "WARNING: projection skipped: {e}");
            }
        }
    }
    say(out, &summary)
}

fn score(run: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = run.out();
    let prov = provenance(run);
    let t = load_trained(run)?;
    let pool_dir = dir.join(POOL_DIR);
    if !pool_dir.join(FEATURES_FILE).exists() {
        return Err(CliError::Data(format!(
            "missing artifact {}; set score.pool and run `wikichurn curate` and `wikichurn featurize` first",
            pool_dir.join(FEATURES_FILE).display()
        )));
    }
    let pool = FeatureSet::read(&pool_dir).map_err(CliError::data)?;
    let all: Vec<usize> = (0..pool.vectors.len()).collect();
    let m = t.model.prepare(&pool, &all).map_err(CliError::data)?;
    let threshold = run.config.score.min_confidence;
    let scored = score_editors(&t.model, &m).map_err(CliError::data)?;
    let flagged = flag(&scored, threshold);

    let mut csv = String::from("editor,probability,flagged\n");
    for (e, p) in &scored {
        let _ = writeln!(csv, "{e},{p},{}", *p > threshold);
    }
    artifact::write_csv(&dir.join(SCORES_CSV), &prov, &csv).map_err(CliError::data)?;

    let position: HashMap<&EditorId, usize> = m.editors.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let keep: Vec<usize> = flagged.iter().map(|(e, _)| position[e]).collect();
    let targets = subset(&m, &keep);
    let background = t.model.prepare(&t.set, &t.train).map_err(CliError::data)?;
    let fits = if keep.is_empty() {
        Vec::new()
    } else {
        explain_rows(&t.model, &targets, &background, &run.surrogate_params()).map_err(CliError::data)?
    };

    let mut md = String::from("# Editors at risk of leaving\n\n");
    let _ = writeln!(
        md,
        "config hash `{}`, seed {}, classifier {}, groups {}, threshold {}\n",
        run.hash,
        run.seed,
        t.model.kind,
        t.model.groups.as_ref().map(|g| g.to_string()).unwrap_or_default(),
        threshold
    );
    let _ = writeln!(md, "{} of {} scored editors exceed the threshold.\n", flagged.len(), scored.len());
    if !flagged.is_empty() {
        md.push_str("| editor | probability |\n|---|---|\n");
        for (e, p) in &flagged {
            let _ = writeln!(md, "| {e} | {p:.4} |");
        }
        for ((e, p), fit) in flagged.iter().zip(&fits) {
            let ex = &fit.explanation;
            let _ = writeln!(md, "\n## {e}\n\nprobability {p:.4}, local fit R^2 {:.3}\n", ex.surrogate_fit_r2);
            md.push_str("| feature | weight |\n|---|---|\n");
            for (name, w) in &ex.top_features {
                let _ = writeln!(md, "| {name} | {w:+.4} |");
            }
        }
    }
    std::fs::write(dir.join(RISK_REPORT), &md).map_err(CliError::data)?;

    let mut summary = format!("scored {} editors, {} above {threshold}\n", scored.len(), flagged.len());
    for (e, p) in &flagged {
        let _ = writeln!(summary, "  {e} {p:.4}");
    }
    say(out, &summary)
}

pub fn synth(kind: FixtureKind, config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = &config.out;
    let (bundle, pool) = match kind {
        FixtureKind::Cohort => (synth::cohort_fixture(&CohortShape::default()), Vec::new()),
        FixtureKind::Pipeline => {
            let mut shape = PipelineShape::default();
            if let Some(s) = config.seed {
                shape.seed = s;
            }
            synth::pipeline_fixture(&shape)
        }
    };
    bundle.write(dir).map_err(CliError::data)?;
    if !pool.is_empty() {
        let text: String = pool.iter().map(|e| format!("{e}\n")).collect();
        std::fs::write(dir.join(POOL_LIST), text).map_err(CliError::data)?;
    }
    let c = bundle.counts();
    say(
        out,
        &format!(
            "wrote {} editors, {} pages, {} missing-list entries to {}\n",
            c.editors,
            c.pages,
            c.missing_list,
            dir.display()
        ),
    )
}
