//! Synthetic data: a fixture with full-size cohort counts, a
//! small end-to-end pipeline fixture, and labeled matrices with planted
//! signal columns.

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::features::{ACTIVITY_COLUMNS, SENTENCE_DIM};
use crate::ingest::{
    ActivitySummary, EditEvent, EditorId, EditorPayload, FixtureBundle, MissingEntry, Namespace,
    PageCount, PagePayload, PageRef, Revision,
};
use crate::stats;

const DAY: i64 = 86_400;
/// 2021-01-01T00:00:00Z.
pub const SNAPSHOT_AT: i64 = 1_609_459_200;
const MISSING_LAST_EDIT: i64 = 1_559_347_200; // 2019-06-01
const ACTIVE_LAST_EDIT: i64 = 1_606_780_800; // 2020-12-01
const ACTIVE_IN_CUTOFF_YEAR: i64 = 1_580_515_200; // 2020-02-01
const SPAN_DAYS: i64 = 1000;

fn id(s: String) -> EditorId {
    EditorId::new(s).expect("generated names are valid")
}

fn page(title: String, ns: Namespace) -> PageRef {
    PageRef::new(title, ns).expect("generated titles are valid")
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Activity whose edits-per-day rate is exactly `total / 1000`.
fn activity(total: u64, last: i64) -> ActivitySummary {
    ActivitySummary {
        total_edits: total,
        first_edit: last - SPAN_DAYS * DAY,
        last_edit: last,
    }
}

fn one_edit(editor: &EditorId, p: &PageRef, t: i64) -> EditEvent {
    EditEvent {
        editor: editor.clone(),
        page: p.clone(),
        timestamp: t,
        byte_delta: 42,
        minor: false,
        ores_damaging_prob: Some(0.1),
        ores_goodfaith_prob: Some(0.9),
        reverted: false,
        automated: false,
    }
}

fn revisions(editor: &EditorId, n: usize, start: i64) -> Vec<Revision> {
    (0..n)
        .map(|j| Revision { editor: editor.clone(), timestamp: start + j as i64 * 60 })
        .collect()
}

/// Stage counts the full-size cohort fixture is built to reproduce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortShape {
    pub listed: usize,
    pub filtered: usize,
    pub candidates: usize,
    pub matched: usize,
    pub target_p: f64,
    pub pages_per_ns: usize,
    pub top_k: usize,
}

impl Default for CohortShape {
    fn default() -> Self {
        CohortShape {
            listed: 1226,
            filtered: 1146,
            candidates: 5213,
            matched: 2569,
            target_p: 0.14,
            pages_per_ns: 20,
            top_k: 10,
        }
    }
}

fn missing_totals(n: usize) -> Vec<u64> {
    // Rates evenly spread over [3, 13] edits/day.
    (0..n)
        .map(|k| ((3.0 + 10.0 * (k as f64 + 0.5) / n as f64) * 1000.0).round() as u64)
        .collect()
}

fn in_band_totals(n: usize) -> Vec<u64> {
    // Rates spread over [5.4, 10.6], visited in a scrambled order.
    (0..n)
        .map(|c| {
            let q = (c * 7919) % n;
            ((5.4 + 5.2 * (q as f64 + 0.5) / n as f64) * 1000.0).round() as u64
        })
        .collect()
}

fn out_of_band_total(j: usize, n: usize) -> u64 {
    let u = j as f64 / n as f64;
    let rate = if j % 2 == 0 { 0.5 + 4.0 * u } else { 12.0 + 13.0 * u };
    (rate * 1000.0).round() as u64
}

fn rates(totals: &[u64]) -> Vec<f64> {
    totals.iter().map(|&t| activity(t, 0).edits_per_day()).collect()
}

/// Shift (in edits per 1000 days) of the in-band candidates that brings the
/// Mann-Whitney p-value closest to `target`.
fn tune_shift(missing: &[f64], base: &[u64], target: f64) -> i64 {
    let mut best = (f64::INFINITY, 0i64);
    for shift in -250i64..=250 {
        let shifted: Vec<u64> = base.iter().map(|&t| (t as i64 + shift) as u64).collect();
        let p = stats::mann_whitney_u(missing, &rates(&shifted))
            .expect("non-empty samples")
            .p_two_sided;
        let d = (p - target).abs();
        if d < best.0 {
            best = (d, shift);
        }
    }
    best.1
}

/// Fixture whose curation reproduces fixed stage counts: every
/// retained missing editor has `pages_per_ns` pages in each harvested
/// namespace, exactly `top_k` co-editors on its own article page, and the
/// candidates' rates are placed so that `matched` of them fall inside the
/// one-sigma band with the target comparability p-value.
pub fn cohort_fixture(shape: &CohortShape) -> FixtureBundle {
    let n_dropped = shape.listed - shape.filtered;
    let listed: Vec<EditorId> = (0..shape.listed).map(|i| id(format!("Listed{i:04}"))).collect();
    let cands: Vec<EditorId> = (0..shape.candidates).map(|c| id(format!("Cand{c:04}"))).collect();

    let m_totals = missing_totals(shape.filtered);
    let m_rates = rates(&m_totals);
    let base = in_band_totals(shape.matched);
    let shift = tune_shift(&m_rates, &base, shape.target_p);
    let (mean, sigma) = {
        let d = stats::describe(&m_rates).expect("non-empty");
        (d.mean, d.std)
    };

    let mut missing_list = Vec::with_capacity(shape.listed);
    let mut editors = Vec::new();
    let mut pages = Vec::new();

    let filler_per_ns = shape.pages_per_ns - 1;
    let harvest_ns = [Namespace::Article, Namespace::Project, Namespace::ArticleTalk];
    let mut fillers = Vec::new();
    for ns in harvest_ns {
        for j in 0..filler_per_ns {
            let p = page(format!("Shared {} {j:02}", ns.id()), ns);
            pages.push(PagePayload { page: p.clone(), revisions: vec![] });
            fillers.push(p);
        }
    }

    let mut cand_pages: Vec<Option<PageRef>> = vec![None; shape.candidates];

    for (i, who) in listed.iter().enumerate() {
        if i < n_dropped {
            // Listed, but still editing in the cutoff year.
            let listed_date = if i % 2 == 0 { date(2020, 3, 1) } else { date(2019, 5, 1) };
            missing_list.push(MissingEntry { editor: who.clone(), last_edit_date: listed_date });
            let p = page(format!("Dropped article {i:04}"), Namespace::Article);
            pages.push(PagePayload { page: p.clone(), revisions: revisions(who, 1, ACTIVE_IN_CUTOFF_YEAR) });
            editors.push(EditorPayload {
                id: who.clone(),
                activity: activity(5000, ACTIVE_IN_CUTOFF_YEAR),
                edits: vec![one_edit(who, &p, ACTIVE_IN_CUTOFF_YEAR)],
                page_counts: vec![PageCount { page: p, count: 1, reverted: 0 }],
                user_page_text: None,
                admin_score: 800.0,
            });
            continue;
        }
        let k = i - n_dropped;
        missing_list.push(MissingEntry { editor: who.clone(), last_edit_date: date(2019, 6, 1) });
        let own_main = page(format!("Article {k:04}"), Namespace::Article);
        let own_project = page(format!("Project page {k:04}"), Namespace::Project);
        let own_talk = page(format!("Article {k:04}"), Namespace::ArticleTalk);

        let t0 = MISSING_LAST_EDIT - 30 * DAY;
        let mut revs = revisions(who, 5, t0);
        let slots = shape.top_k - usize::from(k < n_dropped);
        for r in 0..slots {
            let c = (k * shape.top_k + r) % shape.candidates;
            revs.extend(revisions(&cands[c], shape.top_k + 1 - r, t0 + 1000 * (r as i64 + 1)));
            cand_pages[c].get_or_insert_with(|| own_main.clone());
        }
        if k < n_dropped {
            // A listed editor outranks every candidate here and must be
            // removed after the union.
            revs.extend(revisions(&listed[k], 2 * shape.top_k, t0 + 20_000));
        }
        pages.push(PagePayload { page: own_main.clone(), revisions: revs });
        pages.push(PagePayload { page: own_project.clone(), revisions: revisions(who, 2, t0) });
        pages.push(PagePayload { page: own_talk.clone(), revisions: revisions(who, 2, t0) });

        let mut page_counts = vec![
            PageCount { page: own_main.clone(), count: 50, reverted: (k % 3) as u64 },
            PageCount { page: own_project, count: 50, reverted: 0 },
            PageCount { page: own_talk, count: 50, reverted: 0 },
        ];
        page_counts.extend(fillers.iter().map(|p| PageCount { page: p.clone(), count: 5, reverted: 0 }));
        editors.push(EditorPayload {
            id: who.clone(),
            activity: activity(m_totals[k], MISSING_LAST_EDIT),
            edits: vec![one_edit(who, &own_main, MISSING_LAST_EDIT)],
            page_counts,
            user_page_text: None,
            admin_score: 734.38 + 165.38 * ((k % 21) as f64 - 10.0) / 10.0,
        });
    }

    for (c, who) in cands.iter().enumerate() {
        let total = if c < shape.matched {
            let t = (base[c] as i64 + shift) as u64;
            debug_assert!((activity(t, 0).edits_per_day() - mean).abs() <= sigma);
            t
        } else {
            let j = c - shape.matched;
            out_of_band_total(j, shape.candidates - shape.matched)
        };
        let p = cand_pages[c].clone().expect("every candidate is placed");
        editors.push(EditorPayload {
            id: who.clone(),
            activity: activity(total, ACTIVE_LAST_EDIT),
            edits: vec![one_edit(who, &p, ACTIVE_LAST_EDIT)],
            page_counts: vec![PageCount { page: p, count: 1, reverted: u64::from(c % 4 == 0) }],
            user_page_text: None,
            admin_score: 823.86 + 174.93 * ((c % 21) as f64 - 10.0) / 10.0,
        });
    }

    FixtureBundle::new(SNAPSHOT_AT, editors, pages, missing_list)
}

const SENTENCES: &[&str] = &[
    "I am interested in history and geography.",
    "I mostly edit articles about music and film.",
    "Please leave a message on my talk page!",
    "This user enjoys reading books about science.",
    "I fix typos and improve the grammar of articles.",
    "My favorite topics are sports, cooking and travel.",
    "I have been contributing to the encyclopedia for many years.",
    "Feel free to ask me for help with citations.",
    "I believe in neutral and reliable sources.",
    "Sometimes I write new articles about local towns.",
    "I like to review new pages and welcome newcomers.",
    "Thanks for visiting my user page.",
    "I speak English and some French.",
    "Disputes should be settled through calm discussion.",
    "I work as a teacher and edit in my free time.",
    "<b>Visit</b> my [[Portal:Physics|physics portal]] work.",
    "Check out https://example.org for my photos.",
    "{{User wikipedia/Autopatrolled}} I patrol recent changes.",
];

/// Parameters of the end-to-end synthetic fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineShape {
    pub missing: usize,
    pub actives_per_missing: usize,
    pub pool_at_risk: usize,
    pub pool_other: usize,
    pub edits_per_editor: usize,
    pub seed: u64,
}

impl Default for PipelineShape {
    fn default() -> Self {
        PipelineShape {
            missing: 60,
            actives_per_missing: 2,
            pool_at_risk: 8,
            pool_other: 24,
            edits_per_editor: 30,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Profile {
    Missing,
    Active,
    AtRisk,
    Safe,
}

/// A fixture whose missing and active editors differ only in admin score
/// and revert counts; activity and text are drawn from one distribution.
/// Also returns the scoring pool (first `pool_at_risk` names are the
/// planted at-risk editors).
pub fn pipeline_fixture(shape: &PipelineShape) -> (FixtureBundle, Vec<EditorId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let mut editors = Vec::new();
    let mut pages = Vec::new();
    let mut missing_list = Vec::new();

    let n_active = shape.missing * shape.actives_per_missing;
    let actives: Vec<EditorId> = (0..n_active).map(|a| id(format!("Active{a:03}"))).collect();
    let mut pool = Vec::new();

    let add = |who: &EditorId,
                   profile: Profile,
                   total: u64,
                   last: i64,
                   own_main: Option<(PageRef, Vec<Revision>)>,
                   rng: &mut ChaCha8Rng,
                   editors: &mut Vec<EditorPayload>,
                   pages: &mut Vec<PagePayload>| {
        let (admin_mu, revert_range) = match profile {
            Profile::Missing => (380.0, 2..=5),
            Profile::Active => (620.0, 0..=1),
            Profile::AtRisk => (250.0, 5..=6),
            Profile::Safe => (800.0, 0..=0),
        };
        let admin: f64 = Normal::new(admin_mu, 40.0).expect("valid normal").sample(rng);
        let mut page_counts = Vec::new();
        if let Some((p, revs)) = own_main {
            let reverted = rng.random_range(revert_range.clone());
            page_counts.push(PageCount { page: p.clone(), count: 40, reverted });
            pages.push(PagePayload { page: p, revisions: revs });
        }
        for j in 0..4 {
            let p = page(format!("{who} article {j}"), Namespace::Article);
            let reverted = rng.random_range(revert_range.clone());
            page_counts.push(PageCount { page: p.clone(), count: 20 - j, reverted });
            pages.push(PagePayload { page: p, revisions: revisions(who, 3, last - DAY) });
        }
        let namespaces = [
            Namespace::Article,
            Namespace::Article,
            Namespace::ArticleTalk,
            Namespace::Project,
            Namespace::ProjectTalk,
        ];
        let span = rng.random_range(5..200) as i64 * DAY;
        let edits = (0..shape.edits_per_editor)
            .map(|e| {
                let ns = *namespaces.choose(rng).expect("non-empty");
                let p = page(format!("{who} workspace {}", ns.id()), ns);
                let damaging: f64 = rng.random::<f64>() * 0.7;
                EditEvent {
                    editor: who.clone(),
                    page: p,
                    timestamp: last - span * e as i64 / shape.edits_per_editor as i64,
                    byte_delta: rng.random_range(-400..800),
                    minor: rng.random_bool(0.35),
                    ores_damaging_prob: Some(damaging),
                    ores_goodfaith_prob: Some(1.0 - damaging * rng.random::<f64>()),
                    reverted: false,
                    automated: rng.random_bool(0.05),
                }
            })
            .collect();
        let n_sentences = rng.random_range(1..=4);
        let text = (0..n_sentences)
            .map(|_| *SENTENCES.choose(rng).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" ");
        editors.push(EditorPayload {
            id: who.clone(),
            activity: activity(total, last),
            edits,
            page_counts,
            user_page_text: Some(text),
            admin_score: (admin * 100.0).round() / 100.0,
        });
    };

    for k in 0..shape.missing {
        let who = id(format!("Missing{k:03}"));
        missing_list.push(MissingEntry { editor: who.clone(), last_edit_date: date(2019, 6, 1) });
        let own = page(format!("Topic {k:03}"), Namespace::Article);
        let t0 = MISSING_LAST_EDIT - 40 * DAY;
        let mut revs = revisions(&who, 4, t0);
        for r in 0..shape.actives_per_missing {
            let a = &actives[k * shape.actives_per_missing + r];
            revs.extend(revisions(a, 3 + r, t0 + 10_000 * (r as i64 + 1)));
        }
        let total = rng.random_range(2000..6000);
        add(&who, Profile::Missing, total, MISSING_LAST_EDIT, Some((own, revs)), &mut rng, &mut editors, &mut pages);
    }
    for a in &actives {
        let total = rng.random_range(3400..4600);
        add(a, Profile::Active, total, ACTIVE_LAST_EDIT, None, &mut rng, &mut editors, &mut pages);
    }
    for p in 0..shape.pool_at_risk + shape.pool_other {
        let at_risk = p < shape.pool_at_risk;
        let who = id(if at_risk { format!("Pool{p:02}r") } else { format!("Pool{p:02}") });
        let profile = if at_risk { Profile::AtRisk } else { Profile::Safe };
        let total = rng.random_range(3000..5000);
        add(&who, profile, total, ACTIVE_LAST_EDIT, None, &mut rng, &mut editors, &mut pages);
        pool.push(who);
    }
    (FixtureBundle::new(SNAPSHOT_AT, editors, pages, missing_list), pool)
}

/// Labeled matrix with Gaussian noise columns; columns in `signals` have
/// class means at `+separation` (missing) and `-separation` (active), in
/// units of the unit noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub missing: Vec<bool>,
    pub signals: Vec<usize>,
}

/// The sixteen non-linguistic column names (activity, admin score, reverts).
pub fn behavior_columns() -> Vec<String> {
    let mut c: Vec<String> = ACTIVITY_COLUMNS.iter().map(|n| format!("g1.{n}")).collect();
    c.push("g4.admin_score".into());
    c.push("g5.revert_rate".into());
    c
}

/// Default planted signals: namespace-like, admin-like, revert-like.
pub fn default_signals() -> Vec<usize> {
    vec![0, 14, 15]
}

pub fn synthetic_matrix(n: usize, signals: &[usize], separation: f64, seed: u64) -> SyntheticMatrix {
    let columns = behavior_columns();
    let width = columns.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for i in 0..n {
        let is_missing = i % 2 == 0;
        let row: Vec<f64> = (0..width)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if signals.contains(&j) {
                    z + if is_missing { separation } else { -separation }
                } else {
                    z
                }
            })
            .collect();
        rows.push(row);
        missing.push(is_missing);
    }
    SyntheticMatrix { columns, rows, missing, signals: signals.to_vec() }
}

/// Random unit-free rows for round-trip checks.
pub fn random_rows(n: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..width).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

/// Width of the hashing encoder output, re-exported for fixture writers.
pub const SENTENCE_WIDTH: usize = SENTENCE_DIM;
