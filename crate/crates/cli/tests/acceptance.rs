//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed even when an earlier criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wikichurn::cohort::{curate, CohortParams};
use wikichurn::explain::{
    gini_importance, permutation_importance, surrogate_ranking, local_surrogate, SurrogateParams,
};
use wikichurn::features::{activity_features, FeatureMatrix, MinMax};
use wikichurn::ingest::{EditEvent, EditorId, FixtureSource, Namespace, PageRef};
use wikichurn::model::{split, train, Hyperparams, ModelKind, SplitSpec, TrainedModel};
use wikichurn::stats::{mann_whitney_u, pearson};
use wikichurn::synth::{default_signals, cohort_fixture, random_rows, synthetic_matrix, CohortShape};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

// ---------------------------------------------------------------- 1

/// U of `x` by direct pairwise comparison.
fn pairwise_u(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided p by relabelling every subset of the pooled values.
fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let n1 = x.len();
    let center = (n1 * y.len()) as f64 / 2.0;
    let obs = (pairwise_u(x, y) - center).abs();
    let (mut total, mut extreme) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (a, b): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
            pooled.iter().copied().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let a: Vec<f64> = a.into_iter().map(|p| p.1).collect();
        let b: Vec<f64> = b.into_iter().map(|p| p.1).collect();
        total += 1;
        if (pairwise_u(&a, &b) - center).abs() >= obs - 1e-9 {
            extreme += 1;
        }
    }
    f64::from(extreme) / f64::from(total)
}

fn two_pass_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n1 in 1..10usize {
        for n2 in 1..=10 - n1 {
            for rep in 0..6 {
                let tied = rep % 2 == 1;
                let draw = |rng: &mut ChaCha8Rng| -> f64 {
                    if tied {
                        f64::from(rng.random_range(1..=3u8))
                    } else {
                        rng.random::<f64>()
                    }
                };
                let x: Vec<f64> = (0..n1).map(|_| draw(&mut rng)).collect();
                let y: Vec<f64> = (0..n2).map(|_| draw(&mut rng)).collect();
                let got = mann_whitney_u(&x, &y).map_err(|e| e.to_string())?;
                let want = enumerated_p(&x, &y);
                worst = worst.max((got.p_two_sided - want).abs());
                if (got.u - pairwise_u(&x, &y)).abs() > 1e-9 {
                    return Err(format!("U mismatch for {x:?} vs {y:?}"));
                }
                cases += 1;
            }
        }
    }
    let mut worst_r: f64 = 0.0;
    for n in 2..200 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.random_range(-50.0..50.0)).collect();
        let got = pearson(&x, &y).map_err(|e| e.to_string())?;
        worst_r = worst_r.max((got - two_pass_pearson(&x, &y)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && worst_r <= 1e-12 && secs < 10.0,
        format!("{cases} MWU cases max |dp| {worst:.1e}, pearson max |dr| {worst_r:.1e}, {secs:.2}s"),
        format!("MWU max |dp| {worst:.3e}, pearson max |dr| {worst_r:.3e}, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let source = FixtureSource::new(cohort_fixture(&CohortShape::default()));
    let params = CohortParams::default();
    let (c1, r1) = curate(&source, source.missing_list(), &params).map_err(|e| e.to_string())?;
    let (c2, r2) = curate(&source, source.missing_list(), &params).map_err(|e| e.to_string())?;
    let counts = (r1.listed, r1.filtered, r1.candidates, r1.matched);
    check(
        counts == (1226, 1146, 5213, 2569) && (r1.mwu_p - 0.14).abs() <= 0.005 && r1 == r2 && c1 == c2,
        format!("listed/filtered/candidates/matched = {counts:?}, p = {:.4}, repeat identical", r1.mwu_p),
        format!("got {counts:?}, p = {:.4}, repeat identical = {}", r1.mwu_p, r1 == r2 && c1 == c2),
    )
}

// ---------------------------------------------------------------- 3

const T0: i64 = 1_500_000_000;
const DAY: i64 = 86_400;

fn ev(ns: Namespace, t: i64, delta: i64, minor: bool, dmg: Option<f64>, gf: Option<f64>) -> EditEvent {
    EditEvent {
        editor: EditorId::new("Golden").unwrap(),
        page: PageRef::new(format!("Page {}", ns.id()), ns).unwrap(),
        timestamp: T0 + t,
        byte_delta: delta,
        minor,
        ores_damaging_prob: dmg,
        ores_goodfaith_prob: gf,
        reverted: false,
        automated: false,
    }
}

/// (window, f1..f6, f13, f14, f7..f12)
type Golden = (Vec<EditEvent>, [u32; 8], [f64; 6]);

fn golden_windows() -> Vec<Golden> {
    use Namespace::*;
    let w4 = vec![
        ev(Article, 0, 10, false, Some(0.5), Some(0.5)),
        ev(Article, DAY, 10, false, Some(0.4999), Some(0.25)),
    ];
    let mut w5 = vec![
        ev(ArticleTalk, 5 * DAY, -40, false, None, None),
        ev(Article, 0, 60, false, None, None),
        ev(ArticleTalk, 10 * DAY, 20, true, None, None),
        ev(Article, 2 * DAY, -10, true, None, None),
    ];
    w5.swap(0, 3);
    vec![
        (
            vec![ev(Article, 0, 100, false, Some(0.1), Some(0.9))],
            [1, 0, 0, 0, 1, 0, 1, 0],
            [100.0, 0.0, 0.0, 0.0, 0.0, 0.9],
        ),
        (
            vec![
                ev(Article, 0, 10, false, Some(0.2), Some(0.8)),
                ev(Article, 61 * DAY, 30, false, Some(0.7), Some(0.6)),
            ],
            [2, 0, 0, 0, 2, 0, 1, 1],
            [20.0, 0.0, 0.0, 0.0, 2.0039421813403417, 0.7],
        ),
        (
            vec![
                ev(Article, 0, -50, false, None, None),
                ev(ArticleTalk, DAY, 5, true, None, None),
                ev(Project, 2 * DAY, -15, true, None, None),
                ev(ProjectTalk, 3 * DAY, 0, false, None, None),
            ],
            [1, 1, 1, 1, 2, 2, 0, 0],
            [0.0, 50.0, 5.0, 15.0, 0.09855453350854139, 0.0],
        ),
        (w4, [2, 0, 0, 0, 2, 0, 1, 1], [10.0, 0.0, 0.0, 0.0, 0.0328515111695138, 0.375]),
        (w5, [2, 2, 0, 0, 2, 2, 0, 0], [60.0, 40.0, 20.0, 10.0, 0.328515111695138, 0.0]),
        (
            vec![
                ev(Project, 0, -10, true, Some(0.9), Some(0.1)),
                ev(Project, 7 * DAY, -20, true, Some(0.8), Some(0.2)),
                ev(Project, 14 * DAY, -30, true, Some(0.95), Some(0.3)),
            ],
            [0, 0, 3, 0, 0, 3, 0, 3],
            [0.0, 0.0, 0.0, 20.0, 0.45992115637319314, 0.2],
        ),
        (
            vec![
                ev(ProjectTalk, 0, 1, false, Some(0.1), Some(1.0)),
                ev(ProjectTalk, 3600, 2, false, None, None),
                ev(ProjectTalk, 7200, 3, false, Some(0.6), Some(0.0)),
            ],
            [0, 0, 0, 3, 3, 0, 1, 1],
            [2.0, 0.0, 0.0, 0.0, 0.002737625930792816, 0.5],
        ),
        (
            vec![
                ev(Article, 0, 4, true, None, None),
                ev(Article, 2_630_016, 8, true, None, None),
            ],
            [2, 0, 0, 0, 0, 2, 0, 0],
            [0.0, 0.0, 6.0, 0.0, 1.0, 0.0],
        ),
        (
            vec![
                ev(Article, 0, 1_000_000, false, Some(0.3), Some(0.7)),
                ev(ArticleTalk, 365 * DAY, -2, false, Some(0.3), Some(0.7)),
            ],
            [1, 1, 0, 0, 2, 0, 2, 0],
            [1_000_000.0, 2.0, 0.0, 0.0, 11.990801576872535, 0.7],
        ),
        (
            vec![
                ev(ArticleTalk, 0, 7, true, None, Some(0.9)),
                ev(ArticleTalk, 0, 8, true, None, Some(0.9)),
                ev(ArticleTalk, 0, 9, true, None, Some(0.9)),
            ],
            [0, 3, 0, 0, 0, 3, 0, 0],
            [0.0, 0.0, 8.0, 0.0, 0.0, 0.9],
        ),
    ]
}

fn criterion_3() -> Outcome {
    let windows = golden_windows();
    for (i, (edits, ints, reals)) in windows.iter().enumerate() {
        let f = activity_features(edits).map_err(|e| format!("window {i}: {e}"))?;
        let got_ints = [
            f.f1_ns0, f.f2_ns1, f.f3_ns4, f.f4_ns5, f.f5_major, f.f6_minor, f.f13_goodfaith_count,
            f.f14_damaging_count,
        ];
        let got_reals = [
            f.f7_add_major, f.f8_del_major, f.f9_add_minor, f.f10_del_minor, f.f11_span_months,
            f.f12_ores_mean,
        ];
        if &got_ints != ints {
            return Err(format!("window {i}: integer features {got_ints:?}, want {ints:?}"));
        }
        for (g, w) in got_reals.iter().zip(reals) {
            if (g - w).abs() > 1e-9 {
                return Err(format!("window {i}: real features {got_reals:?}, want {reals:?}"));
            }
        }
    }
    check(true, format!("{} golden windows match (61 days -> 2.0039421813403417 months)", windows.len()), "")
}

// ---------------------------------------------------------------- 4

fn accuracy(model: &TrainedModel, rows: &[Vec<f64>], missing: &[bool]) -> f64 {
    let hits = rows
        .iter()
        .zip(missing)
        .filter(|(r, &m)| (model.predict_proba(r) >= 0.5) == m)
        .count();
    hits as f64 / rows.len() as f64
}

fn held_out(sep: f64, seed: u64, kind: ModelKind) -> Result<f64, String> {
    let data = synthetic_matrix(1000, &default_signals(), sep, seed);
    let classes: Vec<usize> = data.missing.iter().map(|&m| usize::from(!m)).collect();
    let part = split(&classes, &SplitSpec { train_fraction: 0.8, seed, stratified: true })
        .map_err(|e| e.to_string())?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (idx.iter().map(|&i| data.rows[i].clone()).collect(), idx.iter().map(|&i| data.missing[i]).collect())
    };
    let (xtr, ytr) = pick(&part.train);
    let (xte, yte) = pick(&part.test);
    let model = train(kind, &xtr, &ytr, &Hyperparams::default(), seed).map_err(|e| e.to_string())?;
    Ok(accuracy(&model, &xte, &yte))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in ModelKind::ALL {
        let mut sum = 0.0;
        for seed in 0..5 {
            sum += held_out(1.5, seed, kind)?;
        }
        let mean = sum / 5.0;
        ok &= mean >= 0.90;
        parts.push(format!("{} {mean:.3}", kind.cli_name()));
    }
    let secs = start.elapsed().as_secs_f64();
    // Reading the separation as the gap between class means instead.
    let mut gap = Vec::new();
    for kind in ModelKind::ALL {
        let mut sum = 0.0;
        for seed in 0..5 {
            sum += held_out(0.75, seed, kind)?;
        }
        gap.push(format!("{} {:.3}", kind.cli_name(), sum / 5.0));
    }
    println!("info criterion 4: with class means 1.5 sigma apart (not each 1.5 sigma from 0): {}", gap.join(", "));
    let msg = format!("mean accuracy over 5 seeds: {}; {secs:.1}s", parts.join(", "));
    check(ok && secs < 60.0, msg.clone(), msg)
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let fx = common::Fixture::new();
    let out = fx.dir.path().join("out");
    for cmd in ["curate", "featurize", "ablate"] {
        common::run_ok(&fx.args(cmd, &out, &[]))?;
    }
    let rows = common::csv_rows(&out.join("ablation.csv"));
    let header = rows.first().cloned().unwrap_or_default();
    let body = &rows[1..];
    let acc = |name: &str| -> Option<f64> {
        body.iter().find(|r| r[0] == name).and_then(|r| r[5].parse().ok())
    };
    let (g1, g145) = (acc("G1"), acc("G1+G4+G5"));
    check(
        header.join(",") == "features,classifier,precision,recall,f-score,accuracy"
            && body.len() == 13
            && matches!((g1, g145), (Some(a), Some(b)) if b >= a),
        format!("13 rows; G1 accuracy {g1:?} <= G1+G4+G5 accuracy {g145:?}"),
        format!("{} rows; G1 {g1:?}, G1+G4+G5 {g145:?}", body.len()),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let signals = default_signals();
    let mut hits = [0usize; 3];
    for run in 0..20u64 {
        let data = synthetic_matrix(1000, &signals, 1.5, 100 + run);
        let classes: Vec<usize> = data.missing.iter().map(|&m| usize::from(!m)).collect();
        let part = split(&classes, &SplitSpec { train_fraction: 0.8, seed: run, stratified: true })
            .map_err(|e| e.to_string())?;
        let matrix = |idx: &[usize]| FeatureMatrix {
            columns: data.columns.clone(),
            editors: idx.iter().map(|i| EditorId::new(format!("E{i}")).unwrap()).collect(),
            rows: idx.iter().map(|&i| data.rows[i].clone()).collect(),
            labels: idx
                .iter()
                .map(|&i| if data.missing[i] { wikichurn::cohort::Label::Missing } else { wikichurn::cohort::Label::Active })
                .collect(),
        };
        let (tr, te) = (matrix(&part.train), matrix(&part.test));
        let ytr: Vec<bool> = part.train.iter().map(|&i| data.missing[i]).collect();
        let mut model = train(ModelKind::RandomForest, &tr.rows, &ytr, &Hyperparams::default(), run)
            .map_err(|e| e.to_string())?;
        model.columns = data.columns.clone();

        let gini = gini_importance(&model).map_err(|e| e.to_string())?;
        let perm = permutation_importance(&model, &te, 5, run).map_err(|e| e.to_string())?;
        let fits = (0..20)
            .map(|i| {
                let p = SurrogateParams { n_samples: 1000, seed: run ^ i as u64, ..Default::default() };
                local_surrogate(&model, &te.editors[i], &te.rows[i], &tr.rows, &te.columns, &p)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let lime = surrogate_ranking(&fits, &te.columns);
        for (h, ranking) in hits.iter_mut().zip([&gini, &perm, &lime]) {
            let top: BTreeSet<&str> = ranking.top(6).collect();
            if signals.iter().all(|&s| top.contains(data.columns[s].as_str())) {
                *h += 1;
            }
        }
    }

    // A constant column never splits and never changes a prediction.
    let mut data = synthetic_matrix(400, &signals, 1.5, 9);
    for r in &mut data.rows {
        r[3] = 2.5;
    }
    let model = train(ModelKind::GradientBoost, &data.rows, &data.missing, &Hyperparams::default(), 9)
        .map_err(|e| e.to_string())?;
    let m = FeatureMatrix {
        columns: (0..16).map(|j| format!("x{j}")).collect(),
        editors: (0..400).map(|i| EditorId::new(format!("E{i}")).unwrap()).collect(),
        rows: data.rows.clone(),
        labels: data
            .missing
            .iter()
            .map(|&m| if m { wikichurn::cohort::Label::Missing } else { wikichurn::cohort::Label::Active })
            .collect(),
    };
    let g0 = gini_importance(&model).map_err(|e| e.to_string())?.score("x3");
    let p0 = permutation_importance(&model, &m, 5, 9).map_err(|e| e.to_string())?.score("x3");
    let need = 19;
    check(
        hits.iter().all(|&h| h >= need) && g0 == Some(0.0) && p0 == Some(0.0),
        format!("signals in top 6: gini {}/20, permutation {}/20, surrogate {}/20; constant column 0 under both", hits[0], hits[1], hits[2]),
        format!("gini {}/20, permutation {}/20, surrogate {}/20; constant gini {g0:?} perm {p0:?}", hits[0], hits[1], hits[2]),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let fx = common::Fixture::new();
    let mut trees = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = fx.dir.path().join(name);
        for cmd in common::PIPELINE {
            common::run_ok(&fx.args(cmd, &out, &["--workers", workers]))?;
        }
        trees.push(common::snapshot(&out));
    }
    let files = trees[0].len();
    check(
        files > 10 && trees[0] == trees[1] && trees[0] == trees[2],
        format!("{files} artifacts byte-identical across two runs and 1 vs 8 workers"),
        format!(
            "differing artifacts: run {:?}, workers {:?}",
            common::diff_names(&trees[0], &trees[1]),
            common::diff_names(&trees[0], &trees[2])
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let rows = random_rows(200, 12, 3);
    let mm = MinMax::fit(&rows);
    let inside = rows.iter().flat_map(|r| mm.transform(r)).all(|v| (0.0..=1.0).contains(&v));
    let col = MinMax::fit(&[vec![2.0], vec![6.0], vec![3.5]]);
    let v = col.transform(&[8.0])[0];
    check(
        inside && v == 1.5,
        format!("train columns in [0,1]; test value 8 with train range [2,6] -> {v}"),
        format!("inside = {inside}, value {v}"),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..100u64 {
        let kind = ModelKind::ALL[rng.random_range(0..4)];
        let width = rng.random_range(1..=20);
        let hp = Hyperparams {
            trees: rng.random_range(1..=25),
            max_depth: rng.random_range(1..=7),
            min_leaf: rng.random_range(1..=4),
            learning_rate: rng.random_range(0.01..0.5),
        };
        let rows = random_rows(150, width, 1000 + i);
        let missing: Vec<bool> = rows.iter().map(|r| r[0] + rng.random_range(-2.0..2.0) > 0.0).collect();
        let model = train(kind, &rows, &missing, &hp, i).map_err(|e| format!("model {i}: {e}"))?;
        let back = TrainedModel::from_json(&model.to_json()).map_err(|e| format!("model {i}: {e}"))?;
        let probe = random_rows(1000, width, 5000 + i);
        if let Some(r) = probe
            .iter()
            .find(|r| model.predict_proba(r).to_bits() != back.predict_proba(r).to_bits())
        {
            return Err(format!("model {i} ({kind}) predicts differently after reload at {r:?}"));
        }
        if back != model {
            return Err(format!("model {i} differs structurally after reload"));
        }
    }
    check(true, "100 random models reload with bit-identical predictions on 1000 rows", "")
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("statistics oracle equivalence", criterion_1),
        ("cohort replay", criterion_2),
        ("activity feature golden vectors", criterion_3),
        ("classifier capability", criterion_4),
        ("ablation structure", criterion_5),
        ("importance agreement", criterion_6),
        ("end-to-end determinism", criterion_7),
        ("normalization correctness", criterion_8),
        ("model serialization", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS criterion {} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
