use super::*;
use rand::Rng;

fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 7.0]).collect();
    let y = (0..40).map(|i| i < 17).collect();
    (rows, y)
}

#[test]
fn every_kind_fits_separable_data() {
    let (rows, y) = separable();
    for kind in ModelKind::ALL {
        let m = train(kind, &rows, &y, &Hyperparams { trees: 20, ..Default::default() }, 1).unwrap();
        for (r, &l) in rows.iter().zip(&y) {
            assert_eq!(m.predict_proba(r) >= 0.5, l, "{kind}");
        }
        assert!(m.trees.iter().flat_map(|t| t.splits()).all(|(f, _)| f == 0), "{kind}");
    }
}

#[test]
fn single_class_rejected() {
    let rows = vec![vec![1.0]; 6];
    assert!(matches!(
        train(ModelKind::DecisionTree, &rows, &[true; 6], &Hyperparams::default(), 0),
        Err(ModelError::SingleClass)
    ));
}

#[test]
fn adaboost_weight_formula() {
    assert!((adaboost_alpha(0.25) - 0.5 * 3f64.ln()).abs() < 1e-15);
    assert!((adaboost_alpha(0.25) - 0.5493).abs() < 1e-4);
}

#[test]
fn kind_names() {
    for k in ModelKind::ALL {
        assert_eq!(k.cli_name().parse::<ModelKind>().unwrap(), k);
    }
    assert!("svm".parse::<ModelKind>().is_err());
}

#[test]
fn json_round_trip_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 1.0).collect();
    for kind in ModelKind::ALL {
        let m = train(kind, &rows, &y, &Hyperparams { trees: 10, ..Default::default() }, 4).unwrap();
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for r in &rows {
            assert_eq!(back.predict_proba(r).to_bits(), m.predict_proba(r).to_bits());
        }
    }
}

#[test]
fn training_is_deterministic() {
    let (rows, y) = separable();
    let a = train(ModelKind::RandomForest, &rows, &y, &Hyperparams::default(), 5).unwrap();
    let b = train(ModelKind::RandomForest, &rows, &y, &Hyperparams::default(), 5).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn flag_threshold_is_strict() {
    let e = |s: &str| EditorId::new(s).unwrap();
    let scored = vec![(e("a"), 0.95), (e("b"), 0.81), (e("c"), 0.60), (e("d"), 0.8)];
    assert_eq!(flag(&scored, 0.8).len(), 2);
    assert!(flag(&[], 0.8).is_empty());
}

#[test]
fn default_combos_are_thirteen() {
    let c = default_combos();
    assert_eq!(c.len(), 13);
    assert_eq!(c[12].to_string(), "G1G3G4G5");
}
