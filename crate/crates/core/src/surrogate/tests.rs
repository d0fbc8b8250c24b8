use super::*;
use crate::rng::stream;
use crate::space::ParameterSpec;
use alloc::vec;
use rand::Rng;

fn unit_space(d: usize) -> ParameterSpace {
    let names = ["a", "b", "c", "d", "e", "f", "g"];
    ParameterSpace::new(
        (0..d)
            .map(|i| ParameterSpec::continuous(names[i], 0.0, 1.0).unwrap())
            .collect(),
    )
    .unwrap()
}

fn two_clusters(n: usize, seed: u64) -> TrainingSet {
    let mut rng = stream(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut targets = Vec::new();
    for i in 0..n {
        let pos = i % 2 == 0;
        let c = if pos { 0.75 } else { 0.25 };
        inputs.push(ParameterVector(vec![
            c + 0.2 * (rng.random::<f64>() - 0.5),
            c + 0.2 * (rng.random::<f64>() - 0.5),
        ]));
        labels.push(if pos { Label::Positive } else { Label::Negative });
        targets.push(if pos { 0.05 } else { 0.6 });
    }
    TrainingSet::new(unit_space(2), inputs, labels, targets).unwrap()
}

fn brute_f1(p: &[Label], t: &[Label]) -> f64 {
    let tp = p.iter().zip(t).filter(|(a, b)| **a == Label::Positive && **b == Label::Positive).count() as f64;
    let pp = p.iter().filter(|a| **a == Label::Positive).count() as f64;
    let ap = t.iter().filter(|a| **a == Label::Positive).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        // harmonic mean expressed through counts
        2.0 * tp / (pp + ap)
    }
}

#[test]
fn separable_training_f1_is_one() {
    let data = two_clusters(60, 1);
    for family in Family::ALL {
        let s = fit(family, Mode::Classifier, &data).unwrap();
        assert_eq!(s.validation_score(), 1.0, "{family:?}");
        let p: Vec<Label> = data.inputs().iter().map(|v| s.predict_label(v).unwrap()).collect();
        assert_eq!(f1_score(&p, data.labels()).unwrap(), 1.0);
    }
}

#[test]
fn constant_targets_predict_constant() {
    let mut data = two_clusters(40, 2);
    data.targets.iter_mut().for_each(|t| *t = 0.42);
    for family in Family::ALL {
        let s = fit(family, Mode::Regressor, &data).unwrap();
        for v in [vec![0.1, 0.9], vec![0.5, 0.5], vec![0.99, 0.01]] {
            let y = s.predict_value(&v).unwrap();
            // the epsilon tube lets the SVR settle anywhere within 0.001 of the constant
            let tol = if family == Family::SupportVectorMachine { 1.1e-3 } else { 1e-6 };
            assert!((y - 0.42).abs() < tol, "{family:?}: {y}");
        }
    }
}

#[test]
fn boosted_square_function() {
    let space = unit_space(1);
    let grid: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
    let data = TrainingSet::new(
        space,
        grid.iter().map(|&x| ParameterVector(vec![x])).collect(),
        vec![Label::Positive; 200],
        grid.iter().map(|&x| x * x).collect(),
    )
    .unwrap();
    let s = fit(Family::GradientBoostedTrees, Mode::Regressor, &data).unwrap();
    // held-out grid: midpoints between training points
    let held: Vec<f64> = (0..199).map(|i| (i as f64 + 0.5) / 199.0).collect();
    let pred: Vec<f64> = held.iter().map(|&x| s.predict_value(&[x]).unwrap()).collect();
    let truth: Vec<f64> = held.iter().map(|&x| x * x).collect();
    let e = rmse(&pred, &truth).unwrap();
    assert!(e <= 0.01, "rmse {e}");
    let trace = s.boosting_loss_trace().unwrap();
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn prediction_clipped_to_unit_interval() {
    assert_eq!(clip_unit(-0.02), 0.0);
    assert_eq!(clip_unit(1.3), 1.0);
    assert_eq!(clip_unit(0.3), 0.3);
}

#[test]
fn mode_errors() {
    let data = two_clusters(30, 3);
    let c = fit(Family::DecisionTree, Mode::Classifier, &data).unwrap();
    assert!(matches!(c.predict_value(&[0.5, 0.5]), Err(Error::Mode { .. })));
    let r = fit(Family::DecisionTree, Mode::Regressor, &data).unwrap();
    assert!(matches!(r.predict_label(&[0.5, 0.5]), Err(Error::Mode { .. })));
}

#[test]
fn single_label_classifier_rejected() {
    let mut data = two_clusters(30, 3);
    data.labels.iter_mut().for_each(|l| *l = Label::Negative);
    for family in Family::ALL {
        assert!(matches!(
            fit(family, Mode::Classifier, &data),
            Err(Error::InsufficientData(_))
        ));
    }
}

#[test]
fn degenerate_tree_predicts_majority() {
    let inputs = vec![ParameterVector(vec![0.5, 0.5]); 7];
    let labels = vec![
        Label::Positive,
        Label::Negative,
        Label::Positive,
        Label::Positive,
        Label::Negative,
        Label::Positive,
        Label::Negative,
    ];
    let majority = if labels.iter().filter(|l| l.is_positive()).count() * 2 > labels.len() {
        Label::Positive
    } else {
        Label::Negative
    };
    let data = TrainingSet::new(unit_space(2), inputs, labels, vec![0.1; 7]).unwrap();
    let s = fit(Family::DecisionTree, Mode::Classifier, &data).unwrap();
    assert_eq!(s.predict_label(&[0.5, 0.5]).unwrap(), majority);
    assert_eq!(s.predict_label(&[0.1, 0.9]).unwrap(), majority);
}

#[test]
fn prediction_is_pure() {
    let data = two_clusters(50, 4);
    for family in Family::ALL {
        let a = fit(family, Mode::Regressor, &data).unwrap();
        let b = fit(family, Mode::Regressor, &data).unwrap();
        let v = [0.33, 0.66];
        assert_eq!(a.predict_value(&v).unwrap(), a.predict_value(&v).unwrap());
        assert_eq!(a.predict_value(&v).unwrap(), b.predict_value(&v).unwrap());
    }
}

#[test]
fn f1_examples() {
    use Label::*;
    assert_eq!(f1_score(&[Positive, Negative], &[Positive, Negative]).unwrap(), 1.0);
    let p = [Positive, Positive, Positive, Negative];
    let t = [Positive, Positive, Negative, Positive];
    assert!((f1_score(&p, &t).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(f1_score(&[Negative, Negative], &[Positive, Negative]).unwrap(), 0.0);
    assert!(f1_score(&[Negative], &[]).is_err());
}

#[test]
fn rmse_examples() {
    assert_eq!(rmse(&[0.2, 0.3], &[0.2, 0.3]).unwrap(), 0.0);
    assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
    assert!((rmse(&[1.0, 3.0], &[1.0, 1.0]).unwrap() - 1.41421).abs() < 1e-5);
    assert!(matches!(rmse(&[], &[]), Err(Error::Empty(_))));
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = stream(77);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let p: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { Label::Positive } else { Label::Negative }).collect();
        let t: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { Label::Positive } else { Label::Negative }).collect();
        assert!((f1_score(&p, &t).unwrap() - brute_f1(&p, &t)).abs() < 1e-12);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mut acc = 0.0;
        for i in 0..n {
            acc += (a[i] - b[i]).powi(2);
        }
        assert!((rmse(&a, &b).unwrap() - (acc / n as f64).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn cross_validation_separable() {
    let data = two_clusters(60, 5);
    for family in Family::ALL {
        assert_eq!(cross_validate(family, Mode::Classifier, &data, 3, 1).unwrap(), 1.0);
    }
}

#[test]
fn cross_validation_random_labels_near_base_rate() {
    let mut ok = 0;
    for seed in 0..20u64 {
        let mut rng = stream(1000 + seed);
        let inputs: Vec<ParameterVector> = (0..200)
            .map(|_| ParameterVector(vec![rng.random(), rng.random()]))
            .collect();
        let mut labels: Vec<Label> = (0..200)
            .map(|i| if i < 100 { Label::Positive } else { Label::Negative })
            .collect();
        shuffle(&mut labels, &mut rng);
        let data = TrainingSet::new(unit_space(2), inputs, labels, vec![0.5; 200]).unwrap();
        let f1 = cross_validate(Family::DecisionTree, Mode::Classifier, &data, 3, seed).unwrap();
        if f1 <= 0.75 {
            ok += 1;
        }
    }
    assert!(ok >= 19, "{ok}/20");
}

#[test]
fn leave_one_out_on_six_rows() {
    let data = two_clusters(6, 6);
    for family in Family::ALL {
        cross_validate(family, Mode::Classifier, &data, 6, 0).unwrap();
        cross_validate(family, Mode::Regressor, &data, 6, 0).unwrap();
    }
    assert!(cross_validate(Family::DecisionTree, Mode::Classifier, &data, 7, 0).is_err());
}

#[test]
fn stratified_folds_balance_labels() {
    let data = two_clusters(60, 7);
    let fold = fold_assignment(&data, Mode::Classifier, 3, 9);
    for f in 0..3 {
        let pos = (0..60).filter(|&r| fold[r] == f && data.labels()[r].is_positive()).count();
        assert_eq!(pos, 10);
    }
    assert_eq!(fold, fold_assignment(&data, Mode::Classifier, 3, 9));
}

#[test]
fn svm_dual_constraints_on_surrogate_data() {
    let data = two_clusters(80, 8);
    let s = fit(Family::SupportVectorMachine, Mode::Regressor, &data).unwrap();
    let dual = &s.svm().unwrap().dual;
    let balance: f64 = dual.alpha.iter().zip(&dual.y).map(|(a, y)| a * y).sum();
    assert!(balance.abs() < 1e-6);
    assert!(dual.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
}

#[test]
fn best_of_families_records_cv_score() {
    let data = two_clusters(60, 9);
    let s = BestOfFamilies::default().select(Mode::Classifier, &data, 3).unwrap();
    assert_eq!(s.validation_score(), 1.0);
    assert_eq!(s.family(), Family::DecisionTree);
}
