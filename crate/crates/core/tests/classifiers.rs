use dmdc_core::classify::logistic::{fit_logistic, softplus};
use dmdc_core::classify::store::{decode_model, encode_model, ModelMetadata};
use dmdc_core::classify::svm::fit_linear_svm;
use dmdc_core::classify::{default_model_grid, train, ModelKind, ModelSpec};
use dmdc_core::dmdc::InputType;
use dmdc_core::seed::rng_for;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn blobs(n: usize, dim: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = rng_for(seed, &[]);
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    labels.swap(0, n - 1);
    let rows = labels
        .iter()
        .map(|&l| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) + gap * f64::from(l))
                .collect()
        })
        .collect();
    (rows, labels)
}

/// Penalized log-loss evaluated independently of the solver.
fn objective(rows: &[Vec<f64>], labels: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let mut total = 0.0;
    for (r, &y) in rows.iter().zip(labels) {
        let z = b + r.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>();
        total += softplus(z) - f64::from(y) * z;
    }
    total + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn logistic_solution_is_a_local_minimum() {
    let (rows, labels) = blobs(200, 3, 1.0, 4);
    let fit = fit_logistic(&rows, &labels, 1.0).unwrap();
    let best = objective(&rows, &labels, &fit.weights, fit.bias, 1.0);
    for j in 0..=3 {
        for step in [1e-4, -1e-4] {
            let mut w = fit.weights.clone();
            let mut b = fit.bias;
            if j < 3 {
                w[j] += step;
            } else {
                b += step;
            }
            assert!(objective(&rows, &labels, &w, b, 1.0) >= best - 1e-12);
        }
    }
    assert!((fit.loss_history.last().unwrap() - best).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn logistic_loss_never_increases(n in 4usize..120, dim in 1usize..6, gap in 0.0f64..4.0, seed in any::<u64>()) {
        let (rows, labels) = blobs(n, dim, gap, seed);
        let fit = fit_logistic(&rows, &labels, 1.0).unwrap();
        for pair in fit.loss_history.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn svm_duplication_keeps_decisions(n in 4usize..60, dim in 1usize..5, seed in any::<u64>(), c in prop::sample::select(vec![0.01, 1.0, 100.0])) {
        let (rows, labels) = blobs(n, dim, 1.5, seed);
        let doubled_rows: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let doubled_labels: Vec<u8> = labels.iter().chain(&labels).copied().collect();
        let once = fit_linear_svm(&rows, &labels, c, seed).unwrap();
        let twice = fit_linear_svm(&doubled_rows, &doubled_labels, c, seed).unwrap();
        let decide = |w: &[f64], b: f64, x: &[f64]| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        for x in &rows {
            let (a, b) = (decide(&once.weights, once.bias, x), decide(&twice.weights, twice.bias, x));
            // Points on the margin boundary may flip within solver tolerance.
            if a.abs() > 1e-3 && b.abs() > 1e-3 {
                prop_assert_eq!(a > 0.0, b > 0.0);
            }
        }
    }

    #[test]
    fn store_round_trips_every_model(seed in any::<u64>(), pick in 0usize..14) {
        let (rows, labels) = blobs(40, 4, 1.0, seed);
        let kind = default_model_grid()[pick];
        let model = train(ModelSpec::new(kind, seed), &rows, &labels).unwrap();
        let meta = ModelMetadata {
            score: Some("ctrs".into()),
            w: Some(5),
            n_lambda: Some(3),
            input_type: Some(InputType::Combined),
            fold: Some(2),
            held_out: vec!["s1".into(), "s2".into()],
        };
        let bytes = encode_model(&model, &meta).unwrap();
        let (back, meta_back) = decode_model(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(meta_back, meta);
        for x in &rows {
            prop_assert_eq!(back.predict_proba(x).unwrap().to_bits(), model.predict_proba(x).unwrap().to_bits());
        }
    }
}

#[test]
fn standardized_knn_ignores_feature_scale() {
    let (rows, labels) = blobs(80, 2, 1.0, 9);
    let stretched: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] * 1000.0, r[1]]).collect();
    let kind = ModelKind::Knn { k: 5, standardize: true };
    let plain = train(ModelSpec::new(kind, 0), &rows, &labels).unwrap();
    let scaled = train(ModelSpec::new(kind, 0), &stretched, &labels).unwrap();
    for (r, s) in rows.iter().zip(&stretched) {
        assert_eq!(plain.predict_proba(r).unwrap(), scaled.predict_proba(s).unwrap());
    }
}

#[test]
fn truncated_store_is_rejected() {
    let (rows, labels) = blobs(20, 2, 1.0, 1);
    let model = train(ModelSpec::new(ModelKind::Lr, 0), &rows, &labels).unwrap();
    let bytes = encode_model(&model, &ModelMetadata::default()).unwrap();
    assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_model(b"NOTAMODEL").is_err());
}
