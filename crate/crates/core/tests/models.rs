mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use respira::matrix::Matrix;
use respira::models::{
    rbf_kernel, smo_train_binary, train_forest, ForestParams, Gamma,
    LogRegParams, ModelBundle, ModelSpec, Predictor, SvmParams,
};
use respira::preprocess::zscore_fit;

fn arb_split_problem() -> impl Strategy<Value = (Matrix, Vec<usize>)> {
    (2usize..=20, 1usize..=3).prop_flat_map(|(n, d)| {
        // Small integer grid so ties and repeated values are common.
        (
            prop::collection::vec((-4i32..5).prop_map(|v| v as f64 * 0.5), n * d),
            prop::collection::vec(0usize..3, n),
        )
            .prop_map(move |(v, y)| (Matrix::from_flat(n, d, v).unwrap(), y))
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_flat(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn three_clusters(seed: u64, per_class: usize) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[-2.0, 0.0, 1.0], [2.0, 1.0, -1.0], [0.0, -2.5, 0.0]];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (c, centre) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(centre.map(|m| m + rng.random_range(-0.8..0.8)));
            y.push(c);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn best_split_matches_exhaustive_search((x, y) in arb_split_problem()) {
        if let Err(e) = common::split_agrees(&x, &y) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn logreg_gradient_matches_central_differences(seed in any::<u64>(), l2 in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, 5, 4);
        let y: Vec<usize> = (0..5).map(|i| if i < 3 { i } else { rng.random_range(0..3) }).collect();
        let w = random_matrix(&mut rng, 3, 5);
        let err = common::gradient_error(&w, &x, &y, l2);
        prop_assert!(err <= 1e-6, "relative error {}", err);
    }

    #[test]
    fn smo_solution_is_feasible(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let x = random_matrix(&mut rng, n, 3);
        let y: Vec<f64> = (0..n)
            .map(|i| if x.get(i, 0) + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 })
            .collect();
        prop_assume!(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0));
        let params = SvmParams { c, seed, ..SvmParams::default() };
        let svm = smo_train_binary(&x, &y, 0.5, &params).unwrap();
        prop_assert_eq!(svm.alphas.len(), n);
        let (boxv, balance) = common::dual_violation(&svm.alphas, &y, c);
        prop_assert!(boxv <= 1e-12, "alpha outside [0, {}] by {}", c, boxv);
        prop_assert!(balance <= 1e-6, "sum alpha*y = {}", balance);
    }

    #[test]
    fn rbf_gram_matrix_is_psd(seed in any::<u64>(), gamma in 0.01f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 25;
        let x = random_matrix(&mut rng, n, 4);
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                k[i][j] = rbf_kernel(x.row(i), x.row(j), gamma).unwrap();
            }
            prop_assert_eq!(k[i][i], 1.0);
        }
        // A Cholesky factorization of K + 1e-8·I exists iff min eigenvalue > -1e-8.
        for (i, row) in k.iter_mut().enumerate() {
            row[i] += 1e-8;
        }
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|m| l[i][m] * l[j][m]).sum();
                if i == j {
                    let d = k[i][i] - s;
                    prop_assert!(d > 0.0, "pivot {} = {}", i, d);
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (k[i][j] - s) / l[j][j];
                }
            }
        }
    }
}

#[test]
fn unrestricted_forest_fits_its_training_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in [20usize, 80, 200] {
        let x = random_matrix(&mut rng, n, 3);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let params = ForestParams { n_trees: 100, seed: n as u64, ..ForestParams::default() };
        let model = train_forest(&x, &y, 3, &params).unwrap();
        let correct = (0..n)
            .filter(|&i| respira::models::predict_forest(&model, x.row(i)).unwrap().label == y[i])
            .count();
        assert_eq!(correct, n, "n = {n}");
    }
}

#[test]
fn bundles_reload_with_identical_predictions() {
    let (x, y) = three_clusters(5, 15);
    let scaler = zscore_fit(&x).unwrap();
    let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
    let specs = [
        ModelSpec::Forest(ForestParams { n_trees: 20, ..ForestParams::default() }),
        ModelSpec::Logreg(LogRegParams::default()),
        ModelSpec::Svm(SvmParams { gamma: Gamma::SCALE, ..SvmParams::default() }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let probes = random_matrix(&mut rng, 40, 3);
    for spec in specs {
        let model = spec.train(&x, &y, 3, 17).unwrap();
        let bundle = ModelBundle::new(model, Some(scaler.clone()), names.clone());
        let back = ModelBundle::from_json(&bundle.to_json()).unwrap();
        assert_eq!(back, bundle);
        for row in probes.iter_rows() {
            let a = bundle.predict(row).unwrap();
            let b = back.predict(row).unwrap();
            assert_eq!(a.label, b.label);
            assert_eq!(
                a.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
fn prediction_is_pure_and_rejects_wrong_width() {
    let (x, y) = three_clusters(8, 12);
    for spec in [
        ModelSpec::Forest(ForestParams { n_trees: 15, ..ForestParams::default() }),
        ModelSpec::Logreg(LogRegParams::default()),
        ModelSpec::Svm(SvmParams::default()),
    ] {
        let model = spec.train(&x, &y, 3, 1).unwrap();
        assert_eq!((model.n_features(), model.n_classes()), (3, 3));
        let first: Vec<_> = x.iter_rows().map(|r| model.predict(r).unwrap()).collect();
        let again: Vec<_> = x.iter_rows().map(|r| model.predict(r).unwrap()).collect();
        assert_eq!(first, again);
        assert!(model.predict(&[0.0; 2]).is_err());
        let same_seed = spec.train(&x, &y, 3, 1).unwrap();
        assert_eq!(same_seed, model);
    }
}
