mod common;

use proptest::prelude::*;
use rockseg::bench::{apply_elimination, compute_accuracy, confusion_matrix, BenchRecord, EliminationGate};
use rockseg::classifiers::{
    Algorithm, AlgorithmConfig, DenseNetModel, ForestParams, KnnModel, KnnParams, NetParams, TrainedClassifier,
};
use rockseg::features::{difference_of_gaussians, gaussian_blur_real, gaussian_kernel};
use rockseg::io::{load_csv_dataset, save_csv_dataset};
use rockseg::synth::sparse_mask;
use rockseg::{ClassId, Dataset, Dims, GrayVolume, LabelVolume, RealVolume};

fn dataset(values: Vec<f64>, labels: Vec<ClassId>, nf: usize) -> Dataset {
    let names = (0..nf).map(|j| format!("f{j}")).collect();
    Dataset::new(names, values, Some(labels)).unwrap()
}

/// Rows of `nf` small integers with labels from `k` classes, every class present.
fn labeled_rows(nf: usize, k: u8) -> impl Strategy<Value = Dataset> {
    (k as usize..40).prop_flat_map(move |n| {
        (
            prop::collection::vec(-20i32..20, n * nf),
            prop::collection::vec(1..=k, n - k as usize),
        )
            .prop_map(move |(v, mut l)| {
                l.extend(1..=k);
                dataset(v.into_iter().map(f64::from).collect(), l, nf)
            })
    })
}

fn small_volume() -> impl Strategy<Value = (Dims, Vec<f64>)> {
    (1usize..=8, 1usize..=8, 1usize..=8).prop_flat_map(|(x, y, z)| {
        prop::collection::vec(0.0f64..255.0, x * y * z).prop_map(move |v| (Dims::new(x, y, z).unwrap(), v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separable_blur_matches_direct_convolution((dims, data) in small_volume(), sigma in 0.3f64..2.0) {
        let v = RealVolume { dims, data: data.clone() };
        let fast = gaussian_blur_real(&v, sigma).unwrap();
        let slow = common::brute_force_blur(&data, dims, &gaussian_kernel(sigma));
        prop_assert!(common::max_abs_diff(&fast, &slow) <= 1e-9);
    }

    #[test]
    fn dog_of_a_constant_is_zero(value in any::<u8>(), s1 in 0.3f64..2.0, ds in 0.1f64..2.0, nz in 1usize..6) {
        let v = GrayVolume::filled(Dims::new(7, 5, nz).unwrap(), value);
        let d = difference_of_gaussians(&v, s1, s1 + ds).unwrap();
        prop_assert!(d.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn knn_matches_exhaustive_search(data in labeled_rows(3, 3), k in 1usize..6, q in prop::collection::vec(-25.0f64..25.0, 3)) {
        let k = k.min(data.n_rows());
        let model = KnnModel::fit(&data, &KnnParams { k }).unwrap();
        let (nearest, class) = common::knn_oracle(&data, k, &q);
        prop_assert_eq!(model.neighbours(&q).unwrap(), nearest);
        prop_assert_eq!(model.predict(&q).unwrap(), class);
    }

    #[test]
    fn forest_is_invariant_to_monotone_feature_transforms(data in labeled_rows(3, 3), seed in 0u64..1000) {
        let warp = |x: f64| x * x * x + 3.0 * x + 7.0;
        let warped = dataset(data.values().iter().map(|&x| warp(x)).collect(), data.labels().unwrap().to_vec(), 3);
        let params = ForestParams { n_trees: 7, bootstrap: None, ..Default::default() };
        let a = rockseg::classifiers::RandomForestModel::fit(&data, &params, seed).unwrap();
        let b = rockseg::classifiers::RandomForestModel::fit(&warped, &params, seed).unwrap();
        for i in 0..data.n_rows() {
            let q = data.row(i);
            let qw = warped.row(i);
            prop_assert_eq!(a.predict_proba(q).unwrap(), b.predict_proba(qw).unwrap());
        }
    }

    #[test]
    fn single_tree_memorizes_distinct_rows(data in labeled_rows(2, 4)) {
        let mut seen = std::collections::HashSet::new();
        let keep: Vec<usize> = (0..data.n_rows())
            .filter(|&i| seen.insert(data.row(i).iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
            .collect();
        let distinct = data.subset(&keep);
        let cfg = AlgorithmConfig::RandomForest(ForestParams::single_unconstrained_tree());
        let m = TrainedClassifier::fit(&distinct, &cfg, 0).unwrap();
        prop_assert_eq!(m.predict_dataset(&distinct).unwrap(), distinct.labels().unwrap().to_vec());
    }

    #[test]
    fn probabilities_sum_to_one(data in labeled_rows(3, 3), q in prop::collection::vec(-30.0f64..30.0, 3)) {
        let fast = [
            AlgorithmConfig::RandomForest(ForestParams { n_trees: 5, ..Default::default() }),
            AlgorithmConfig::Knn(KnnParams { k: 1 }),
            AlgorithmConfig::NaiveBayes,
            AlgorithmConfig::LogisticRegression(rockseg::classifiers::LogisticParams { epochs: 5, ..Default::default() }),
            AlgorithmConfig::Svm(rockseg::classifiers::SvmParams { epochs: 5, ..Default::default() }),
            AlgorithmConfig::Mlp(NetParams { epochs: 3, ..NetParams::mlp() }),
            AlgorithmConfig::Dnn(NetParams { epochs: 3, ..NetParams::dnn() }),
        ];
        for cfg in &fast {
            let m = TrainedClassifier::fit(&data, cfg, 1).unwrap();
            let p = m.predict_proba(&q).unwrap();
            prop_assert_eq!(p.len(), 3);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)), "{:?}", cfg);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6, "{:?}", cfg);
        }
    }

    #[test]
    fn net_gradients_match_finite_differences(seed in 0u64..10_000, n in 1usize..6) {
        let mut net = DenseNetModel::init(&[3, 4, 4, 3], seed).unwrap();
        // biases away from zero, off the ReLU kink
        for (l, b) in net.biases.iter_mut().enumerate() {
            for (j, x) in b.iter_mut().enumerate() {
                *x = 0.1 + 0.03 * (l + j) as f64;
            }
        }
        let values: Vec<f64> = (0..n * 3).map(|i| ((i as f64 + seed as f64) * 0.731).sin()).collect();
        let labels: Vec<ClassId> = (0..n).map(|i| (i % 3 + 1) as ClassId).collect();
        let data = dataset(values, labels, 3);
        prop_assume!(common::min_hidden_preactivation(&net, &data) > 1e-3);
        prop_assert!(common::gradient_check(&net, &data, 1e-5) <= 1e-4);
    }

    #[test]
    fn confusion_trace_equals_accuracy(pairs in prop::collection::vec((1u8..=5, 1u8..=5), 1..200)) {
        let (pred, truth): (Vec<ClassId>, Vec<ClassId>) = pairs.into_iter().unzip();
        let cm = confusion_matrix(&pred, &truth, 5).unwrap();
        let acc = compute_accuracy(&pred, &truth).unwrap();
        prop_assert_eq!(cm.accuracy(), acc);
        prop_assert_eq!(cm.total(), pred.len());
        prop_assert_eq!(common::trace_accuracy(&pred, &truth, 5), acc);
    }

    #[test]
    fn stratified_split_partitions_rows(data in labeled_rows(1, 3), frac in 0.1f64..0.9, seed in any::<u64>()) {
        let (a, b) = data.stratified_split(frac, seed).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.n_rows()).collect::<Vec<_>>());
    }

    #[test]
    fn csv_round_trip_is_exact(data in labeled_rows(2, 3), scale in -1e6f64..1e6) {
        let scaled = dataset(data.values().iter().map(|x| x * scale / 7.0).collect(), data.labels().unwrap().to_vec(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv_dataset(&scaled, &path, "label", None).unwrap();
        let (back, _) = load_csv_dataset(&path, Some("label"), None).unwrap();
        prop_assert_eq!(back.values(), scaled.values());
    }

    #[test]
    fn elimination_is_pure_and_keeps_a_survivor(accs in prop::collection::vec(0.0f64..1.0, 2..7), threshold in 0.0f64..1.0) {
        let records: Vec<BenchRecord> = accs.iter().enumerate().map(|(i, &a)| BenchRecord {
            stage: 1,
            algorithm: Algorithm::ALL[i].name().to_string(),
            accuracy: a,
            train_time_s: a,
            predict_time_s: 0.0,
            n_train: 1,
            n_eval: 1,
            workers: 1,
            seed: 0,
            env: String::new(),
            hyperparameters: String::new(),
            predictions: None,
        }).collect();
        for gate in [EliminationGate::LowestAccuracy, EliminationGate::AccuracyThreshold(threshold), EliminationGate::TimeBudget(threshold)] {
            let e1 = apply_elimination(&records, &gate).unwrap();
            let e2 = apply_elimination(&records, &gate).unwrap();
            prop_assert_eq!(&e1.survivors, &e2.survivors);
            prop_assert!(!e1.survivors.is_empty());
            prop_assert_eq!(e1.survivors.len() + e1.dropped.len(), records.len());
        }
    }

    #[test]
    fn sparse_mask_is_a_subset(labels in prop::collection::vec(1u8..=4, 64), frac in 0.01f64..1.0, seed in any::<u64>()) {
        let lv = LabelVolume::new(Dims::new(4, 4, 4).unwrap(), labels).unwrap();
        let m = sparse_mask(&lv, frac, seed).unwrap();
        for (&a, &b) in m.labels().iter().zip(lv.labels()) {
            prop_assert!(a == 0 || a == b);
        }
        let present: std::collections::BTreeSet<_> = lv.labels().iter().collect();
        let kept: std::collections::BTreeSet<_> = m.labels().iter().filter(|&&l| l != 0).collect();
        prop_assert_eq!(present, kept);
    }
}
