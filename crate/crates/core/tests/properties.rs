use exiffi_core::forest::write_model;
use exiffi_core::{
    average_precision, local_importance, local_importance_batch, roc_auc, Dataset, Forest, ForestParams, Mode,
};
use exiffi_testkit::*;
use proptest::prelude::*;

fn small_params(seed: u64, mode: Mode) -> ForestParams {
    ForestParams::default()
        .with_mode(mode)
        .with_trees(8)
        .with_sample_size(32)
        .with_seed(seed)
}

fn arb_mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::If), Just(Mode::Eif), Just(Mode::EifPlus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_invariant_under_monotone_maps((scores, labels) in arb_labeled_scores(2..=200, 30)) {
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(average_precision(&scores, &labels).unwrap(), average_precision(&mapped, &labels).unwrap());
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&mapped, &labels).unwrap());
    }

    #[test]
    fn auc_flips_under_negation((scores, labels) in arb_labeled_scores(2..=200, 30)) {
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        let b = roc_auc(&neg, &labels).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_counts_are_consistent(d in arb_dataset(2..=80, 1..=5), seed in 0u64..500, mode in arb_mode()) {
        let f = Forest::fit(&d, &small_params(seed, mode)).unwrap();
        for tree in f.trees() {
            prop_assert_eq!(tree.root().n_node(), tree.subsample().len());
            for node in tree.nodes() {
                match node.split() {
                    Some(s) => {
                        prop_assert!(s.n_left() >= 1 && s.n_right() >= 1);
                        prop_assert_eq!(s.n_left() + s.n_right(), node.n_node());
                        if mode == Mode::If {
                            prop_assert_eq!(s.normal().iter().filter(|&&v| v != 0.0).count(), 1);
                        } else {
                            let norm: f64 = s.normal().iter().map(|v| v * v).sum::<f64>().sqrt();
                            prop_assert!((norm - 1.0).abs() < 1e-12);
                        }
                    }
                    None => {
                        let rows: Vec<&[f64]> = tree
                            .subsample()
                            .iter()
                            .map(|&i| d.row(i))
                            .filter(|x| std::ptr::eq(tree.leaf(x), node))
                            .collect();
                        prop_assert_eq!(rows.len(), node.n_node());
                        let identical = rows.windows(2).all(|w| w[0] == w[1]);
                        prop_assert!(node.depth() == f.max_depth() || node.n_node() <= 1 || identical);
                    }
                }
            }
        }
    }

    #[test]
    fn lfi_at_least_one_where_defined(d in arb_dataset(2..=80, 1..=5), seed in 0u64..500, mode in arb_mode()) {
        let f = Forest::fit(&d, &small_params(seed, mode)).unwrap();
        for x in d.rows() {
            let imp = local_importance(&f, x).unwrap();
            for j in 0..d.n_features() {
                prop_assert!(imp.raw[j] >= 0.0);
                if imp.normalizer[j] > 0.0 {
                    prop_assert!(imp.lfi[j] >= 1.0 - 1e-12);
                } else {
                    prop_assert_eq!(imp.lfi[j], 0.0);
                }
            }
        }
    }

    #[test]
    fn if_importance_supported_on_split_features(d in arb_dataset(2..=60, 2..=5), seed in 0u64..500) {
        let f = Forest::fit(&d, &small_params(seed, Mode::If)).unwrap();
        for x in d.rows() {
            let mut used = vec![false; d.n_features()];
            for tree in f.trees() {
                for node in tree.path(x) {
                    if let Some(s) = node.split() {
                        let j = s.normal().iter().position(|&v| v != 0.0).unwrap();
                        used[j] = true;
                    }
                }
            }
            let imp = local_importance(&f, x).unwrap();
            for j in 0..d.n_features() {
                prop_assert_eq!(imp.lfi[j] > 0.0, used[j]);
            }
        }
    }

    #[test]
    fn scores_in_unit_interval(d in arb_dataset(2..=80, 1..=4), seed in 0u64..500, mode in arb_mode()) {
        let f = Forest::fit(&d, &small_params(seed, mode)).unwrap();
        for s in f.score_batch(&d).unwrap() {
            prop_assert!(s > 0.0 && s <= 1.0);
        }
    }

    #[test]
    fn scoring_is_row_permutation_equivariant(d in arb_dataset(3..=60, 1..=4), seed in 0u64..500, rot in 1usize..50) {
        let f = Forest::fit(&d, &small_params(seed, Mode::EifPlus)).unwrap();
        let n = d.n_samples();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let shuffled = d.select_rows(&perm);
        let a = f.score_batch(&d).unwrap();
        let b = f.score_batch(&shuffled).unwrap();
        for (i, &k) in perm.iter().enumerate() {
            prop_assert_eq!(b[i], a[k]);
        }
    }

    #[test]
    fn score_decreases_with_path_length(d in arb_dataset(3..=60, 1..=3), seed in 0u64..500) {
        let f = Forest::fit(&d, &small_params(seed, Mode::Eif)).unwrap();
        let mut pairs: Vec<(f64, f64)> = d
            .rows()
            .map(|x| (f.path_length(x).unwrap(), f.anomaly_score(x).unwrap()))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            prop_assert!(w[1].1 <= w[0].1);
        }
    }
}

#[test]
fn fit_and_importance_do_not_depend_on_thread_count() {
    let d = random_dataset(5, 400, 6);
    let params = ForestParams::default().with_trees(40).with_seed(11);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let f = Forest::fit(&d, &params).unwrap();
            let scores = f.score_batch(&d).unwrap();
            let imps: Vec<Vec<f64>> = local_importance_batch(&f, &d)
                .unwrap()
                .into_iter()
                .map(|v| v.lfi)
                .collect();
            (write_model(&f), scores, imps)
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn f32_forest_tracks_f64() {
    let d64 = random_dataset(9, 200, 3);
    let rows: Vec<Vec<f32>> = d64.rows().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    let d32 = Dataset::<f32>::from_rows(&rows, None).unwrap();
    let params = ForestParams::default().with_trees(50).with_seed(3);
    let s64 = Forest::fit(&d64, &params).unwrap().score_batch(&d64).unwrap();
    let s32 = Forest::fit(&d32, &params).unwrap().score_batch(&d32).unwrap();
    let labels: Vec<u8> = (0..200).map(|i| u8::from(i % 17 == 0)).collect();
    let ap64 = average_precision(&s64, &labels).unwrap();
    let ap32 = average_precision(&s32, &labels).unwrap();
    assert!((ap64 - ap32).abs() < 0.05, "{ap64} vs {ap32}");
}
