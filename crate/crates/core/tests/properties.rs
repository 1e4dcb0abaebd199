use ecoc::assignment::*;
use ecoc::codebook::*;
use ecoc::data::*;
use ecoc::engine::*;
use ecoc::harness::stats::{fit_line, quantile_sorted, Regression, ValueCounts};
use ecoc::learners::*;
use ecoc::metrics::*;
use ecoc::wltls::*;
use proptest::prelude::*;

fn codebook_strategy() -> impl Strategy<Value = Codebook> {
    (3usize..9, 4usize..12, any::<u64>())
        .prop_filter_map("no codebook for shape", |(k, l, seed)| {
            generate_random_dense(k, l, 5, seed).ok()
        })
}

fn metric_from(k: usize, upper: &[f64]) -> ClassMetric {
    let mut m = vec![0.0; k * k];
    let mut it = upper.iter();
    for i in 0..k {
        for j in i + 1..k {
            let v = *it.next().unwrap();
            m[i * k + j] = v;
            m[j * k + i] = v;
        }
    }
    ClassMetric::from_matrix(k, m).unwrap()
}

fn sparse_example(max_dim: u32) -> impl Strategy<Value = SparseVec> {
    prop::collection::btree_map(0..max_dim, -1e6f64..1e6, 0..6)
        .prop_map(|m| m.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_text_round_trips(
        rows in prop::collection::vec((sparse_example(20), 0usize..4), 1..30),
        one_based in any::<bool>(),
    ) {
        let k = rows.iter().map(|r| r.1).max().unwrap() + 1;
        let mut examples: Vec<Example> =
            rows.iter().map(|(x, y)| Example::new(x.clone(), *y).unwrap()).collect();
        // Every class must occur for the label map to survive the trip.
        for c in 0..k {
            examples.push(Example::new(vec![], c).unwrap());
        }
        let ds = Dataset::new(examples, k, 20).unwrap();
        let base = if one_based { IndexBase::One } else { IndexBase::Zero };
        let back = parse_sparse_dataset(&format_sparse_dataset(&ds, base), base, None).unwrap();
        prop_assert_eq!(back.examples(), ds.examples());
        prop_assert_eq!(back.num_classes(), k);
    }

    #[test]
    fn distance_matrix_follows_row_permutation(cb in codebook_strategy(), seed in any::<u64>()) {
        let order = random_assignment(cb.rows(), seed).as_slice().to_vec();
        let d = codeword_distance_matrix(&cb);
        let dp = codeword_distance_matrix(&cb.permute_rows(&order).unwrap());
        for i in 0..cb.rows() {
            for j in 0..cb.rows() {
                prop_assert_eq!(dp.get(i, j), d.get(order[i], order[j]));
            }
        }
    }

    #[test]
    fn score_is_invariant_to_joint_relabeling(
        cb in codebook_strategy(),
        raw in prop::collection::vec(0.01f64..1.0, 36),
        seed in any::<u64>(),
        scale in 0.1f64..100.0,
    ) {
        let k = cb.rows();
        let d_cls = metric_from(k, &raw);
        let d_m = codeword_distance_matrix(&cb);
        let a = random_assignment(k, seed);
        let base = class_codeword_score(&d_cls, &d_m, &a).unwrap();

        // Rename class c to pi[c]; the relabeled assignment keeps each class's row.
        let pi = random_assignment(k, seed ^ 0x5555).as_slice().to_vec();
        let mut renamed = vec![0.0; k * k];
        let mut perm = vec![0; k];
        for c in 0..k {
            perm[pi[c]] = a.row_of(c);
            for d in 0..k {
                renamed[pi[c] * k + pi[d]] = d_cls.get(c, d);
            }
        }
        let renamed = ClassMetric::from_matrix(k, renamed).unwrap();
        let relabeled = class_codeword_score(&renamed, &d_m, &Assignment::new(perm).unwrap()).unwrap();
        prop_assert!((relabeled - base).abs() < 1e-12);

        let scaled = ClassMetric::from_matrix(k, d_cls.as_slice().iter().map(|x| x * scale).collect()).unwrap();
        prop_assert!((class_codeword_score(&scaled, &d_m, &a).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn confusion_metric_ignores_count_scale(
        counts in prop::collection::vec(1u32..50, 16),
        scale in 1u32..20,
    ) {
        let c1: Vec<f64> = counts.iter().map(|&x| x as f64).collect();
        let c2: Vec<f64> = c1.iter().map(|x| x * scale as f64).collect();
        let m1 = confusion_to_metric(&ConfusionMatrix::from_counts(4, c1).unwrap()).unwrap();
        let m2 = confusion_to_metric(&ConfusionMatrix::from_counts(4, c2).unwrap()).unwrap();
        for (a, b) in m1.as_slice().iter().zip(m2.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_are_valid(points in prop::collection::vec(prop::collection::vec(-10f64..10.0, 3), 2..8)) {
        prop_assume!(points.iter().any(|p| p != &points[0]));
        let m = means_to_metric(&points).unwrap();
        let norm = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        for i in 0..m.size() {
            prop_assert_eq!(m.get(i, i), 0.0);
            for j in 0..m.size() {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn decoding_follows_relabeling(cb in codebook_strategy(), seed in any::<u64>(), f in prop::collection::vec(-3f64..3.0, 12)) {
        let k = cb.rows();
        let f = &f[..cb.cols()];
        let a = random_assignment(k, seed);
        // Rename classes; the decoded row must stay the same.
        let pi = random_assignment(k, seed.wrapping_add(1)).as_slice().to_vec();
        let mut perm = vec![0; k];
        for c in 0..k {
            perm[pi[c]] = a.row_of(c);
        }
        let renamed = Assignment::new(perm).unwrap();
        for loss in DecodingLoss::ALL {
            let c = decode_scores(&cb, &a, f, loss).unwrap();
            let c2 = decode_scores(&cb, &renamed, f, loss).unwrap();
            let (l1, l2) = (class_loss(&cb, &a, f, loss, c), class_loss(&cb, &renamed, f, loss, c2));
            prop_assert!((l1 - l2).abs() < 1e-9);
            let tied = (0..k).filter(|&d| (class_loss(&cb, &a, f, loss, d) - l1).abs() < 1e-9).count();
            if tied == 1 {
                prop_assert_eq!(pi[c], c2);
            }
        }
    }

    #[test]
    fn hamming_decoding_ignores_positive_scaling(
        cb in codebook_strategy(),
        seed in any::<u64>(),
        f in prop::collection::vec(-3f64..3.0, 12),
        scale in 0.01f64..100.0,
    ) {
        let a = random_assignment(cb.rows(), seed);
        let f = &f[..cb.cols()];
        let g: Vec<f64> = f.iter().map(|x| x * scale).collect();
        prop_assert_eq!(
            decode_scores(&cb, &a, f, DecodingLoss::Hamming).unwrap(),
            decode_scores(&cb, &a, &g, DecodingLoss::Hamming).unwrap()
        );
        prop_assert_eq!(hard_decode(&cb, &a, f).unwrap(), hard_decode(&cb, &a, &g).unwrap());
    }

    #[test]
    fn linear_scores_scale_with_weights(
        w in prop::collection::vec(-5f64..5.0, 4),
        bias in -5f64..5.0,
        x in sparse_example(4),
        scale in 0.1f64..10.0,
    ) {
        let p = BinaryPredictor::Linear { weights: w.clone(), bias };
        let q = BinaryPredictor::Linear { weights: w.iter().map(|v| v * scale).collect(), bias: bias * scale };
        prop_assert!((q.score(&x) - scale * p.score(&x)).abs() < 1e-9 * (1.0 + p.score(&x).abs() * scale));
        prop_assert_eq!(p.negated().score(&x), -p.score(&x));
    }

    #[test]
    fn graph_decoding_matches_flat_decoding(k in 2usize..40, b in 2usize..5, seed in any::<u64>()) {
        let dag = build_coding_dag(k, b).unwrap();
        prop_assert_eq!(dag.num_paths(), k);
        let flat = dag_to_codebook(&dag).unwrap();
        let id = Assignment::identity(k);
        let mut state = seed;
        let f: Vec<f64> = (0..dag.num_edges())
            .map(|_| {
                state = ecoc::rng::mix64(state.wrapping_add(0x9e37_79b9_7f4a_7c15));
                (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            })
            .collect();
        for loss in DecodingLoss::ALL {
            prop_assert_eq!(
                graph_decode_scores(&dag, &id, &f, loss).unwrap(),
                decode_scores(&flat, &id, &f, loss).unwrap()
            );
        }
    }

    #[test]
    fn tree_replays_distinct_training_points(
        pts in prop::collection::btree_map((0i32..50, 0i32..50), any::<bool>(), 2..30),
    ) {
        let data: Vec<(SparseVec, i8)> = pts
            .iter()
            .map(|(&(a, b), &y)| (vec![(0, a as f64), (1, b as f64)], if y { 1 } else { -1 }))
            .collect();
        prop_assume!(data.iter().any(|d| d.1 > 0) && data.iter().any(|d| d.1 < 0));
        let view: Vec<(&[(u32, f64)], i8)> = data.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let tree = train_gini_tree(&view, 2, &TreeConfig { min_samples_split: 2 }).unwrap();
        for (x, y) in &data {
            prop_assert_eq!(tree.score(x), *y as f64);
        }
    }

    #[test]
    fn streaming_fit_matches_two_pass(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..200)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        prop_assume!(sxx > 1e-6 && syy > 1e-6);
        let mut reg = Regression::default();
        for (&x, &y) in xs.iter().zip(&ys) {
            reg.push(x, y);
        }
        let fit = reg.fit();
        prop_assert_eq!(fit, fit_line(&xs, &ys));
        prop_assert!((fit.slope - sxy / sxx).abs() < 1e-10 * (1.0 + (sxy / sxx).abs()));
        prop_assert!((fit.r2.unwrap() - sxy * sxy / (sxx * syy)).abs() < 1e-10);
    }

    #[test]
    fn value_counts_quantiles_match_sorting(xs in prop::collection::vec(0u8..20, 1..300), q in 0f64..1.0) {
        let vals: Vec<f64> = xs.iter().map(|&x| x as f64 / 20.0).collect();
        let mut vc = ValueCounts::default();
        for &v in &vals {
            vc.push(v);
        }
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(vc.quantile(q).unwrap(), quantile_sorted(&sorted, q));
    }

    #[test]
    fn local_search_descends(raw in prop::collection::vec(0.01f64..1.0, 28), seed in any::<u64>()) {
        let d_cls = metric_from(8, &raw);
        let cb = generate_random_dense(8, 6, 3, seed).unwrap();
        let d_m = codeword_distance_matrix(&cb);
        let start = random_assignment(8, seed);
        let down = swap_local_search(&d_cls, &d_m, &start, Direction::Minimize, 80).unwrap();
        let up = swap_local_search(&d_cls, &d_m, &start, Direction::Maximize, 80).unwrap();
        prop_assert!(down.trajectory.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(up.trajectory.windows(2).all(|w| w[1] > w[0]));
        let s = class_codeword_score(&d_cls, &d_m, &start).unwrap();
        prop_assert!(down.best.score <= s && up.best.score >= s);
    }

    #[test]
    fn partitions_ignore_column_sign(cb in codebook_strategy(), seed in any::<u64>()) {
        let a = random_assignment(cb.rows(), seed);
        let flipped_rows: Vec<Vec<i8>> = (0..cb.rows())
            .map(|r| cb.row(r).iter().enumerate().map(|(j, &b)| if j == 0 { -b } else { b }).collect())
            .collect();
        let flipped = Codebook::from_rows(&flipped_rows).unwrap();
        let (p, f) = Partition::of_column(&cb, &a, 0);
        let (q, g) = Partition::of_column(&flipped, &a, 0);
        prop_assert_eq!(p.clone(), q);
        prop_assert_ne!(f, g);
        prop_assert!(p.contains(0));
    }
}

fn class_loss(cb: &Codebook, a: &Assignment, f: &[f64], loss: DecodingLoss, class: usize) -> f64 {
    cb.row(a.row_of(class)).iter().zip(f).map(|(&b, &x)| loss.eval(b as f64 * x)).sum()
}

#[test]
fn unranking_follows_lexicographic_order() {
    let mut perm: Vec<usize> = (0..5).collect();
    let mut rank = 0;
    loop {
        assert_eq!(unrank_permutation(5, rank), perm);
        rank += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    assert_eq!(rank, factorial(5));
}

#[test]
fn assignment_text_round_trips() {
    for seed in 0..20 {
        let a = random_assignment(9, seed);
        assert_eq!(Assignment::parse(&a.to_text()).unwrap(), a);
    }
}
