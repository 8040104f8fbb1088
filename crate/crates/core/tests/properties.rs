use biomarker_lab::explain::tree_shap;
use biomarker_lab::features::{haversine_m, participant_feature_names, read_participant_csv, write_participant_csv, GeoPoint, ParticipantFeatureVector};
use biomarker_lab::labeling::{categorize, responses_for_scores, score_ucla};
use biomarker_lab::models::{fit_cart, fit_gbt, CartParams, Classifier, GbtParams};
use biomarker_lab::preprocess::{fit_impute_numeric, smote};
use biomarker_lab::stats::{adjust_p, cohens_d, mann_whitney_u, Correction};
use proptest::prelude::*;

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ucla_scores_round_trip(s in 5u8..=20, e in 5u8..=20) {
        let r = responses_for_scores(s, e).unwrap();
        let a = score_ucla("p", &r.map(i64::from)).unwrap();
        prop_assert_eq!((a.social_score, a.emotional_score, a.total_score), (s, e, s + e));
        prop_assert_eq!(a.category, categorize(s, e));
    }

    #[test]
    fn mann_whitney_is_symmetric(a in sample(1..15), b in sample(1..15)) {
        let x = mann_whitney_u(&a, &b).unwrap();
        let y = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&x.p));
        prop_assert!((x.p - y.p).abs() < 1e-12);
        prop_assert_eq!(x.u, y.u);
        prop_assert!((x.u_a + y.u_a - (a.len() * b.len()) as f64).abs() < 1e-9);
    }

    #[test]
    fn cohens_d_flips_sign(a in sample(2..20), b in sample(2..20)) {
        if let (Ok(d1), Ok(d2)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
            prop_assert!((d1 + d2).abs() < 1e-9);
        }
    }

    #[test]
    fn adjusted_p_values_dominate_raw(p in prop::collection::vec(0.0..=1.0f64, 1..30)) {
        let bonf = adjust_p(&p, Correction::Bonferroni);
        let bh = adjust_p(&p, Correction::Bh);
        prop_assert_eq!(adjust_p(&p, Correction::None), p.clone());
        for i in 0..p.len() {
            prop_assert!(bh[i] >= p[i] - 1e-15 && bh[i] <= bonf[i] + 1e-15 && bonf[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(bh[i] <= bh[j] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn smote_equalizes_and_keeps_originals(
        rows in prop::collection::vec((prop::collection::vec(-5.0..5.0f64, 3), 0usize..3), 6..40),
        seed in any::<u64>(),
    ) {
        let (x, y): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
        let mut counts = [0usize; 3];
        y.iter().for_each(|&c| counts[c] += 1);
        prop_assume!(counts.iter().all(|&c| c == 0 || c >= 2));
        let out = smote(&x, &y, 5, seed).unwrap();
        let max = *counts.iter().max().unwrap();
        let mut after = [0usize; 3];
        out.y.iter().for_each(|&c| after[c] += 1);
        for c in 0..3 {
            prop_assert_eq!(after[c], if counts[c] == 0 { 0 } else { max });
        }
        prop_assert_eq!(&out.x[..x.len()], &x[..]);
        for (o, row) in out.origins.iter().zip(&out.x[x.len()..]) {
            prop_assert!((0.0..=1.0).contains(&o.u) && y[o.base] == y[o.neighbor]);
            for f in 0..3 {
                let expect = x[o.base][f] + o.u * (x[o.neighbor][f] - x[o.base][f]);
                prop_assert!((row[f] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn imputation_fills_every_gap(rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, -10.0..10.0f64), 4), 3..20)) {
        prop_assume!((0..4).all(|j| rows.iter().any(|r| r[j].is_some())));
        let plan = fit_impute_numeric(&rows).unwrap();
        let filled = plan.apply_numeric(&rows);
        for (r, f) in rows.iter().zip(&filled) {
            for j in 0..4 {
                prop_assert_eq!(f[j], r[j].unwrap_or(plan.medians()[j]));
            }
        }
    }

    #[test]
    fn treeshap_is_additive_on_fitted_trees(
        rows in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 3), 0usize..3), 10..40),
        probe in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let (x, y): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
        let tree = fit_cart(&x, &y, 3, &CartParams { max_depth: 4, min_samples_leaf: 1 }).tree;
        let s = tree_shap(&tree, &probe, 3).unwrap();
        let out = tree.predict_row(&probe);
        for c in 0..3 {
            let total: f64 = s.base[c] + s.phi.iter().map(|p| p[c]).sum::<f64>();
            prop_assert!((total - out[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn gbt_scores_are_distributions(rows in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 2), 0usize..3), 5..30)) {
        let (x, y): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
        let m = fit_gbt(&x, &y, 3, &GbtParams { n_estimators: 5, ..GbtParams::default() });
        for s in m.predict_scores(&x) {
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(s.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn haversine_is_a_metric(
        a in (-80.0..80.0f64, -179.0..179.0f64),
        b in (-80.0..80.0f64, -179.0..179.0f64),
        c in (-80.0..80.0f64, -179.0..179.0f64),
    ) {
        let (a, b, c) = (GeoPoint::new(a.0, a.1), GeoPoint::new(b.0, b.1), GeoPoint::new(c.0, c.1));
        prop_assert!((haversine_m(a, b) - haversine_m(b, a)).abs() < 1e-6);
        prop_assert!(haversine_m(a, a).abs() < 1e-9);
        prop_assert!(haversine_m(a, c) <= haversine_m(a, b) + haversine_m(b, c) + 1e-6);
    }

    #[test]
    fn participant_features_round_trip(values in prop::collection::vec(prop::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())), 58), days in 1usize..100) {
        prop_assume!(values.len() == participant_feature_names().len());
        let v = ParticipantFeatureVector { participant_id: "p001".into(), days_observed: days, values };
        let mut buf = Vec::new();
        write_participant_csv(&mut buf, std::slice::from_ref(&v)).unwrap();
        let back = read_participant_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, vec![v]);
    }
}

#[test]
fn mirrored_features_share_attribution() {
    use biomarker_lab::models::{Tree, TreeNode};
    let split = |feature, left, right| TreeNode::Internal { feature, threshold: 0.0, left, right, missing_left: false, cover: 20.0 };
    let leaf = |v: f64| TreeNode::Leaf { value: vec![v], cover: 10.0 };
    // f(x0, x1) is symmetric: 1 when both are low, 5 when both are high, 3 otherwise
    let mut root = split(0, 1, 4);
    if let TreeNode::Internal { cover, .. } = &mut root {
        *cover = 40.0;
    }
    let tree = Tree { nodes: vec![root, split(1, 2, 3), leaf(1.0), leaf(3.0), split(1, 5, 6), leaf(3.0), leaf(5.0)] };
    for v in [-1.0, 1.0] {
        let s = tree_shap(&tree, &[v, v], 2).unwrap();
        assert!((s.phi[0][0] - s.phi[1][0]).abs() < 1e-12, "{v}: {:?}", s.phi);
        assert!((s.base[0] + s.phi[0][0] + s.phi[1][0] - tree.predict_row(&[v, v])[0]).abs() < 1e-12);
    }
}
