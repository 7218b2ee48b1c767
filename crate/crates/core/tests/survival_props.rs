mod common;

use deeprad::survival::{holm_bonferroni, km_estimate, logrank_test, SurvivalRecord};
use proptest::prelude::*;

fn cohort() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((1u32..60, prop::bool::weighted(0.7)), 2..40)
        .prop_map(|v| v.into_iter().map(|(t, e)| (t as f64, e)).collect())
}

fn records(v: &[(f64, bool)]) -> Vec<SurvivalRecord> {
    v.iter().enumerate().map(|(i, &(t, e))| SurvivalRecord::new(format!("p{i}"), t, e).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logrank_matches_risk_table_oracle(a in cohort(), b in cohort()) {
        let r = logrank_test(&records(&a), &records(&b)).unwrap();
        let want = common::logrank_chi2(&a, &b);
        prop_assert!(common::close(r.chi2, want, 1e-9), "{} vs {}", r.chi2, want);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn logrank_ignores_monotone_time_maps(a in cohort(), b in cohort()) {
        let warp = |v: &[(f64, bool)]| -> Vec<(f64, bool)> { v.iter().map(|&(t, e)| (t.ln() * 3.0 + t.sqrt(), e)).collect() };
        let x = logrank_test(&records(&a), &records(&b)).unwrap();
        let y = logrank_test(&records(&warp(&a)), &records(&warp(&b))).unwrap();
        prop_assert!((x.chi2 - y.chi2).abs() <= 1e-9);
    }

    #[test]
    fn km_is_a_non_increasing_probability(a in cohort()) {
        let km = km_estimate(&records(&a)).unwrap();
        let mut prev = 1.0;
        for p in &km.points {
            prop_assert!(p.survival <= prev && p.survival >= 0.0);
            prev = p.survival;
        }
        prop_assert!(km.points.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn holm_never_lowers_and_keeps_order(p in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let adj = holm_bonferroni(&p).unwrap();
        for (raw, h) in p.iter().zip(&adj) {
            prop_assert!(h >= raw && *h <= 1.0);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }
}

#[test]
fn identical_groups_show_no_difference() {
    let g = records(&[(5.0, true), (8.0, false), (12.0, true), (20.0, true)]);
    let r = logrank_test(&g, &g).unwrap();
    assert_eq!(r.chi2, 0.0);
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.hazard.unwrap().ratio, 1.0);
}
