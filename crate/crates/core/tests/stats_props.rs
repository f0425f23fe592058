use earsight::stats::{anova_oneway, tukey_hsd, RunGroup};
use proptest::prelude::*;

fn named(data: Vec<Vec<f64>>) -> Vec<RunGroup> {
    data.into_iter()
        .enumerate()
        .map(|(i, v)| RunGroup::new(format!("m{i}"), v))
        .collect()
}

#[test]
fn three_group_worked_example() {
    let g = named(vec![
        vec![24.5, 23.5, 26.4, 27.1, 29.9],
        vec![28.4, 34.2, 29.5, 32.2, 30.1],
        vec![26.1, 28.3, 24.3, 26.2, 27.8],
    ]);
    // Means 26.28, 30.88, 26.54; grand mean 27.9.
    // SS_between = 5·(1.62² + 2.98² + 1.36²) = 66.772.
    // SS_within = 22.648 + 22.888 + 10.592 = 56.128, MS_within = 56.128 / 12.
    let a = anova_oneway(&g).unwrap();
    assert!((a.ss_between - 66.772).abs() < 1e-9);
    assert!((a.ss_within - 56.128).abs() < 1e-9);
    assert!((a.f - (66.772 / 2.0) / (56.128 / 12.0)).abs() < 1e-9);
    assert!((a.p - 0.009073317468563075).abs() < 1e-8);

    // q = |Δmean| / sqrt(MS_within / 5).
    let se = (56.128_f64 / 12.0 / 5.0).sqrt();
    let t = tukey_hsd(&g, 0.05).unwrap();
    assert_eq!(t.q_crit, 3.7729);
    let expected = [(4.60 / se, true), (0.26 / se, false), (4.34 / se, true)];
    for (row, (q, sig)) in t.rows.iter().zip(expected) {
        assert!((row.q_stat - q).abs() < 1e-9, "{} vs {q}", row.q_stat);
        assert_eq!(row.significant, sig);
    }
    // Rounded values from the worked example.
    for (row, q) in t.rows.iter().zip([4.756, 0.269, 4.487]) {
        assert!((row.q_stat - q).abs() < 1e-2);
    }
}

#[test]
fn six_models_of_twenty_runs_give_df_5_114() {
    let g = named(
        (0..6)
            .map(|m| (0..20).map(|r| 0.8 + 0.01 * m as f64 + 0.001 * r as f64).collect())
            .collect(),
    );
    let a = anova_oneway(&g).unwrap();
    assert_eq!((a.df_between, a.df_within), (5, 114));
}

#[test]
fn unequal_group_sizes() {
    let g = named(vec![
        vec![1.0, 2.0, 3.0, 4.0],
        vec![2.0, 4.0, 6.0],
        vec![5.0, 7.0, 8.0, 9.0, 10.0],
    ]);
    let a = anova_oneway(&g).unwrap();
    assert!((a.f - 10.864208633093527).abs() < 1e-9);
    assert!((a.p - 0.003982542604409192).abs() < 1e-8);
}

fn group_data() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2..8), 2..6)
}

proptest! {
    #[test]
    fn f_and_q_are_shift_and_scale_invariant(data in group_data(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let base = named(data.clone());
        let a = anova_oneway(&base).unwrap();
        prop_assume!(a.ms_within > 1e-6);
        let t = tukey_hsd(&base, 0.05).unwrap();
        for transformed in [
            named(data.iter().map(|g| g.iter().map(|v| v + shift).collect()).collect()),
            named(data.iter().map(|g| g.iter().map(|v| v * scale).collect()).collect()),
        ] {
            let b = anova_oneway(&transformed).unwrap();
            prop_assert!((a.f - b.f).abs() <= 1e-9 * a.f.max(1.0));
            let u = tukey_hsd(&transformed, 0.05).unwrap();
            for (x, y) in t.rows.iter().zip(&u.rows) {
                prop_assert!((x.q_stat - y.q_stat).abs() <= 1e-9 * x.q_stat.max(1.0));
            }
        }
    }
}
