use loadwatch::domain::{Outcome, OutcomeKey};
use loadwatch::evaluation::{
    auc, expected_cost, operating_point, optimal_operating_point, rank_biserial, roc_curve,
    run_simulations, subgroup_auc, GroupStatus, SimulationPlan,
};
use loadwatch::models::{CvOptions, ModelChoice, ModelFamily};
use loadwatch::pipeline::{DataContext, LabelPermutation, PipelineOptions};
use loadwatch::preprocess::Protocol;
use loadwatch::synth::{generate_cohort, CohortConfig, HazardConfig};
use proptest::prelude::*;

fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((prop_oneof![(-5i32..5).prop_map(f64::from), -5.0..5.0f64], any::<bool>()), 2..120)
        .prop_map(|v| {
            let (s, mut l): (Vec<f64>, Vec<u8>) = v.into_iter().map(|(s, b)| (s, u8::from(b))).unzip();
            l[0] = 1;
            l[1] = 0;
            (s, l)
        })
}

proptest! {
    #[test]
    fn auc_is_pairwise_concordance((s, l) in scored()) {
        let a = auc(&s, &l).unwrap();
        prop_assert!((a - pairwise(&s, &l)).abs() <= 1e-12);
        prop_assert!((roc_curve(&s, &l).unwrap().area() - a).abs() <= 1e-12);
    }

    #[test]
    fn reversed_scores_mirror_the_curve((s, l) in scored()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&neg, &l).unwrap() - (1.0 - auc(&s, &l).unwrap())).abs() <= 1e-12);
        prop_assert!((roc_curve(&neg, &l).unwrap().area() - (1.0 - roc_curve(&s, &l).unwrap().area())).abs() <= 1e-12);
    }

    #[test]
    fn increasing_transforms_keep_auc((s, l) in scored(), a in 0.1..10.0f64, b in -3.0..3.0f64) {
        let base = auc(&s, &l).unwrap();
        let affine: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let exp: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        prop_assert_eq!(auc(&affine, &l).unwrap(), base);
        prop_assert_eq!(auc(&exp, &l).unwrap(), base);
    }

    #[test]
    fn curve_is_monotone_with_exact_ends((s, l) in scored()) {
        let c = roc_curve(&s, &l).unwrap();
        prop_assert_eq!((c.fpr[0], c.tpr[0]), (0.0, 0.0));
        prop_assert_eq!((*c.fpr.last().unwrap(), *c.tpr.last().unwrap()), (1.0, 1.0));
        prop_assert!(c.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.tpr.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn optimal_point_is_cheapest((s, l) in scored(), ratio in 1.0..2000.0f64, p in 0.001..0.5f64) {
        let c = roc_curve(&s, &l).unwrap();
        let best = optimal_operating_point(&c, ratio, p).unwrap();
        for (_, fpr, tpr) in c.points() {
            prop_assert!(best.expected_cost <= expected_cost(tpr, fpr, ratio, p) + 1e-15);
        }
        prop_assert!((0.0..=1.0).contains(&best.p_injury_given_positive) || best.p_injury_given_positive.is_nan());
        prop_assert!((0.0..=1.0).contains(&best.p_injury_given_negative) || best.p_injury_given_negative.is_nan());
        prop_assert!(best.lr_positive >= 0.0);
    }

    #[test]
    fn cost_response_is_monotone((s, l) in scored(), p in 0.001..0.3f64) {
        let c = roc_curve(&s, &l).unwrap();
        let pts: Vec<_> = [50.0, 100.0, 1000.0].iter().map(|&r| optimal_operating_point(&c, r, p).unwrap()).collect();
        for w in pts.windows(2) {
            prop_assert!(w[0].tpr <= w[1].tpr && w[0].fpr <= w[1].fpr);
        }
    }

    #[test]
    fn rank_biserial_is_antisymmetric(a in prop::collection::vec(-3i32..3, 1..30), b in prop::collection::vec(-3i32..3, 1..30)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = rank_biserial(&a, &b).unwrap();
        prop_assert!((r + rank_biserial(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&r));
    }
}

#[test]
fn worked_auc_and_curve() {
    let s = [0.1, 0.4, 0.35, 0.8];
    let l = [0, 0, 1, 1];
    assert_eq!(auc(&s, &l).unwrap(), 0.75);
    let c = roc_curve(&s, &l).unwrap();
    let pts: Vec<(f64, f64)> = c.fpr.iter().copied().zip(c.tpr.iter().copied()).collect();
    for p in [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)] {
        assert!(pts.contains(&p), "{p:?}");
    }
    assert_eq!(auc(&[1.0, 2.0, 3.0], &[0, 1, 1]).unwrap(), 1.0);
    assert_eq!(auc(&[0.2; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    assert!(auc(&[0.2, 0.3], &[1, 1]).is_err());
    for (s, want) in [([0.1, 0.9], 1.0), ([0.9, 0.1], 0.0)] {
        assert_eq!(roc_curve(&s, &[0, 1]).unwrap().area(), want);
    }
}

#[test]
fn worked_operating_points() {
    let p = 13.0 / 4664.0;
    let op = operating_point(0.5, 0.54, 0.11, 100.0, p);
    assert!((op.lr_positive - 4.909).abs() < 1e-3);
    assert!((op.lr_negative - 0.517).abs() < 1e-3);
    assert!((op.p_injury_given_positive - 0.0135).abs() < 5e-4);
    assert!((op.p_injury_given_negative - 0.00144).abs() < 5e-5);
    let inf = operating_point(0.5, 0.2, 0.0, 100.0, p);
    assert!(inf.lr_positive.is_infinite());

    let c = roc_curve(&[0.1, 0.2, 0.3, 0.4, 0.5], &[0, 1, 0, 1, 0]).unwrap();
    let corner = optimal_operating_point(&c, 1e9, 0.4).unwrap();
    assert_eq!(corner.tpr, 1.0);
}

#[test]
fn rank_biserial_values() {
    assert_eq!(rank_biserial(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(rank_biserial(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(), 0.0);
    // Over the nine pairs: one win, two ties, six losses.
    let r = rank_biserial(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    assert!((r - (-5.0 / 9.0)).abs() < 1e-12);
}

#[test]
fn subgroups() {
    let scores = [0.9, 0.8, 0.7, 0.1, 0.2, 0.3, 0.6, 0.4, 0.5, 0.35];
    let labels = [1, 1, 1, 0, 0, 0, 1, 0, 1, 0];
    let group = [true, true, true, true, true, true, false, false, false, false];
    let r = subgroup_auc(&scores, &labels, &group).unwrap();
    assert_eq!(r.in_group.n_pos, 3);
    assert_eq!(r.in_group.auc, Some(1.0));
    assert!(r.in_group.warning.as_deref().unwrap().contains("n_pos=3"));
    assert_eq!(r.out_group.status, GroupStatus::Ok);

    let everyone = subgroup_auc(&scores, &labels, &[true; 10]).unwrap();
    assert_eq!(everyone.out_group.status, GroupStatus::Empty);
    assert_eq!(everyone.in_group.n, 10);

    let twin_scores = [0.1, 0.5, 0.3, 0.9, 0.1, 0.5, 0.3, 0.9];
    let twin_labels = [0, 1, 0, 1, 0, 1, 0, 1];
    let halves = [true, true, true, true, false, false, false, false];
    let t = subgroup_auc(&twin_scores, &twin_labels, &halves).unwrap();
    assert_eq!(t.in_group.auc, t.out_group.auc);

    let lonely = subgroup_auc(&[0.1, 0.2, 0.3], &[0, 1, 1], &[true, false, false]).unwrap();
    assert_eq!(lonely.in_group.status, GroupStatus::InsufficientData);
}

fn small_context() -> DataContext {
    let cohort = generate_cohort(&CohortConfig {
        n_athletes: 10,
        seasons: vec![2014, 2015],
        weeks_per_season: 24,
        hazard: HazardConfig { intercept: -4.0, ..HazardConfig::default() },
        seed: 4,
        ..CohortConfig::default()
    })
    .unwrap();
    DataContext::new(cohort.cohort, PipelineOptions::new(vec![2014], vec![2015])).unwrap()
}

fn elastic_net_plan(n_sims: usize, permutation: LabelPermutation) -> SimulationPlan {
    SimulationPlan {
        outcomes: vec![
            OutcomeKey { outcome: Outcome::NonContact, lagged: false },
            OutcomeKey { outcome: Outcome::NonContact, lagged: true },
        ],
        protocols: vec![Protocol::PLAIN, "pca+undersample".parse().unwrap()],
        models: vec![ModelChoice {
            folds: 3,
            lambdas: Some(vec![0.01, 0.1]),
            alphas: Some(vec![0.5]),
            ..ModelChoice::new(ModelFamily::ElasticNet)
        }],
        n_sims,
        master_seed: 77,
        cv: CvOptions::default(),
        permutation,
    }
}

#[test]
fn single_simulation_reports_zero_spread() {
    let ctx = small_context();
    let s = run_simulations(&ctx, &elastic_net_plan(1, LabelPermutation::None)).unwrap();
    assert_eq!(s.cells.len(), 4);
    for c in &s.cells {
        assert_eq!(c.records.len(), 1);
        assert!(c.single_run());
        assert_eq!(c.sd(), 0.0);
    }
    let mut out = Vec::new();
    s.write_summary(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().next().unwrap().contains("single_run"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn repeated_simulations_are_identical() {
    let ctx = small_context();
    let plan = elastic_net_plan(3, LabelPermutation::None);
    let a = run_simulations(&ctx, &plan).unwrap();
    let b = run_simulations(&ctx, &plan).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_runs(&mut x).unwrap();
    b.write_runs(&mut y).unwrap();
    assert_eq!(x, y);
    assert!(a.cells.iter().all(|c| c.records.len() == 3));
}

#[test]
fn permuted_test_labels_give_chance_auc() {
    let ctx = small_context();
    let s = run_simulations(&ctx, &elastic_net_plan(50, LabelPermutation::Test)).unwrap();
    for c in &s.cells {
        assert!(c.complete());
        let m = c.mean();
        assert!((0.45..=0.55).contains(&m), "{:?}: {m}", c.key);
    }
}
