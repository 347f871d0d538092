use std::collections::HashMap;

use firstnature::archaeology::{
    arch_event_study, bootstrap_event_study, clustered_bootstrap, decode_tensor, encode_tensor, monte_carlo_panel,
    window_probability, ActivityConfig, ActivityPanel, ArchTreatment, DatingModel, FindingKind, FindingRecord,
    ProbabilityPanel, ReplicateTensor,
};
use firstnature::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(id: &str, parish: &str, a: i32, b: i32) -> FindingRecord {
    FindingRecord::new(id, parish, FindingKind::Coin, a, b, DatingModel::Uniform).unwrap()
}

fn config(grid: Vec<i32>, replicates: usize, seed: u64) -> ActivityConfig {
    ActivityConfig {
        year_grid: grid,
        replicates,
        seed,
        ..Default::default()
    }
}

#[test]
fn single_finding_exact_and_monte_carlo() {
    let f = uniform("a", "p", 1000, 1099);
    assert_eq!(window_probability(&f, 1025, 25), 0.5);
    for seed in 1..=20 {
        let panel = monte_carlo_panel(&[f.clone()], &["p".into()], &config(vec![1025], 1000, seed)).unwrap();
        assert!((panel.get(0, 0) - 0.5).abs() <= 0.047, "seed {seed}: {}", panel.get(0, 0));
    }
}

#[test]
fn two_findings_follow_the_product_formula() {
    let f1 = uniform("a", "p", 1000, 1099);
    let f2 = uniform("b", "p", 1010, 1039);
    let p1 = window_probability(&f1, 1025, 25);
    let p2 = window_probability(&f2, 1025, 25);
    let exact = 1.0 - (1.0 - p1) * (1.0 - p2);
    assert!((p2 - 1.0).abs() < 1e-15);
    let f3 = uniform("c", "p", 1040, 1139);
    let p3 = window_probability(&f3, 1025, 25);
    let exact13 = 1.0 - (1.0 - p1) * (1.0 - p3);
    for seed in 1..=20 {
        let a = monte_carlo_panel(&[f1.clone(), f2.clone()], &["p".into()], &config(vec![1025], 1000, seed)).unwrap();
        assert!((a.get(0, 0) - exact).abs() <= 0.047);
        let b = monte_carlo_panel(&[f1.clone(), f3.clone()], &["p".into()], &config(vec![1025], 1000, seed)).unwrap();
        assert!((b.get(0, 0) - exact13).abs() <= 0.047, "seed {seed}: {} vs {exact13}", b.get(0, 0));
    }
}

/// Findings for `n` parishes with heterogeneous dating ranges.
fn random_findings(n: usize, seed: u64) -> (Vec<FindingRecord>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:02}")).collect();
    let mut out = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for k in 0..rng.gen_range(1..6) {
            let a = rng.gen_range(750..1450);
            let b = (a + rng.gen_range(0..200)).min(1500);
            out.push(uniform(&format!("f{i}_{k}"), id, a, b));
        }
    }
    (out, ids)
}

fn dummy(ids: &[String], treated: usize) -> ArchTreatment {
    ArchTreatment::Dummy(ids.iter().enumerate().map(|(i, id)| (id.clone(), f64::from(u8::from(i < treated)))).collect())
}

#[test]
fn prior_scaling_scales_coefficients_and_keeps_t() {
    let (findings, ids) = random_findings(30, 2);
    let panel = monte_carlo_panel(&findings, &ids, &ActivityConfig { replicates: 200, seed: 4, ..Default::default() }).unwrap();
    let t = dummy(&ids, 12);
    let (a, ba) = bootstrap_event_study(&panel, &t, 1000, 50, 9).unwrap();
    let (b, bb) = bootstrap_event_study(&panel.with_prior(0.37), &t, 1000, 50, 9).unwrap();
    for (x, y) in a.estimated().zip(b.estimated()) {
        assert!((y.estimate - 0.37 * x.estimate).abs() <= 1e-8 * x.estimate.abs().max(1e-12) + 1e-15);
        assert!((y.se / x.se - 0.37).abs() < 1e-8);
        assert!((y.t_stat() - x.t_stat()).abs() < 1e-8);
    }
    for j in 0..ba.terms.len() {
        assert!((bb.se[j] / ba.se[j] - 0.37).abs() < 1e-8);
    }
}

#[test]
fn wider_windows_never_lower_probabilities() {
    let (findings, ids) = random_findings(15, 3);
    let narrow = monte_carlo_panel(&findings, &ids, &ActivityConfig { window_halfwidth: 10, replicates: 100, seed: 1, ..Default::default() }).unwrap();
    let wide = monte_carlo_panel(&findings, &ids, &ActivityConfig { window_halfwidth: 40, replicates: 100, seed: 1, ..Default::default() }).unwrap();
    assert!(narrow.probability.iter().zip(&wide.probability).all(|(a, b)| b >= a));
}

#[test]
fn bootstrap_se_matches_cluster_mean_formula() {
    // parish p has activity rate q_p in every replicate-year; the estimator
    // is the cross-parish mean of the first year
    let n_p = 80;
    let n_b = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q: Vec<f64> = (0..n_p).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut t = ReplicateTensor::zeros(n_b, n_p, 1);
    for b in 0..n_b {
        for p in 0..n_p {
            t.set(b, p, 0, rng.gen_bool(q[p]));
        }
    }
    let ids: Vec<String> = (0..n_p).map(|i| format!("p{i}")).collect();
    let panel = ActivityPanel::from_replicates(ids, vec![1000], 25, 1.0, t).unwrap();
    let mean = |pp: &ProbabilityPanel| -> Result<Vec<(String, f64)>> {
        Ok(vec![("m".into(), (0..pp.n_units()).map(|u| pp.get(u, 0)).sum::<f64>() / pp.n_units() as f64)])
    };
    let r = clustered_bootstrap(&panel, mean, 1000, 5).unwrap();
    let p: Vec<f64> = (0..n_p).map(|i| panel.get(i, 0)).collect();
    let m = p.iter().sum::<f64>() / n_p as f64;
    let s2 = p.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n_p as f64 - 1.0);
    let analytic = (s2 / n_p as f64).sqrt();
    assert!((r.se[0] / analytic - 1.0).abs() < 0.15, "{} vs {analytic}", r.se[0]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (findings, ids) = random_findings(24, 6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let panel = monte_carlo_panel(&findings, &ids, &ActivityConfig { replicates: 300, seed: 7, ..Default::default() }).unwrap();
            let (_, boot) = bootstrap_event_study(&panel, &dummy(&ids, 10), 1000, 40, 7).unwrap();
            (encode_tensor(&panel.replicates), boot)
        })
    };
    let (t1, b1) = run(1);
    let (t4, b4) = run(4);
    assert_eq!(t1, t4);
    assert_eq!(b1.draws.len(), b4.draws.len());
    for (x, y) in b1.draws.iter().flatten().zip(b4.draws.iter().flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn market_access_treatment_is_negated() {
    let (findings, ids) = random_findings(20, 8);
    let panel = monte_carlo_panel(&findings, &ids, &ActivityConfig { replicates: 50, seed: 2, ..Default::default() }).unwrap();
    let dlma: HashMap<String, f64> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as f64 / 10.0)).collect();
    let neg: HashMap<String, f64> = dlma.iter().map(|(k, v)| (k.clone(), -v)).collect();
    let a = arch_event_study(&panel.probabilities(), &ArchTreatment::MarketAccessLoss(dlma), 1000).unwrap();
    let b = arch_event_study(&panel.probabilities(), &ArchTreatment::Dummy(neg), 1000).unwrap();
    for (x, y) in a.estimated().zip(b.estimated()) {
        assert!((x.estimate - y.estimate).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tensor_cache_roundtrips(b in 1usize..20, p in 1usize..9, y in 1usize..17, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = ReplicateTensor::zeros(b, p, y);
        for i in 0..b {
            for j in 0..p {
                for k in 0..y {
                    t.set(i, j, k, rng.gen_bool(0.3));
                }
            }
        }
        let back = decode_tensor(&encode_tensor(&t)).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn probabilities_stay_in_unit_interval(seed in 0u64..500) {
        let (findings, ids) = random_findings(5, seed);
        let panel = monte_carlo_panel(&findings, &ids, &ActivityConfig { replicates: 20, seed, ..Default::default() }).unwrap();
        prop_assert!(panel.probability.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
