//! Acceptance criteria, one PASS/FAIL line each on stderr.
//!
//! Run with `cargo test -p firstnature-core --test acceptance`. Lines are
//! written straight to stderr so they show up without `--nocapture`.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::time::Instant;

use firstnature::archaeology::{
    bootstrap_event_study, monte_carlo_panel, window_probability, ActivityConfig, ArchTreatment, DatingModel, FindingKind,
    FindingRecord,
};
use firstnature::estimators::{
    bonferroni_adjust, percent_from_logpoints, ppml, twfe_event_study, EventPanel, EventStudySpec, PpmlOptions, Transform,
};
use firstnature::geo::{cost_distance, CellClass, CellCoord, CostSurface};
use firstnature::market_access::{compute_market_access, market_access_from_distances, ParishSite, Port, PortRegistry};
use firstnature::geo::Point;
use firstnature::matching::{greedy_match, match_parishes, Candidate, MatchingOptions, ScoreModel, SoilFeatureRow, SoilTable};
use firstnature::market_access::Region;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::{Distribution, Normal, Poisson};

const YEARS: [i32; 9] = [1787, 1801, 1834, 1840, 1845, 1850, 1860, 1880, 1901];

type Outcome = (bool, String);

fn report(n: usize, (ok, detail): &Outcome) {
    let status = if *ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: {status}  {detail}");
}

// 1 ------------------------------------------------------------------------

fn mixed_grid(seed: u64) -> CostSurface {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..400)
        .map(|_| match rng.gen_range(0..10) {
            0..=4 => CellClass::Water,
            5..=8 => CellClass::Land,
            _ => CellClass::ForcedLand,
        })
        .collect();
    CostSurface::from_classes(20, 20, 1.0, 10.0, cells).unwrap()
}

fn bellman_ford(s: &CostSurface, src: usize) -> Vec<f64> {
    let unit = |i: usize| if s.classes()[i] == CellClass::Water { 1.0 } else { s.alpha() };
    let mut edges = Vec::new();
    for a in 0..s.len() {
        let ca = s.coord(a);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (r, c) = (ca.row as i64 + dr, ca.col as i64 + dc);
                if (dr, dc) == (0, 0) || r < 0 || c < 0 || r >= 20 || c >= 20 {
                    continue;
                }
                let b = s.index(CellCoord::new(c as usize, r as usize));
                let step = if dr != 0 && dc != 0 { 2f64.sqrt() } else { 1.0 };
                edges.push((a, b, step * unit(a).min(unit(b))));
            }
        }
    }
    let mut d = vec![f64::INFINITY; s.len()];
    d[src] = 0.0;
    loop {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if d[a] + w < d[b] {
                d[b] = d[a] + w;
                changed = true;
            }
        }
        if !changed {
            return d;
        }
    }
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut elapsed = 0.0;
    for seed in 1..=50u64 {
        let s = mixed_grid(seed);
        let src = (seed as usize * 37) % 400;
        let t0 = Instant::now();
        let got = cost_distance(&s, s.coord(src)).unwrap();
        elapsed += t0.elapsed().as_secs_f64();
        for (g, w) in got.distances.iter().zip(bellman_ford(&s, src)) {
            if g.is_finite() || w.is_finite() {
                worst = worst.max((g - w).abs());
            }
        }
    }
    (worst <= 1e-9 && elapsed < 5.0, format!("max |dijkstra - bellman-ford| = {worst:.1e}, dijkstra time {elapsed:.3}s"))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let ma = market_access_from_distances(&[Some(1.0), Some(3.0)], -1.0);
    // the same case end to end: a water row with the parish at column 0
    let s = CostSurface::from_classes(5, 1, 1.0, 10.0, vec![CellClass::Water; 5]).unwrap();
    let port = |id: &str, x: f64, base: bool| Port {
        id: id.into(),
        location: Point::new(x, 0.5),
        in_baseline: base,
        in_counterfactual: true,
    };
    let reg = PortRegistry::new(vec![port("near", 1.5, false), port("far", 3.5, true)]).unwrap();
    let parish = ParishSite {
        id: "p".into(),
        centroid: Point::new(0.5, 0.5),
        region: None,
    };
    let t = compute_market_access(&[parish], &reg, -1.0, &s).unwrap();
    let d = t.records[0].delta_log_ma;
    let err = (d - 3f64.ln()).abs();
    (ma == 0.75 && err <= 1e-12, format!("MA = {ma}, dlogMA = {d:.15} (|err| {err:.1e})"))
}

// 3, 4 ---------------------------------------------------------------------

fn simulate(seed: u64, units: usize, treated: usize, effects: &[f64; 9], sd: f64) -> (EventPanel, Vec<(usize, usize, f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut panel = EventPanel::single();
    let year_fx: Vec<f64> = YEARS.iter().map(|_| rng.gen_range(-0.3..0.3)).collect();
    let mut rows = Vec::new();
    for u in 0..units {
        let d = f64::from(u8::from(u < treated));
        let idx = panel.add_unit(&format!("u{u:03}"), vec![d]).unwrap();
        let a: f64 = rng.gen_range(4.0..7.0);
        for (t, &year) in YEARS.iter().enumerate() {
            let y = a + year_fx[t] + d * effects[t] + noise.sample(&mut rng);
            panel.push_index(idx, year, y);
            rows.push((idx, t, y, d));
        }
    }
    (panel, rows)
}

fn census_spec() -> EventStudySpec {
    EventStudySpec {
        transform: Transform::Identity,
        reference_year: 1801,
        event_years: YEARS.to_vec(),
        bonferroni_m: None,
    }
}

fn criterion_3() -> Outcome {
    let effects = [0.0, 0.0, 0.0, 0.05, 0.1, 0.12, 0.15, 0.2, 0.25];
    let (panel, rows) = simulate(3, 200, 40, &effects, 0.05);
    let fit = twfe_event_study(&panel, &census_spec()).unwrap();
    let k = 200 + 8 + 8;
    let mut x = DMatrix::zeros(rows.len(), k);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
    for (i, &(u, t, _, d)) in rows.iter().enumerate() {
        x[(i, u)] = 1.0;
        if t > 0 {
            x[(i, 200 + t - 1)] = 1.0;
        }
        if t != 1 {
            x[(i, 208 + if t < 1 { t } else { t - 1 })] = d;
        }
    }
    let beta = x.svd(true, true).solve(&y, 1e-12).unwrap();
    let max_diff = fit
        .estimated()
        .enumerate()
        .map(|(j, c)| (c.estimate - beta[208 + j]).abs())
        .fold(0.0, f64::max);

    let mut p = EventPanel::single();
    for (id, d, pre, post) in [("a", 1.0, 2.0, 7.5), ("b", 1.0, 4.0, 8.0), ("c", 0.0, 1.0, 2.5), ("e", 0.0, 3.0, 3.0)] {
        let u = p.add_unit(id, vec![d]).unwrap();
        p.push_index(u, 1801, pre);
        p.push_index(u, 1901, post);
    }
    let two = EventStudySpec {
        event_years: vec![1801, 1901],
        ..census_spec()
    };
    let did = (7.75 - 3.0) - (2.75 - 2.0);
    let got = twfe_event_study(&p, &two).unwrap().beta("affected", 1901).unwrap();
    let did_err = (got - did).abs();
    (
        max_diff < 1e-8 && did_err < 1e-12,
        format!("max |within - dummy OLS| = {max_diff:.1e}; 2x2 DiD {got} vs {did} (|err| {did_err:.1e})"),
    )
}

fn criterion_4() -> Outcome {
    let effects = [0.0, 0.0, 0.0, 0.05, 0.1, 0.12, 0.15, 0.2, 0.25];
    let mut hit_1901 = 0;
    let mut hit_1787 = 0;
    for seed in 1..=100u64 {
        let (panel, _) = simulate(1000 + seed, 200, 40, &effects, 0.05);
        let fit = twfe_event_study(&panel, &census_spec()).unwrap();
        let c = fit.coefficient("affected", 1901).unwrap();
        hit_1901 += usize::from((c.estimate - 0.25).abs() <= 2.0 * c.se);
        let c = fit.coefficient("affected", 1787).unwrap();
        hit_1787 += usize::from(c.estimate.abs() <= 2.0 * c.se);
    }
    (
        hit_1901 >= 95 && hit_1787 >= 95,
        format!("beta_1901 = 0.25 inside +-2 SE in {hit_1901}/100 seeds; beta_1787 covers 0 in {hit_1787}/100"),
    )
}

// 5 ------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let y = [0.0, 3.0, 1.0, 7.0, 2.0, 0.0, 4.0, 9.0];
    let ones = DMatrix::from_element(y.len(), 1, 1.0);
    let ids: Vec<usize> = (0..y.len()).collect();
    let fit = ppml(&ones, &y, &ids, vec!["const".into()], PpmlOptions::default()).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let icpt_err = (fit.coefficients[0] - mean.ln()).abs();

    let truth = [0.5, 0.8, -0.4];
    let mut covered = [0usize; 3];
    let mut worst_score = 0.0f64;
    for seed in 1..=100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 600;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let yv: Vec<f64> = (0..n)
            .map(|i| {
                let eta: f64 = (0..3).map(|j| x[(i, j)] * truth[j]).sum();
                Poisson::new(eta.exp()).unwrap().sample(&mut rng)
            })
            .collect();
        let cl: Vec<usize> = (0..n).map(|i| i / 3).collect();
        let f = ppml(&x, &yv, &cl, vec!["c".into(), "x1".into(), "x2".into()], PpmlOptions::default()).unwrap();
        for j in 0..3 {
            covered[j] += usize::from((f.coefficients[j] - truth[j]).abs() <= 2.0 * f.se[j]);
        }
        worst_score = f.score(&x, &yv).iter().fold(worst_score, |m, s| m.max(s.abs()));
    }
    let ok = icpt_err < 1e-10 && covered.iter().all(|c| *c >= 95) && worst_score < 1e-8;
    (
        ok,
        format!("intercept-only |err| {icpt_err:.1e}; coverage {covered:?}/100; max |score| {worst_score:.1e}"),
    )
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let xs = [1.0, 2.0, 4.0, 3.0, 5.0, 7.0];
    let ys = [1.2, 1.9, 4.4, 2.7, 5.3, 6.6];
    let cl = [0usize, 0, 1, 1, 2, 2];
    let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let fit = firstnature::estimators::ols_clustered(&x, &ys, &cl, vec!["c".into(), "x".into()]).unwrap();
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let det = 6.0 * sxx - sx * sx;
    let b1 = (6.0 * sxy - sx * sy) / det;
    let b0 = (sy - b1 * sx) / 6.0;
    let inv = [[sxx / det, -sx / det], [-sx / det, 6.0 / det]];
    let mut meat = [[0.0; 2]; 2];
    for g in 0..3 {
        let (mut s0, mut s1) = (0.0, 0.0);
        for i in (0..6).filter(|i| cl[*i] == g) {
            let e = ys[i] - b0 - b1 * xs[i];
            s0 += e;
            s1 += xs[i] * e;
        }
        let s = [s0, s1];
        for a in 0..2 {
            for b in 0..2 {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let adj = 3.0 / 2.0 * 5.0 / 4.0;
    let var = |k: usize| {
        let mut v = 0.0;
        for c in 0..2 {
            for d in 0..2 {
                v += inv[k][c] * meat[c][d] * inv[d][k];
            }
        }
        (v * adj).sqrt()
    };
    let err = (fit.se[0] - var(0)).abs().max((fit.se[1] - var(1)).abs());
    (err < 1e-10, format!("max |SE - naive sandwich| = {err:.1e}"))
}

// 7, 8 ---------------------------------------------------------------------

fn coin(id: &str, parish: &str, a: i32, b: i32) -> FindingRecord {
    FindingRecord::new(id, parish, FindingKind::Coin, a, b, DatingModel::Uniform).unwrap()
}

fn criterion_7() -> Outcome {
    let f1 = coin("a", "p", 1000, 1099);
    let f2 = coin("b", "p", 1040, 1139);
    let exact = window_probability(&f1, 1025, 25);
    let p2 = window_probability(&f2, 1025, 25);
    let product = 1.0 - (1.0 - exact) * (1.0 - p2);
    let mut worst_single = 0.0f64;
    let mut worst_pair = 0.0f64;
    for seed in 1..=20 {
        let cfg = ActivityConfig {
            year_grid: vec![1025],
            replicates: 1000,
            seed,
            ..Default::default()
        };
        let one = monte_carlo_panel(&[f1.clone()], &["p".into()], &cfg).unwrap();
        worst_single = worst_single.max((one.get(0, 0) - 0.5).abs());
        let two = monte_carlo_panel(&[f1.clone(), f2.clone()], &["p".into()], &cfg).unwrap();
        worst_pair = worst_pair.max((two.get(0, 0) - product).abs());
    }
    (
        exact == 0.5 && worst_single <= 0.047 && worst_pair <= 0.047,
        format!("exact {exact}; max MC error single {worst_single:.3}, pair {worst_pair:.3} (product {product:.4})"),
    )
}

fn random_findings(n: usize, seed: u64) -> (Vec<FindingRecord>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:03}")).collect();
    let mut out = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for k in 0..rng.gen_range(1..8) {
            let a = rng.gen_range(750..1450);
            let b = (a + rng.gen_range(0..150)).min(1500);
            out.push(coin(&format!("f{i}_{k}"), id, a, b));
        }
    }
    (out, ids)
}

fn criterion_8() -> Outcome {
    let (findings, ids) = random_findings(40, 8);
    let cfg = ActivityConfig {
        replicates: 200,
        seed: 8,
        ..Default::default()
    };
    let panel = monte_carlo_panel(&findings, &ids, &cfg).unwrap();
    let t = ArchTreatment::Dummy(ids.iter().enumerate().map(|(i, id)| (id.clone(), f64::from(u8::from(i % 3 == 0)))).collect());
    let (a, ba) = bootstrap_event_study(&panel, &t, 1000, 50, 1).unwrap();
    let (b, bb) = bootstrap_event_study(&panel.with_prior(0.37), &t, 1000, 50, 1).unwrap();
    let mut rel = 0.0f64;
    let mut dt = 0.0f64;
    for (x, y) in a.estimated().zip(b.estimated()) {
        if x.estimate != 0.0 {
            rel = rel.max((y.estimate / x.estimate - 0.37).abs() / 0.37);
        }
        rel = rel.max((y.se / x.se - 0.37).abs() / 0.37);
        dt = dt.max((y.t_stat() - x.t_stat()).abs());
    }
    for j in 0..ba.terms.len() {
        rel = rel.max((bb.se[j] / ba.se[j] - 0.37).abs() / 0.37);
    }
    (rel < 1e-8 && dt < 1e-8, format!("max rel. error of scaled beta/SE {rel:.1e}, max |dt| {dt:.1e}"))
}

// 9 ------------------------------------------------------------------------

/// Activity in each (parish, grid year) is Bernoulli(a_i + g_t - 0.01 D_i
/// 1[t > 1200]); an active cell leaves one finding dated inside its own
/// window, so the activity panel reproduces the process exactly.
fn criterion_9() -> Outcome {
    let grid: Vec<i32> = (750..=1500).step_by(50).collect();
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:03}")).collect();
    let gamma: Vec<f64> = grid.iter().map(|_| rng.gen_range(-0.1..0.1)).collect();
    let mut findings = Vec::new();
    let mut treat = HashMap::new();
    for (i, id) in ids.iter().enumerate() {
        let d = i % 2 == 0;
        treat.insert(id.clone(), f64::from(u8::from(d)));
        let a: f64 = rng.gen_range(0.3..0.6);
        for (gi, &g) in grid.iter().enumerate() {
            let p = a + gamma[gi] - if d && g > 1200 { 0.01 } else { 0.0 };
            if rng.gen_bool(p) {
                let lo = rng.gen_range(g - 25..g + 25);
                let hi = rng.gen_range(lo..g + 25);
                findings.push(coin(&format!("f{i}_{g}"), id, lo, hi));
            }
        }
    }
    let cfg = ActivityConfig {
        year_grid: grid.clone(),
        replicates: 50,
        seed: 9,
        ..Default::default()
    };
    let treatment = ArchTreatment::Dummy(treat);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let panel = monte_carlo_panel(&findings, &ids, &cfg).unwrap();
            bootstrap_event_study(&panel, &treatment, 1000, 200, 9).unwrap()
        })
    };
    let (fit, boot) = run(1);
    let (_, boot_n) = run(4);
    let identical = boot
        .draws
        .iter()
        .flatten()
        .zip(boot_n.draws.iter().flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    // the injected quantity is the post-1200 decline relative to the
    // pre-period: mean post-1200 beta minus mean pre-1200 beta
    let post: Vec<usize> = grid.iter().enumerate().filter(|(_, g)| **g > 1200).map(|(i, _)| i).collect();
    let pre: Vec<usize> = grid.iter().enumerate().filter(|(_, g)| **g <= 1200).map(|(i, _)| i).collect();
    let idx = |g: i32| boot.index(&format!("{g}xaffected"));
    let contrast = |v: &dyn Fn(i32) -> f64| {
        let m = |set: &[usize]| set.iter().map(|&i| v(grid[i])).sum::<f64>() / set.len() as f64;
        m(&post) - m(&pre)
    };
    let est = contrast(&|g| fit.beta("affected", g).unwrap());
    let draws: Vec<f64> = (0..boot.n_boot())
        .map(|d| contrast(&|g| idx(g).map_or(0.0, |j| boot.draws[d][j])))
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() as f64 - 1.0)).sqrt();
    let ok = (est + 0.01).abs() <= 2.0 * se && identical;
    (
        ok,
        format!("post-minus-pre decline {est:.4} vs -0.01 (bootstrap SE {se:.4}); 1 vs 4 threads bit-identical: {identical}"),
    )
}

// 10 -----------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut replay_ok = true;
    let mut injective = true;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<Candidate> = (0..20).map(|i| Candidate::new(format!("t{i:02}"), f64::from(rng.gen_range(0..30u8)) / 30.0)).collect();
        let c: Vec<Candidate> = (0..50).map(|i| Candidate::new(format!("c{i:02}"), f64::from(rng.gen_range(0..30u8)) / 30.0)).collect();
        let r = greedy_match(&t, &c, seed).unwrap();
        let mut order = t.clone();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
        let mut used = BTreeSet::new();
        let mut want = Vec::new();
        for ti in &order {
            let mut best: Option<&Candidate> = None;
            for ci in c.iter().filter(|ci| !used.contains(&ci.id)) {
                let d = (ti.score - ci.score).abs();
                best = match best {
                    Some(b) if (ti.score - b.score).abs() < d || ((ti.score - b.score).abs() == d && b.id < ci.id) => Some(b),
                    _ => Some(ci),
                };
            }
            let b = best.unwrap();
            used.insert(b.id.clone());
            want.push((ti.id.clone(), b.id.clone()));
        }
        let got: Vec<(String, String)> = r.pairs.iter().map(|p| (p.treated_id.clone(), p.control_id.clone())).collect();
        replay_ok &= got == want;
        let controls: BTreeSet<&String> = r.pairs.iter().map(|p| &p.control_id).collect();
        injective &= controls.len() == r.pairs.len();
    }

    // separable fixture: treated parishes are clay-heavy
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut rows = Vec::new();
    let mut regions = HashMap::new();
    for i in 0..150 {
        let treated = i < 30;
        let clay: f64 = if treated { rng.gen_range(0.3..0.8) } else { rng.gen_range(0.0..0.5) };
        let sand = rng.gen_range(0.0..(1.0 - clay));
        let id = format!("p{i:03}");
        regions.insert(id.clone(), if treated { Region::West } else { Region::Reference });
        rows.push(SoilFeatureRow {
            parish_id: id,
            soil_shares: vec![clay, sand, 1.0 - clay - sand],
            treated,
        });
    }
    let table = SoilTable::new(vec!["clay".into(), "sand".into(), "moraine".into()], rows).unwrap();
    let opts = MatchingOptions {
        model: ScoreModel::Logistic,
        seed: 10,
        ..Default::default()
    };
    let out = match_parishes(&table, &regions, &opts).unwrap();
    let (before, after) = (out.balance.smd_before, out.balance.smd_after);
    (
        replay_ok && injective && after.abs() < before.abs(),
        format!("replay oracle equal: {replay_ok}; injective: {injective}; SMD {before:.3} -> {after:.3}"),
    )
}

// 11 -----------------------------------------------------------------------

fn criterion_11() -> Outcome {
    let pct = percent_from_logpoints(0.2364);
    let p = bonferroni_adjust(0.01, 56);
    ((pct - 26.67).abs() <= 0.01 && p == 0.56, format!("0.2364 log points = {pct:.4}%; Bonferroni p(0.01, 56) = {p}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(usize, fn() -> Outcome)> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (n, f) in criteria {
        let out = f();
        report(n, &out);
        if !out.0 {
            failed.push(n);
        }
    }
    let _ = writeln!(
        std::io::stderr(),
        "criterion 12: NOT GATED  replication of published estimates needs the original census, register and finds data"
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
