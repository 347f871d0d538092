use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::market_access::Region;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        Candidate { id: id.into(), score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub treated_id: String,
    pub control_id: String,
    pub score_t: f64,
    pub score_c: f64,
}

impl MatchPair {
    pub fn distance(&self) -> f64 {
        (self.score_t - self.score_c).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// In visiting order.
    pub pairs: Vec<MatchPair>,
    pub unmatched: Vec<String>,
    /// Treated ids in the order they were visited.
    pub order: Vec<String>,
}

impl MatchResult {
    /// Treated and control ids of the matched sample.
    pub fn matched_ids(&self) -> Vec<String> {
        self.pairs
            .iter()
            .flat_map(|p| [p.treated_id.clone(), p.control_id.clone()])
            .collect()
    }

    pub fn mean_distance(&self) -> f64 {
        self.pairs.iter().map(MatchPair::distance).sum::<f64>() / self.pairs.len() as f64
    }
}

fn check_unique(c: &[Candidate], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for x in c {
        if !x.score.is_finite() {
            return Err(Error::InvalidInput(format!("{what} {}: non-finite propensity score", x.id)));
        }
        if !seen.insert(x.id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate {what} id {}", x.id)));
        }
    }
    Ok(())
}

/// Greedy 1:1 nearest-neighbour matching without replacement.
///
/// Treated units are sorted by id and shuffled with a ChaCha20 generator
/// seeded by `seed`; each in turn takes the available control with the
/// smallest score distance, ties going to the smaller control id. Treated
/// units left when controls run out are reported as unmatched.
pub fn greedy_match(treated: &[Candidate], controls: &[Candidate], seed: u64) -> Result<MatchResult> {
    check_unique(treated, "treated")?;
    check_unique(controls, "control")?;
    let mut order: Vec<&Candidate> = treated.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));

    let mut pool: Vec<&Candidate> = controls.iter().collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut available = vec![true; pool.len()];
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for t in &order {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in pool.iter().enumerate() {
            if !available[j] {
                continue;
            }
            let d = (t.score - c.score).abs();
            // pool is id-sorted, so strict < keeps the smaller id on ties
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, _)) => {
                available[j] = false;
                pairs.push(MatchPair {
                    treated_id: t.id.clone(),
                    control_id: pool[j].id.clone(),
                    score_t: t.score,
                    score_c: pool[j].score,
                });
            }
            None => unmatched.push(t.id.clone()),
        }
    }
    Ok(MatchResult {
        pairs,
        unmatched,
        order: order.iter().map(|c| c.id.clone()).collect(),
    })
}

/// Treated ids (flag set) and eligible control ids. Controls inside the
/// Limfjord region are excluded unless `include_limfjord`; parishes without
/// a region count as outside it.
pub fn split_pool<'a>(
    ids: impl IntoIterator<Item = (&'a str, bool)>,
    regions: &HashMap<String, Region>,
    include_limfjord: bool,
) -> (Vec<String>, Vec<String>) {
    let mut treated = Vec::new();
    let mut controls = Vec::new();
    for (id, is_treated) in ids {
        if is_treated {
            treated.push(id.to_string());
        } else if include_limfjord || !regions.get(id).is_some_and(|r| r.is_limfjord()) {
            controls.push(id.to_string());
        }
    }
    (treated, controls)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        GroupStats { n, mean, sd }
    }
}

/// Standardised mean difference with the pooled (average-variance) SD.
pub fn standardized_mean_difference(t: &GroupStats, c: &GroupStats) -> f64 {
    let diff = t.mean - c.mean;
    let pooled = ((t.sd * t.sd + c.sd * c.sd) / 2.0).sqrt();
    if pooled == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / pooled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub treated_before: GroupStats,
    pub control_before: GroupStats,
    pub treated_after: GroupStats,
    pub control_after: GroupStats,
    pub smd_before: f64,
    pub smd_after: f64,
    pub mean_abs_diff: f64,
}

/// Propensity-score balance of the full treated and control pools against
/// the matched pairs.
pub fn balance_report(result: &MatchResult, treated: &[Candidate], controls: &[Candidate]) -> BalanceReport {
    let scores = |c: &[Candidate]| c.iter().map(|x| x.score).collect::<Vec<_>>();
    let treated_before = GroupStats::of(&scores(treated));
    let control_before = GroupStats::of(&scores(controls));
    let st: Vec<f64> = result.pairs.iter().map(|p| p.score_t).collect();
    let sc: Vec<f64> = result.pairs.iter().map(|p| p.score_c).collect();
    let treated_after = GroupStats::of(&st);
    let control_after = GroupStats::of(&sc);
    BalanceReport {
        smd_before: standardized_mean_difference(&treated_before, &control_before),
        smd_after: standardized_mean_difference(&treated_after, &control_after),
        mean_abs_diff: result.mean_distance(),
        treated_before,
        control_before,
        treated_after,
        control_after,
    }
}

pub fn write_matches(path: impl AsRef<Path>, comment: Option<&str>, result: &MatchResult) -> Result<()> {
    io::write_rows(path, comment, &result.pairs)
}

pub fn read_matches(path: impl AsRef<Path>) -> Result<Vec<MatchPair>> {
    io::read_rows(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbour() {
        let r = greedy_match(&[Candidate::new("t", 0.9)], &[Candidate::new("a", 0.10), Candidate::new("b", 0.85)], 1).unwrap();
        assert_eq!(r.pairs[0].control_id, "b");
        assert!(r.unmatched.is_empty());
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let r = greedy_match(&[Candidate::new("t", 0.5)], &[Candidate::new("z", 0.6), Candidate::new("m", 0.4)], 3).unwrap();
        assert_eq!(r.pairs[0].control_id, "m");
    }

    #[test]
    fn exhausted_controls_reported() {
        let t = [Candidate::new("t1", 0.5), Candidate::new("t2", 0.5)];
        let r = greedy_match(&t, &[Candidate::new("c", 0.5)], 9).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.unmatched.len(), 1);
        assert_eq!(r.matched_ids().len(), 2);
    }

    #[test]
    fn equal_scores_balance_perfectly() {
        let t: Vec<Candidate> = (0..5).map(|i| Candidate::new(format!("t{i}"), 0.3)).collect();
        let c: Vec<Candidate> = (0..8).map(|i| Candidate::new(format!("c{i}"), 0.3)).collect();
        let r = greedy_match(&t, &c, 0).unwrap();
        assert!(r.pairs.iter().all(|p| p.distance() == 0.0));
        assert_eq!(balance_report(&r, &t, &c).smd_after, 0.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let t = [Candidate::new("t", 0.1), Candidate::new("t", 0.2)];
        assert!(greedy_match(&t, &[Candidate::new("c", 0.1)], 0).is_err());
    }

    #[test]
    fn pool_excludes_limfjord_controls() {
        let regions: HashMap<String, Region> = [("m".to_string(), Region::Middle), ("r".to_string(), Region::Reference)].into();
        let ids = [("w", true), ("m", false), ("r", false), ("x", false)];
        let (t, c) = split_pool(ids.iter().copied(), &regions, false);
        assert_eq!(t, vec!["w"]);
        assert_eq!(c, vec!["r", "x"]);
        let (_, c) = split_pool(ids.iter().copied(), &regions, true);
        assert_eq!(c.len(), 3);
    }
}
