//! Soil-based propensity scores and greedy 1:1 matching of treated parishes
//! to controls outside the treated region.

mod greedy;
mod propensity;
mod soil;

use std::collections::HashMap;

pub use greedy::{
    balance_report, greedy_match, read_matches, split_pool, standardized_mean_difference, write_matches,
    BalanceReport, Candidate, GroupStats, MatchPair, MatchResult,
};
pub use propensity::{
    auc, fit_boosted, fit_logistic, log_loss, sigmoid, BoostedTrees, BoostingParams, LogisticModel,
    PropensityKind, PropensityModel,
};
pub use soil::{read_soil, write_soil, SoilFeatureRow, SoilTable, MIN_SOIL_PREVALENCE};

use crate::error::Result;
use crate::market_access::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreModel {
    Boosted,
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingOptions {
    pub model: ScoreModel,
    pub boosting: BoostingParams,
    pub logistic_ridge: f64,
    pub min_prevalence: f64,
    pub include_limfjord_controls: bool,
    pub seed: u64,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        MatchingOptions {
            model: ScoreModel::Boosted,
            boosting: BoostingParams::default(),
            logistic_ridge: 1e-6,
            min_prevalence: MIN_SOIL_PREVALENCE,
            include_limfjord_controls: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchingOutcome {
    pub model: PropensityModel,
    pub treated: Vec<Candidate>,
    pub controls: Vec<Candidate>,
    pub result: MatchResult,
    pub balance: BalanceReport,
}

/// Filters soil types, fits the propensity model on treated parishes and
/// the eligible control pool, and matches.
pub fn match_parishes(table: &SoilTable, regions: &HashMap<String, Region>, opts: &MatchingOptions) -> Result<MatchingOutcome> {
    let filtered = table.filter_prevalent(opts.min_prevalence);
    let (treated_ids, control_ids) = split_pool(
        filtered.rows.iter().map(|r| (r.parish_id.as_str(), r.treated)),
        regions,
        opts.include_limfjord_controls,
    );
    let eligible: std::collections::HashSet<&str> =
        treated_ids.iter().chain(&control_ids).map(String::as_str).collect();
    let rows: Vec<&SoilFeatureRow> = filtered.rows.iter().filter(|r| eligible.contains(r.parish_id.as_str())).collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.soil_shares.clone()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.treated).collect();
    let kind = match opts.model {
        ScoreModel::Boosted => PropensityKind::Boosted(fit_boosted(
            &x,
            &y,
            &BoostingParams {
                seed: opts.seed,
                ..opts.boosting.clone()
            },
        )?),
        ScoreModel::Logistic => PropensityKind::Logistic(fit_logistic(&x, &y, opts.logistic_ridge)?),
    };
    let model = PropensityModel {
        features: filtered.soil_types.clone(),
        kind,
    };
    let mut treated = Vec::new();
    let mut controls = Vec::new();
    for (r, xi) in rows.iter().zip(&x) {
        let c = Candidate::new(r.parish_id.clone(), model.predict(xi));
        if r.treated {
            treated.push(c);
        } else {
            controls.push(c);
        }
    }
    let result = greedy_match(&treated, &controls, opts.seed)?;
    let balance = balance_report(&result, &treated, &controls);
    Ok(MatchingOutcome {
        model,
        treated,
        controls,
        result,
        balance,
    })
}
