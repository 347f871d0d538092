//! Post × location regressions on the port-year trade panel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::paneldata::{TradeLocation, TradeObservation};

use super::ols::{ols_clustered, LinearFit};
use super::ppml::{ppml, PpmlFit, PpmlOptions};
use super::transform::{transform_value, Transform};

const LOCATIONS: [TradeLocation; 3] = [TradeLocation::West, TradeLocation::Middle, TradeLocation::East];

/// Intercept, location dummies, Post, and Post × location with `other` as the
/// omitted location. Returns the design, names, and port cluster ids.
pub fn trade_design(obs: &[TradeObservation]) -> (DMatrix<f64>, Vec<String>, Vec<usize>) {
    let mut names = vec!["const".to_string()];
    names.extend(LOCATIONS.iter().map(|l| l.as_str().to_string()));
    names.push("post".into());
    names.extend(LOCATIONS.iter().map(|l| format!("post_x_{l}")));

    let k = names.len();
    let x = DMatrix::from_fn(obs.len(), k, |i, j| {
        let o = &obs[i];
        let post = o.post as u8 as f64;
        match j {
            0 => 1.0,
            1..=3 => (o.location == LOCATIONS[j - 1]) as u8 as f64,
            4 => post,
            _ => post * (o.location == LOCATIONS[j - 5]) as u8 as f64,
        }
    });
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let clusters = obs
        .iter()
        .map(|o| {
            let n = ids.len();
            *ids.entry(&o.port_id).or_insert(n)
        })
        .collect();
    (x, names, clusters)
}

/// PPML of traffic on the Post × location design, clustered by port.
pub fn ppml_trade(obs: &[TradeObservation], opts: PpmlOptions) -> Result<PpmlFit> {
    let (x, names, clusters) = trade_design(obs);
    let y: Vec<f64> = obs.iter().map(|o| o.traffic).collect();
    ppml(&x, &y, &clusters, names, opts)
}

/// OLS of transformed traffic (log1p, arcsinh, extensive ...) on the same
/// design, clustered by port.
pub fn ols_trade(obs: &[TradeObservation], transform: Transform) -> Result<LinearFit> {
    let mut keep = Vec::with_capacity(obs.len());
    let mut y = Vec::with_capacity(obs.len());
    for o in obs {
        if let Some(v) = transform_value(o.traffic, transform)? {
            keep.push(o.clone());
            y.push(v);
        }
    }
    let (x, names, clusters) = trade_design(&keep);
    ols_clustered(&x, &y, &clusters, names)
}
