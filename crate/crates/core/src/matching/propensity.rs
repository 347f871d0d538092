use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::spd_inverse;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingParams {
    pub max_depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// Row share drawn without replacement for each tree.
    pub subsample: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass in each child.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            max_depth: 3,
            rounds: 200,
            learning_rate: 0.1,
            subsample: 1.0,
            lambda: 1.0,
            min_child_weight: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] < *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedTrees {
    pub base_score: f64,
    pub learning_rate: f64,
    trees: Vec<Node>,
    /// Mean training log-loss after each round; entry 0 is the base score.
    pub loss_history: Vec<f64>,
}

impl BoostedTrees {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityKind {
    Boosted(BoostedTrees),
    Logistic(LogisticModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub features: Vec<String>,
    pub kind: PropensityKind,
}

impl PropensityModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let margin = match &self.kind {
            PropensityKind::Boosted(b) => b.margin(x),
            PropensityKind::Logistic(l) => {
                l.intercept + l.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
        };
        sigmoid(margin)
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of margins against labels.
pub fn log_loss(margins: &[f64], y: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| {
            // log(1 + e^m) − t·m, computed stably
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - if t { m } else { 0.0 }
        })
        .sum();
    total / margins.len() as f64
}

fn check_inputs(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    let k = x.first().map_or(0, |r| r.len());
    if k == 0 {
        return Err(Error::InvalidInput("no features left for the propensity model".into()));
    }
    if x.iter().any(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("ragged or non-finite feature matrix".into()));
    }
    let n_treated = y.iter().filter(|t| **t).count();
    if n_treated == 0 || n_treated == y.len() {
        return Err(Error::InvalidInput("propensity labels contain a single class".into()));
    }
    Ok(k)
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a BoostingParams,
}

impl TreeBuilder<'_> {
    fn leaf_weight(&self, gs: f64, hs: f64) -> f64 {
        -gs / (hs + self.params.lambda)
    }

    fn score(&self, gs: f64, hs: f64) -> f64 {
        gs * gs / (hs + self.params.lambda)
    }

    fn best_split(&self, rows: &[usize], gs: f64, hs: f64) -> Option<SplitCandidate> {
        let k = self.x[0].len();
        let parent = self.score(gs, hs);
        let per_feature: Vec<Option<SplitCandidate>> = (0..k)
            .into_par_iter()
            .map(|f| {
                let mut order = rows.to_vec();
                order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
                let mut gl = 0.0;
                let mut hl = 0.0;
                let mut best: Option<SplitCandidate> = None;
                for w in 0..order.len() - 1 {
                    let i = order[w];
                    gl += self.g[i];
                    hl += self.h[i];
                    let (v, next) = (self.x[i][f], self.x[order[w + 1]][f]);
                    if v == next {
                        continue;
                    }
                    let (gr, hr) = (gs - gl, hs - hl);
                    if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                        continue;
                    }
                    let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                    if best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            gain,
                            feature: f,
                            threshold: v + (next - v) / 2.0,
                        });
                    }
                }
                best
            })
            .collect();
        // first feature wins ties, independent of scheduling
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<SplitCandidate>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
            .filter(|c| c.gain > 1e-12)
    }

    fn build(&self, rows: &[usize], depth: usize) -> Node {
        let gs: f64 = rows.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = rows.iter().map(|&i| self.h[i]).sum();
        if depth >= self.params.max_depth || rows.len() < 2 {
            return Node::Leaf(self.leaf_weight(gs, hs));
        }
        match self.best_split(rows, gs, hs) {
            None => Node::Leaf(self.leaf_weight(gs, hs)),
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][c.feature] < c.threshold);
                Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: Box::new(self.build(&l, depth + 1)),
                    right: Box::new(self.build(&r, depth + 1)),
                }
            }
        }
    }
}

/// Gradient-boosted regression trees on the logistic loss, with exact
/// (sorted, all-threshold) split search and second-order leaf values.
pub fn fit_boosted(x: &[Vec<f64>], y: &[bool], params: &BoostingParams) -> Result<BoostedTrees> {
    check_inputs(x, y)?;
    if params.max_depth == 0 || !(params.learning_rate > 0.0) || !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::Config("boosting needs depth ≥ 1, learning rate > 0, subsample in (0, 1]".into()));
    }
    let n = x.len();
    let rate = y.iter().filter(|t| **t).count() as f64 / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut loss_history = vec![log_loss(&margins, y)];
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    for _ in 0..params.rounds {
        let p: Vec<f64> = margins.iter().map(|m| sigmoid(*m)).collect();
        let g: Vec<f64> = p.iter().zip(y).map(|(p, &t)| p - if t { 1.0 } else { 0.0 }).collect();
        let h: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
        let mut rows: Vec<usize> = if n_sub == n {
            (0..n).collect()
        } else {
            sample(&mut rng, n, n_sub).into_vec()
        };
        rows.sort_unstable();
        let tree = TreeBuilder {
            x,
            g: &g,
            h: &h,
            params,
        }
        .build(&rows, 0);
        for (m, xi) in margins.iter_mut().zip(x) {
            *m += params.learning_rate * tree.predict(xi);
        }
        trees.push(tree);
        loss_history.push(log_loss(&margins, y));
    }
    Ok(BoostedTrees {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        loss_history,
    })
}

/// Logistic regression by Newton's method with a small ridge penalty that
/// keeps separable data finite.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], ridge: f64) -> Result<LogisticModel> {
    let k = check_inputs(x, y)?;
    let n = x.len();
    let design = nalgebra::DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = nalgebra::DVector::from_fn(n, |i, _| if y[i] { 1.0 } else { 0.0 });
    let mut beta = nalgebra::DVector::zeros(k + 1);
    for _ in 0..100 {
        let eta = &design * &beta;
        let p = eta.map(sigmoid);
        let w = p.map(|v| (v * (1.0 - v)).max(1e-12));
        let mut grad = design.tr_mul(&(&target - &p));
        let mut hess = design.tr_mul(&nalgebra::DMatrix::from_fn(n, k + 1, |i, j| design[(i, j)] * w[i]));
        for j in 1..=k {
            grad[j] -= ridge * beta[j];
            hess[(j, j)] += ridge;
        }
        let step = spd_inverse(&hess, "logistic propensity Hessian")? * grad;
        beta += &step;
        if step.amax() < 1e-10 {
            return Ok(LogisticModel {
                intercept: beta[0],
                coefficients: beta.iter().skip(1).copied().collect(),
            });
        }
    }
    Err(Error::NotConverged { iterations: 100 })
}

/// Ranking AUC: share of treated-control pairs ordered correctly, ties ½.
pub fn auc(scores: &[f64], y: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    let n1 = y.iter().filter(|t| **t).count() as f64;
    let n0 = y.len() as f64 - n1;
    let rank_sum: f64 = ranks.iter().zip(y).filter(|(_, t)| **t).map(|(r, _)| r).sum();
    (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, ((i * 7) % 11) as f64]).collect();
        let y = (0..40).map(|i| i >= 25).collect();
        (x, y)
    }

    #[test]
    fn separating_feature_ranks_perfectly() {
        let (x, y) = separable();
        let m = fit_boosted(&x, &y, &BoostingParams::default()).unwrap();
        let model = PropensityModel {
            features: vec!["a".into(), "b".into()],
            kind: PropensityKind::Boosted(m.clone()),
        };
        let s = model.predict_all(&x);
        assert_eq!(auc(&s, &y), 1.0);
        assert!(s.iter().all(|p| *p > 0.0 && *p < 1.0));
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn constant_features_give_base_rate() {
        let x = vec![vec![0.3]; 10];
        let y: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let m = fit_boosted(&x, &y, &BoostingParams::default()).unwrap();
        let model = PropensityModel {
            features: vec!["a".into()],
            kind: PropensityKind::Boosted(m),
        };
        // the λ-penalised leaves shrink toward the base score, not away from it
        assert!((model.predict(&[0.3]) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.1], vec![0.2]];
        assert!(fit_boosted(&x, &[true, true], &BoostingParams::default()).is_err());
        assert!(fit_logistic(&x, &[false, false], 1e-6).is_err());
        assert!(fit_boosted(&[vec![], vec![]], &[true, false], &BoostingParams::default()).is_err());
    }

    #[test]
    fn logistic_fallback_ranks() {
        let (x, y) = separable();
        let m = fit_logistic(&x, &y, 1e-3).unwrap();
        let model = PropensityModel {
            features: vec!["a".into(), "b".into()],
            kind: PropensityKind::Logistic(m),
        };
        assert_eq!(auc(&model.predict_all(&x), &y), 1.0);
    }

    #[test]
    fn auc_handles_ties() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]), 0.5);
        assert_eq!(auc(&[0.1, 0.9, 0.4], &[false, true, false]), 1.0);
    }
}
