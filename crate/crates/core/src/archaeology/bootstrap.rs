use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::panel::{arch_event_study, ActivityPanel, ArchTreatment, ProbabilityPanel};
use crate::error::{Error, Result};
use crate::estimators::EventStudyFit;

/// Keeps bootstrap draws off the Monte-Carlo streams when both use one seed.
const BOOTSTRAP_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
/// Fresh resamples tried for a draw before giving up.
const MAX_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub terms: Vec<String>,
    /// Estimates on the original panel.
    pub estimate: Vec<f64>,
    /// `draws[d][j]` is term `j` in draw `d`.
    pub draws: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub level: f64,
    /// Draws whose first resample made the estimator fail and were redrawn.
    pub redraws: usize,
}

impl BootstrapResult {
    pub fn n_boot(&self) -> usize {
        self.draws.len()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

struct Resampler<'a> {
    panel: &'a ActivityPanel,
    cells: Vec<Vec<u64>>,
}

impl Resampler<'_> {
    /// Resamples parishes (clusters) and Monte-Carlo replicates with
    /// replacement and averages the drawn replicates.
    fn draw<R: Rng>(&self, rng: &mut R) -> ProbabilityPanel {
        let p = self.panel;
        let n_p = p.n_parishes();
        let n_y = p.n_years();
        let n_b = p.replicates.n_replicates();
        let parishes: Vec<usize> = (0..n_p).map(|_| rng.gen_range(0..n_p)).collect();
        let mut mult = vec![0u32; n_b];
        for _ in 0..n_b {
            mult[rng.gen_range(0..n_b)] += 1;
        }
        // replicate b counts mult[b] times: Σ_k popcount(bits ∧ {b : mult[b] ≥ k})
        let max_mult = mult.iter().copied().max().unwrap_or(0);
        let words = n_b.div_ceil(64);
        let masks: Vec<Vec<u64>> = (1..=max_mult)
            .map(|k| {
                let mut m = vec![0u64; words];
                for (b, &c) in mult.iter().enumerate() {
                    if c >= k {
                        m[b / 64] |= 1 << (b % 64);
                    }
                }
                m
            })
            .collect();
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; n_p];
        let mut probability = Vec::with_capacity(n_p * n_y);
        let mut parish_ids = Vec::with_capacity(n_p);
        let mut unit_ids = Vec::with_capacity(n_p);
        let mut copies = vec![0usize; n_p];
        for &src in &parishes {
            let row = cache[src].get_or_insert_with(|| {
                (0..n_y)
                    .map(|y| {
                        let cell = &self.cells[src * n_y + y];
                        let hits: u32 = masks
                            .iter()
                            .map(|m| cell.iter().zip(m).map(|(a, b)| (a & b).count_ones()).sum::<u32>())
                            .sum();
                        p.prior_c * hits as f64 / n_b as f64
                    })
                    .collect()
            });
            probability.extend_from_slice(row);
            copies[src] += 1;
            parish_ids.push(p.parish_ids[src].clone());
            unit_ids.push(format!("{}#{}", p.parish_ids[src], copies[src]));
        }
        ProbabilityPanel {
            parish_ids,
            unit_ids,
            year_grid: p.year_grid.clone(),
            probability,
        }
    }
}

/// Cluster bootstrap over parishes and Monte-Carlo replicates.
///
/// `estimator` returns named coefficients; its output on the original panel
/// fixes the term list. Draw `d` uses its own ChaCha20 stream, so results are
/// identical for any thread count. A draw on which the estimator fails (for
/// example a resample with no treated parish) is redrawn from the same
/// stream.
pub fn clustered_bootstrap<F>(panel: &ActivityPanel, estimator: F, n_boot: usize, seed: u64) -> Result<BootstrapResult>
where
    F: Fn(&ProbabilityPanel) -> Result<Vec<(String, f64)>> + Sync,
{
    if n_boot < 2 {
        return Err(Error::Config(format!("bootstrap needs at least 2 draws, got {n_boot}")));
    }
    if panel.n_parishes() == 0 {
        return Err(Error::InvalidInput("bootstrap on an empty panel".into()));
    }
    let base = estimator(&panel.probabilities())?;
    let terms: Vec<String> = base.iter().map(|(t, _)| t.clone()).collect();
    let estimate: Vec<f64> = base.iter().map(|(_, v)| *v).collect();
    let resampler = Resampler {
        panel,
        cells: panel.replicates.cell_major(),
    };

    let results: Vec<(Vec<f64>, usize)> = (0..n_boot)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ BOOTSTRAP_SEED_SALT);
            rng.set_stream(d as u64);
            let mut last_err = None;
            for attempt in 0..MAX_ATTEMPTS {
                match estimator(&resampler.draw(&mut rng)) {
                    Ok(coefs) => {
                        if coefs.len() != terms.len() || coefs.iter().zip(&terms).any(|((a, _), b)| a != b) {
                            return Err(Error::Numerical(format!("bootstrap draw {d} returned a different term list")));
                        }
                        return Ok((coefs.into_iter().map(|(_, v)| v).collect(), attempt));
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            Err(Error::Numerical(format!(
                "bootstrap draw {d} failed {MAX_ATTEMPTS} times: {}",
                last_err.map(|e| e.to_string()).unwrap_or_default()
            )))
        })
        .collect::<Result<_>>()?;

    let redraws = results.iter().filter(|(_, a)| *a > 0).count();
    let draws: Vec<Vec<f64>> = results.into_iter().map(|(v, _)| v).collect();
    let level = 0.95;
    let mut se = Vec::with_capacity(terms.len());
    let mut ci_low = Vec::with_capacity(terms.len());
    let mut ci_high = Vec::with_capacity(terms.len());
    for j in 0..terms.len() {
        let mut col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        se.push(sample_sd(&col));
        col.sort_by(f64::total_cmp);
        ci_low.push(quantile(&col, (1.0 - level) / 2.0));
        ci_high.push(quantile(&col, (1.0 + level) / 2.0));
    }
    Ok(BootstrapResult {
        terms,
        estimate,
        draws,
        se,
        ci_low,
        ci_high,
        level,
        redraws,
    })
}

/// Archaeological event study with cluster-bootstrap standard errors for
/// every non-reference coefficient.
pub fn bootstrap_event_study(
    panel: &ActivityPanel,
    treatment: &ArchTreatment,
    reference_year: i32,
    n_boot: usize,
    seed: u64,
) -> Result<(EventStudyFit, BootstrapResult)> {
    let fit = arch_event_study(&panel.probabilities(), treatment, reference_year)?;
    let boot = clustered_bootstrap(
        panel,
        |pp| {
            let f = arch_event_study(pp, treatment, reference_year)?;
            Ok(f.estimated().map(|c| (c.term(), c.estimate)).collect())
        },
        n_boot,
        seed,
    )?;
    Ok((fit, boot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archaeology::panel::{default_year_grid, ReplicateTensor};

    fn full_panel(n_p: usize, n_b: usize) -> ActivityPanel {
        let grid = default_year_grid();
        let mut t = ReplicateTensor::zeros(n_b, n_p, grid.len());
        for b in 0..n_b {
            for p in 0..n_p {
                for y in 0..grid.len() {
                    t.set(b, p, y, true);
                }
            }
        }
        let ids = (0..n_p).map(|i| format!("p{i}")).collect();
        ActivityPanel::from_replicates(ids, grid, 25, 1.0, t).unwrap()
    }

    fn mean_estimator(pp: &ProbabilityPanel) -> Result<Vec<(String, f64)>> {
        let n = pp.n_units() as f64;
        Ok(vec![("mean".into(), (0..pp.n_units()).map(|u| pp.get(u, 0)).sum::<f64>() / n)])
    }

    #[test]
    fn constant_outcome_has_zero_se() {
        let r = clustered_bootstrap(&full_panel(5, 10), mean_estimator, 20, 7).unwrap();
        assert_eq!(r.n_boot(), 20);
        assert_eq!(r.se[0], 0.0);
        assert!(r.draws.iter().all(|d| d[0] == 1.0));
    }

    #[test]
    fn too_few_draws() {
        assert!(clustered_bootstrap(&full_panel(3, 4), mean_estimator, 1, 0).is_err());
    }

    #[test]
    fn weighted_counts_match_direct_resample() {
        let grid = default_year_grid();
        let mut t = ReplicateTensor::zeros(130, 4, grid.len());
        for b in 0..130 {
            for p in 0..4 {
                for y in 0..grid.len() {
                    t.set(b, p, y, (b * 7 + p * 3 + y) % 5 < 2);
                }
            }
        }
        let ids = (0..4).map(|i| format!("p{i}")).collect();
        let panel = ActivityPanel::from_replicates(ids, grid, 25, 0.5, t).unwrap();
        let rs = Resampler {
            panel: &panel,
            cells: panel.replicates.cell_major(),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let drawn = rs.draw(&mut rng);

        // replay the same random sequence naively
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let parishes: Vec<usize> = (0..4).map(|_| rng.gen_range(0..4)).collect();
        let reps: Vec<usize> = (0..130).map(|_| rng.gen_range(0..130)).collect();
        for (u, &src) in parishes.iter().enumerate() {
            for y in 0..panel.n_years() {
                let hits = reps.iter().filter(|&&b| panel.replicates.get(b, src, y)).count();
                assert_eq!(drawn.get(u, y), 0.5 * hits as f64 / 130.0);
            }
        }
        assert_eq!(drawn.unit_ids.len(), 4);
    }
}
