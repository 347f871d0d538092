//! Subcommand implementations. Every command reads what it needs from the
//! run configuration and writes its outputs into the output directory, each
//! file starting with the config-hash/seed header.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use firstnature::archaeology::{
    bootstrap_event_study, filter_findings, monte_carlo_panel, read_findings, resolve_parishes, write_tensor,
    ActivityConfig, ArchTreatment, PERIOD_END, PERIOD_START,
};
use firstnature::estimators::{
    ape_share, ols_trade, ppml_trade, three_region_event_study, twfe_event_study, EventStudyFit, EventStudySpec,
    PpmlOptions, Transform, OCCUPATION_SUITE_TESTS,
};
use firstnature::geo::{build_cost_surface, cost_distance, read_geojson, CostSurface, Point, Polygon};
use firstnature::io::fmt_num;
use firstnature::market_access::{
    compute_market_access, eligible_ports, read_parishes, read_ports, write_parishes, MarketAccessTable, ParishSite,
    PortRegistry, Region, RegionClassifier,
};
use firstnature::matching::{match_parishes, read_matches, read_soil, write_matches, MatchingOptions, MatchingOutcome};
use firstnature::paneldata::{
    aggregate_census, attach_treatment, build_trade_panel, event_panel, port_observation_counts, read_attributes,
    read_census, read_counties, read_sound_toll, read_trade_locations, treated_means, write_panel_csv, CensusConfig,
    OccupationGroup, Outcome, PanelObservation, TreatmentKind,
};
use firstnature::{Error, Result};
use log::{info, warn};

use crate::config::{ArchTreatmentKind, RunConfig};
use crate::plot::{write_event_plot, Series};
use crate::report::{bootstrap_rows, event_rows, linear_rows, ppml_rows, write_coefficients, write_table, CoefRow};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Ctx { cfg, out })
    }

    fn header(&self) -> String {
        self.cfg.header()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn forced_land(&self) -> Result<Vec<Polygon>> {
        match self.cfg.path("forced_land") {
            None => Ok(Vec::new()),
            Some(p) => Ok(read_geojson(p)?
                .iter()
                .flat_map(|f| f.geometry.polygons().to_vec())
                .collect()),
        }
    }

    fn surface(&self, alpha: f64) -> Result<CostSurface> {
        build_cost_surface(self.cfg.require("raster")?, alpha, &self.forced_land()?, self.cfg.km_per_map_unit)
    }

    fn lines(&self, name: &str) -> Result<Option<Vec<Vec<Point>>>> {
        match self.cfg.path(name) {
            None => Ok(None),
            Some(p) => Ok(Some(read_geojson(p)?.iter().flat_map(|f| f.geometry.as_lines()).collect())),
        }
    }

    /// Parishes with regions; missing regions are classified from the fjord
    /// and coast geometries.
    fn parishes(&self) -> Result<Vec<ParishSite>> {
        let mut parishes = read_parishes(self.cfg.require("parishes")?)?;
        if parishes.iter().any(|p| p.region.is_none()) {
            let (Some(fjord), Some(coast)) = (self.lines("fjord")?, self.lines("coast")?) else {
                return Err(Error::Config(
                    "parishes without a region need paths.fjord and paths.coast for classification".into(),
                ));
            };
            let classifier =
                RegionClassifier::new(fjord, coast, self.cfg.divider, self.cfg.buffer_km, self.cfg.projection)?;
            for p in parishes.iter_mut().filter(|p| p.region.is_none()) {
                p.region = Some(classifier.classify(p.centroid));
            }
        }
        Ok(parishes)
    }

    fn registry(&self) -> Result<PortRegistry> {
        let mut ports = read_ports(self.cfg.require("ports")?)?;
        if let Some(st) = self.cfg.path("sound_toll") {
            let counts = port_observation_counts(&read_sound_toll(st)?);
            let before = ports.len();
            ports = eligible_ports(ports, &counts, self.cfg.min_port_observations);
            if ports.len() < before {
                info!("{} ports below {} register observations dropped", before - ports.len(), self.cfg.min_port_observations);
            }
        }
        PortRegistry::new(ports)
    }

    fn market_access(&self, parishes: &[ParishSite], theta: f64, alpha: f64) -> Result<MarketAccessTable> {
        compute_market_access(parishes, &self.registry()?, theta, &self.surface(alpha)?)
    }

    fn census_rows(&self, parishes: &[ParishSite], dlma: &HashMap<String, f64>) -> Result<(Vec<PanelObservation>, CensusConfig)> {
        let cc = CensusConfig {
            years: self.cfg.census_years.clone(),
            ..Default::default()
        };
        let counties = match self.cfg.path("counties") {
            Some(p) => read_counties(p)?,
            None => HashMap::new(),
        };
        let ids: Vec<String> = parishes.iter().map(|p| p.id.clone()).collect();
        let panel = aggregate_census(read_census(self.cfg.require("census")?)?, &ids, &counties, &cc)?;
        let mut rows = panel.rows;
        attach_treatment(&mut rows, &regions(parishes), dlma);
        Ok((rows, cc))
    }
}

fn regions(parishes: &[ParishSite]) -> HashMap<String, Region> {
    parishes.iter().filter_map(|p| p.region.map(|r| (p.id.clone(), r))).collect()
}

fn spec_for(cfg: &RunConfig, transform: Transform, reference_year: i32, years: Vec<i32>, m: Option<usize>) -> EventStudySpec {
    let _ = cfg;
    EventStudySpec {
        transform,
        reference_year,
        event_years: years,
        bonferroni_m: m,
    }
}

fn series_of(fit: &EventStudyFit, group: &str, label: &str) -> Series {
    Series {
        label: label.to_string(),
        points: fit
            .coefficients
            .iter()
            .filter(|c| c.group == group)
            .map(|c| (c.year, c.estimate, c.se))
            .collect(),
    }
}

/// Runs one event study; three-region treatment yields one fit per region.
fn run_event_study(
    rows: &[PanelObservation],
    outcome: &Outcome,
    treatment: TreatmentKind,
    spec: &EventStudySpec,
) -> Result<Vec<(String, EventStudyFit)>> {
    let panel = event_panel(rows, outcome, treatment)?;
    match treatment {
        TreatmentKind::ThreeRegion => Ok(three_region_event_study(&panel, spec)?.into_iter().collect()),
        _ => Ok(vec![("affected".to_string(), twfe_event_study(&panel, spec)?)]),
    }
}

fn treatment_name(t: TreatmentKind) -> &'static str {
    match t {
        TreatmentKind::Dummy => "dummy",
        TreatmentKind::MarketAccess => "ma",
        TreatmentKind::ThreeRegion => "three_region",
    }
}

pub fn cmd_costdist(ctx: &Ctx, only_port: Option<&str>, source: Option<Point>) -> Result<()> {
    let surface = ctx.surface(ctx.cfg.alpha)?;
    let header = ctx.header();
    if let Some(pt) = source {
        let cell = surface.snap(pt)?;
        cost_distance(&surface, cell)?.write_csv(ctx.out("costdist_source.csv"), Some(&header))?;
        println!("costdist_source.csv");
        return Ok(());
    }
    let ports = read_ports(ctx.cfg.require("ports")?)?;
    let mut written = 0;
    for port in ports.iter().filter(|p| only_port.is_none_or(|id| id == p.id)) {
        match surface.snap_port(port.location)? {
            Some(cell) => {
                let name = format!("costdist_{}.csv", port.id);
                cost_distance(&surface, cell)?.write_csv(ctx.out(&name), Some(&header))?;
                written += 1;
            }
            None => warn!("port {} has no navigable cell nearby; skipped", port.id),
        }
    }
    if written == 0 {
        return Err(Error::InvalidInput("no distance field written".into()));
    }
    println!("{written} distance fields written");
    Ok(())
}

pub fn cmd_ma(ctx: &Ctx) -> Result<MarketAccessTable> {
    let parishes = ctx.parishes()?;
    write_parishes(ctx.out("parishes_regions.csv"), Some(&ctx.header()), &parishes)?;
    let table = ctx.market_access(&parishes, ctx.cfg.theta, ctx.cfg.alpha)?;
    table.write_csv(ctx.out("market_access.csv"), Some(&ctx.header()))?;
    let d: Vec<f64> = table.records.iter().map(|r| r.delta_log_ma).collect();
    let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
    let max = d.iter().copied().fold(0.0, f64::max);
    println!(
        "market access: {} parishes ({} excluded), mean dlogMA {mean:.4}, max {max:.4}",
        table.records.len(),
        table.excluded.len()
    );
    Ok(table)
}

pub fn cmd_eventstudy(ctx: &Ctx) -> Result<Vec<CoefRow>> {
    let cfg = &ctx.cfg;
    let parishes = ctx.parishes()?;
    let dlma = if cfg.treatment == TreatmentKind::MarketAccess {
        ctx.market_access(&parishes, cfg.theta, cfg.alpha)?.by_parish()
    } else {
        HashMap::new()
    };
    let (rows, cc) = ctx.census_rows(&parishes, &dlma)?;
    write_panel_csv(ctx.out("panel.csv"), Some(&ctx.header()), &rows, &cc)?;
    let spec = spec_for(cfg, cfg.transform, cfg.reference_year, cfg.census_years.clone(), cfg.bonferroni_m);
    let spec_id = format!("{}_{}_{}", cfg.outcome, cfg.transform.as_str(), treatment_name(cfg.treatment));
    let fits = run_event_study(&rows, &cfg.outcome, cfg.treatment, &spec)?;
    let mut out = Vec::new();
    let mut series = Vec::new();
    for (group, fit) in &fits {
        out.extend(event_rows(&spec_id, &fit.subset(group)));
        series.push(series_of(fit, group, group));
    }
    write_coefficients(&ctx.out("coefficients.csv"), &ctx.header(), &out)?;
    write_event_plot(&ctx.out("eventstudy.svg"), &spec_id, &series)?;
    for r in out.iter().filter(|r| r.term.starts_with("1901")) {
        println!("{} {}: {:.4} (se {:.4})", r.spec_id, r.term, r.estimate, r.se);
    }
    Ok(out)
}

pub fn cmd_ppml(ctx: &Ctx) -> Result<Vec<CoefRow>> {
    let records = read_sound_toll(ctx.cfg.require("sound_toll")?)?;
    let locations = match ctx.cfg.path("trade_locations") {
        Some(p) => read_trade_locations(p)?,
        None => HashMap::new(),
    };
    let obs = build_trade_panel(&records, &locations, &ctx.cfg.trade)?;
    let fit = ppml_trade(&obs, PpmlOptions::default())?;
    if !fit.converged {
        return Err(Error::NotConverged { iterations: fit.iterations });
    }
    let mut rows = ppml_rows("trade_ppml", &fit);
    for t in [Transform::Log1p, Transform::Arcsinh, Transform::Extensive] {
        match ols_trade(&obs, t) {
            Ok(f) => rows.extend(linear_rows(&format!("trade_ols_{}", t.as_str()), &f)),
            Err(e) => warn!("trade OLS with {} transform failed: {e}", t.as_str()),
        }
    }
    write_coefficients(&ctx.out("coefficients_trade.csv"), &ctx.header(), &rows)?;
    for r in rows.iter().filter(|r| r.spec_id == "trade_ppml" && r.term.starts_with("post_x")) {
        println!("ppml {}: {:.4} (se {:.4})", r.term, r.estimate, r.se);
    }
    Ok(rows)
}

pub fn cmd_match(ctx: &Ctx) -> Result<MatchingOutcome> {
    let cfg = &ctx.cfg;
    let table = read_soil(cfg.require("soil")?)?;
    let parishes = ctx.parishes()?;
    let opts = MatchingOptions {
        model: cfg.matching.model,
        boosting: cfg.matching.boosting.clone(),
        include_limfjord_controls: cfg.matching.include_limfjord_controls,
        min_prevalence: cfg.matching.min_prevalence,
        seed: cfg.seed,
        ..Default::default()
    };
    let outcome = match_parishes(&table, &regions(&parishes), &opts)?;
    let header = ctx.header();
    write_matches(ctx.out("matches.csv"), Some(&header), &outcome.result)?;
    let mut scores: Vec<Vec<String>> = outcome
        .treated
        .iter()
        .map(|c| (c, 1))
        .chain(outcome.controls.iter().map(|c| (c, 0)))
        .map(|(c, t)| vec![c.id.clone(), t.to_string(), fmt_num(c.score)])
        .collect();
    scores.sort();
    write_table(&ctx.out("propensity.csv"), &header, &["parish_id", "treated", "score"], &scores)?;
    let b = &outcome.balance;
    let stat = |stage: &str, group: &str, s: &firstnature::matching::GroupStats, smd: f64| {
        vec![stage.into(), group.into(), s.n.to_string(), fmt_num(s.mean), fmt_num(s.sd), fmt_num(smd)]
    };
    write_table(
        &ctx.out("balance.csv"),
        &header,
        &["stage", "group", "n", "mean", "sd", "smd"],
        &[
            stat("before", "treated", &b.treated_before, b.smd_before),
            stat("before", "control", &b.control_before, b.smd_before),
            stat("after", "treated", &b.treated_after, b.smd_after),
            stat("after", "control", &b.control_after, b.smd_after),
        ],
    )?;
    println!(
        "matched {} pairs ({} unmatched); SMD {:.3} -> {:.3}",
        outcome.result.pairs.len(),
        outcome.result.unmatched.len(),
        b.smd_before,
        b.smd_after
    );
    Ok(outcome)
}

/// Archaeological activity panel and event study. `matched` overrides the
/// sample with an in-memory matching result.
pub fn cmd_arch(ctx: &Ctx, matched: Option<&[String]>) -> Result<Vec<CoefRow>> {
    let cfg = &ctx.cfg;
    let a = &cfg.arch;
    let parishes = ctx.parishes()?;
    let region = regions(&parishes);
    let polygons = read_geojson(cfg.require("parish_polygons")?)?;
    let raw = read_findings(cfg.require("findings")?)?;
    let findings = filter_findings(&resolve_parishes(&raw, &polygons, a.dating_model)?, a.kind, PERIOD_START, PERIOD_END);

    let from_file;
    let matched: Option<Vec<String>> = match matched {
        Some(m) => Some(m.to_vec()),
        None if a.matched_sample => match cfg.path("matches") {
            Some(p) => {
                from_file = read_matches(p)?;
                Some(from_file.iter().flat_map(|m| [m.treated_id.clone(), m.control_id.clone()]).collect())
            }
            None => None,
        },
        None => None,
    };

    let (ids, treatment) = match a.treatment {
        ArchTreatmentKind::Dummy => {
            let ids: Vec<String> = match matched {
                Some(m) => m,
                None => parishes
                    .iter()
                    .filter(|p| matches!(p.region, Some(Region::West) | Some(Region::Reference)))
                    .map(|p| p.id.clone())
                    .collect(),
            };
            let t = ids
                .iter()
                .map(|id| (id.clone(), f64::from(u8::from(region.get(id) == Some(&Region::West)))))
                .collect();
            (ids, ArchTreatment::Dummy(t))
        }
        ArchTreatmentKind::MarketAccess => {
            let dlma = ctx.market_access(&parishes, cfg.theta, cfg.alpha)?.by_parish();
            let keep: Option<BTreeSet<String>> = matched.map(|m| m.into_iter().collect());
            let ids: Vec<String> = parishes
                .iter()
                .map(|p| p.id.clone())
                .filter(|id| dlma.contains_key(id) && keep.as_ref().is_none_or(|k| k.contains(id)))
                .collect();
            (ids, ArchTreatment::MarketAccessLoss(dlma))
        }
    };
    let mut ids = ids;
    ids.sort();
    ids.dedup();

    let acfg = ActivityConfig {
        window_halfwidth: a.window,
        replicates: a.replicates,
        prior_c: a.prior_c,
        seed: cfg.seed,
        ..Default::default()
    };
    let panel = monte_carlo_panel(&findings, &ids, &acfg)?;
    let header = ctx.header();
    panel.write_csv(ctx.out("activity_panel.csv"), Some(&header))?;
    write_tensor(ctx.out("replicates.apsa"), &panel.replicates)?;

    let (fit, boot) = bootstrap_event_study(&panel, &treatment, a.reference_year, a.n_boot, cfg.seed)?;
    let spec_id = format!(
        "arch_{}_{}",
        a.kind,
        match a.treatment {
            ArchTreatmentKind::Dummy => "dummy",
            ArchTreatmentKind::MarketAccess => "ma",
        }
    );
    let rows = bootstrap_rows(&spec_id, &fit, &boot);
    write_coefficients(&ctx.out("arch_coefficients.csv"), &header, &rows)?;
    let boot_rows: Vec<Vec<String>> = (0..boot.terms.len())
        .map(|j| {
            vec![
                boot.terms[j].clone(),
                fmt_num(boot.estimate[j]),
                fmt_num(boot.se[j]),
                fmt_num(boot.ci_low[j]),
                fmt_num(boot.ci_high[j]),
            ]
        })
        .collect();
    write_table(&ctx.out("arch_bootstrap.csv"), &header, &["term", "estimate", "se", "ci_low", "ci_high"], &boot_rows)?;
    let series = Series {
        label: "affected".into(),
        points: rows
            .iter()
            .zip(&fit.coefficients)
            .map(|(r, c)| (c.year, r.estimate, r.se))
            .collect(),
    };
    write_event_plot(&ctx.out("arch.svg"), &spec_id, &[series])?;
    println!(
        "activity panel: {} parishes, {} findings, B={}, {} bootstrap draws ({} redrawn)",
        ids.len(),
        findings.len(),
        a.replicates,
        boot.n_boot(),
        boot.redraws
    );
    Ok(rows)
}

/// Event studies over the census panel: population under each treatment,
/// the occupation suite, fertility and migration, plus APE shares.
fn census_suite(ctx: &Ctx, rows: &[PanelObservation]) -> Result<Vec<CoefRow>> {
    let cfg = &ctx.cfg;
    let years = cfg.census_years.clone();
    let mut out = Vec::new();
    let mut plots = Vec::new();
    let base = spec_for(cfg, Transform::Log, cfg.reference_year, years.clone(), None);
    for t in [TreatmentKind::Dummy, TreatmentKind::MarketAccess, TreatmentKind::ThreeRegion] {
        let id = format!("population_log_{}", treatment_name(t));
        match run_event_study(rows, &Outcome::Population, t, &base) {
            Ok(fits) => {
                for (g, f) in &fits {
                    out.extend(event_rows(&id, &f.subset(g)));
                    plots.push(series_of(f, g, &format!("{id}:{g}")));
                }
            }
            Err(e) if e.is_numerical() => warn!("{id}: {e}"),
            Err(e) => return Err(e),
        }
    }
    write_event_plot(&ctx.out("eventstudy.svg"), "population (log)", &plots[..plots.len().min(1)])?;
    if plots.len() > 2 {
        write_event_plot(&ctx.out("eventstudy_regions.svg"), "population (log), three regions", &plots[2..])?;
    }

    let mut ape = Vec::new();
    for g in OccupationGroup::ALL {
        let outcome = Outcome::Occupation(g);
        for t in Transform::OCCUPATION_SUITE {
            let spec = spec_for(cfg, t, cfg.reference_year, years.clone(), Some(OCCUPATION_SUITE_TESTS));
            let id = format!("{}_{}_dummy", outcome, t.as_str());
            match run_event_study(rows, &outcome, TreatmentKind::Dummy, &spec) {
                Ok(fits) => {
                    let fit = &fits[0].1;
                    out.extend(event_rows(&id, fit));
                    if t == Transform::Log1p {
                        let last = *years.iter().max().unwrap_or(&cfg.reference_year);
                        if let (Some(b), Some((occ, pop))) = (fit.beta("affected", last), treated_means(rows, &outcome, last)) {
                            let share = ape_share(b, occ, pop).unwrap_or(f64::NAN);
                            ape.push(vec![g.column(), last.to_string(), fmt_num(b), fmt_num(occ), fmt_num(pop), fmt_num(share)]);
                        }
                    }
                }
                Err(e) => warn!("{id}: {e}"),
            }
        }
    }
    write_table(
        &ctx.out("ape_shares.csv"),
        &ctx.header(),
        &["group", "year", "beta", "mean_occ_treated", "mean_pop_treated", "ape_share"],
        &ape,
    )?;

    let cwr = spec_for(cfg, Transform::Identity, cfg.reference_year, years.clone(), None);
    match run_event_study(rows, &Outcome::ChildWomenRatio, TreatmentKind::Dummy, &cwr) {
        Ok(f) => out.extend(event_rows("child_women_ratio_identity_dummy", &f[0].1)),
        Err(e) => warn!("child-women ratio: {e}"),
    }
    // migrant shares exist only from the first migration year on
    let mig_years: Vec<i32> = years
        .iter()
        .copied()
        .filter(|y| rows.iter().any(|r| r.year == *y && r.migrant_share.is_some()))
        .collect();
    if let Some(&first) = mig_years.first() {
        let spec = spec_for(cfg, Transform::Identity, first, mig_years.clone(), None);
        match run_event_study(rows, &Outcome::MigrantShare, TreatmentKind::Dummy, &spec) {
            Ok(f) => out.extend(event_rows("migrant_share_identity_dummy", &f[0].1)),
            Err(e) => warn!("migrant share: {e}"),
        }
    }
    Ok(out)
}

fn standardize(m: &HashMap<String, f64>) -> HashMap<String, f64> {
    let n = m.len() as f64;
    let mean = m.values().sum::<f64>() / n;
    let sd = (m.values().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    m.iter()
        .map(|(k, v)| (k.clone(), if sd > 0.0 { (v - mean) / sd } else { 0.0 }))
        .collect()
}

/// Re-estimates the market-access event study over θ × α × control
/// subgroup with ΔlogMA standardised to zero mean and unit variance.
fn multiverse(ctx: &Ctx, parishes: &[ParishSite], rows: &[PanelObservation]) -> Result<()> {
    let cfg = &ctx.cfg;
    let attrs = match cfg.path("attributes") {
        Some(p) => read_attributes(p)?,
        None => HashMap::new(),
    };
    let region = regions(parishes);
    let last = *cfg.census_years.iter().max().unwrap_or(&cfg.reference_year);
    let spec = spec_for(cfg, cfg.multiverse_transform, cfg.reference_year, cfg.census_years.clone(), None);
    let registry = ctx.registry()?;
    let mut table = Vec::new();
    for &alpha in &cfg.alpha_grid {
        let surface = ctx.surface(alpha)?;
        for &theta in &cfg.theta_grid {
            let ma = compute_market_access(parishes, &registry, theta, &surface)?;
            let z = standardize(&ma.by_parish());
            let mut rows_z = rows.to_vec();
            for r in &mut rows_z {
                r.delta_log_ma = z.get(&r.parish_id).copied();
            }
            for sub in &cfg.control_subgroups {
                let keep = |r: &PanelObservation| {
                    region.get(&r.parish_id).is_some_and(|g| g.is_limfjord()) || sub.keeps(attrs.get(&r.parish_id))
                };
                let sample: Vec<PanelObservation> = rows_z.iter().filter(|r| keep(r)).cloned().collect();
                let res = run_event_study(&sample, &cfg.multiverse_outcome, TreatmentKind::MarketAccess, &spec);
                let mut row = vec![fmt_num(theta), fmt_num(alpha), sub.to_string()];
                match res {
                    Ok(f) => {
                        let c = f[0].1.coefficient("affected", last).cloned();
                        let (b, se, p) = c.map_or((f64::NAN, f64::NAN, f64::NAN), |c| (c.estimate, c.se, c.p));
                        row.extend([
                            last.to_string(),
                            fmt_num(b),
                            fmt_num(se),
                            fmt_num(p),
                            f[0].1.n_obs.to_string(),
                            f[0].1.n_clusters.to_string(),
                            "ok".into(),
                        ]);
                    }
                    Err(e) => {
                        warn!("multiverse theta={theta} alpha={alpha} {sub}: {e}");
                        row.extend([last.to_string(), "NA".into(), "NA".into(), "NA".into(), "0".into(), "0".into(), "failed".into()]);
                    }
                }
                table.push(row);
            }
        }
    }
    write_table(
        &ctx.out("multiverse.csv"),
        &ctx.header(),
        &["theta", "alpha", "control_subgroup", "year", "estimate", "se", "p", "n_obs", "n_clusters", "status"],
        &table,
    )?;
    println!("multiverse: {} specifications", table.len());
    Ok(())
}

/// Full chain: market access, census panel and event studies, trade PPML,
/// matching and the archaeological event study, as far as inputs allow.
pub fn cmd_pipeline(ctx: &Ctx, run_multiverse: bool) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut coefs = Vec::new();
    let table = cmd_ma(ctx)?;
    let parishes = ctx.parishes()?;
    let (rows, cc) = ctx.census_rows(&parishes, &table.by_parish())?;
    write_panel_csv(ctx.out("panel.csv"), Some(&ctx.header()), &rows, &cc)?;
    coefs.extend(census_suite(ctx, &rows)?);
    if cfg.path("sound_toll").is_some() {
        coefs.extend(cmd_ppml(ctx)?);
    }
    let matched = if cfg.path("soil").is_some() {
        Some(cmd_match(ctx)?.result.matched_ids())
    } else {
        None
    };
    if cfg.path("findings").is_some() && cfg.path("parish_polygons").is_some() {
        let sample = matched.as_deref().filter(|_| cfg.arch.matched_sample);
        coefs.extend(cmd_arch(ctx, sample)?);
    }
    write_coefficients(&ctx.out("coefficients.csv"), &ctx.header(), &coefs)?;
    if run_multiverse {
        multiverse(ctx, &parishes, &rows)?;
    }
    for r in coefs.iter().filter(|r| r.spec_id == "population_log_dummy" && r.term.starts_with("1901")) {
        println!("population 1901 x affected: {:.4} (se {:.4})", r.estimate, r.se);
    }
    Ok(())
}

/// Generates a synthetic world and a ready-to-run config next to it.
pub fn cmd_synth(dir: &Path, params: &firstnature::synth::SynthParams, header: &str) -> Result<()> {
    let world = firstnature::synth::generate_synthetic_world(params)?;
    world.write(dir, Some(header))?;
    let p = &world.params;
    let config = format!(
        "# synthetic world, seed {seed}\n\
         [run]\nseed = {seed}\n\n\
         [paths]\nraster = raster.asc\nraster_closed = raster_closed.asc\nparishes = parishes.csv\n\
         parish_polygons = parishes.geojson\nports = ports.csv\ncensus = census.csv\ncounties = counties.csv\n\
         sound_toll = sound_toll.csv\ntrade_locations = trade_locations.csv\nfindings = findings.csv\n\
         soil = soil.csv\nattributes = parish_attributes.csv\nfjord = fjord.geojson\ncoast = coast.geojson\n\n\
         [geo]\nalpha = 10\nkm_per_map_unit = 1\nprojection = planar\ndivider = {dx},0,{dx},{h}\nbuffer_km = {buf}\n\n\
         [market_access]\ntheta = -1\n\n\
         [archaeology]\nkind = coin\nreplicates = 1000\nn_boot = 200\n\n\
         [multiverse]\ncontrol_subgroups = all,coastal:5,excl_capital,excl_fjord:30,market_town:10\n",
        seed = p.seed,
        dx = p.divider_x_km,
        h = p.height_km,
        buf = p.buffer_km,
    );
    let path = dir.join("config.ini");
    std::fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
    println!(
        "synthetic world: {} parishes ({} west), {} census records, {} findings -> {}",
        world.truth.n_parishes,
        world.truth.n_west,
        world.census.len(),
        world.findings.len(),
        dir.display()
    );
    Ok(())
}
