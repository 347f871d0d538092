use firstnature::geo::{cost_distance, CellClass, CostSurface, Point};
use firstnature::market_access::{
    compute_market_access, market_access, market_access_from_distances, ParishSite, Port, PortRegistry, Projection, Region,
    RegionClassifier,
};
use firstnature::synth::{generate_synthetic_world, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn port(id: &str, x: f64, y: f64, baseline: bool) -> Port {
    Port {
        id: id.into(),
        location: Point::new(x, y),
        in_baseline: baseline,
        in_counterfactual: true,
    }
}

#[test]
fn analytic_two_port_case() {
    let ma = market_access_from_distances(&[Some(1.0), Some(3.0)], -1.0);
    assert_eq!(ma, 0.75);
    let before = market_access_from_distances(&[Some(3.0)], -1.0);
    let d = ma.ln() - before.ln();
    assert!((d - 3f64.ln()).abs() < 1e-12);
    assert_eq!(market_access_from_distances(&[None, Some(0.0)], -2.0), 1.0);
}

#[test]
fn market_access_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cells = (0..30 * 20)
        .map(|i| if i % 30 < 12 { CellClass::Water } else { CellClass::Land })
        .collect();
    let s = CostSurface::from_classes(30, 20, 1.0, 10.0, cells).unwrap();
    let ports: Vec<Port> = (0..5)
        .map(|i| port(&format!("p{i}"), rng.gen_range(0.0..12.0), rng.gen_range(0.0..20.0), true))
        .collect();
    for k in 0..10 {
        let parish = ParishSite {
            id: format!("q{k}"),
            centroid: Point::new(rng.gen_range(12.0..30.0), rng.gen_range(0.0..20.0)),
            region: None,
        };
        for theta in [-1.0, -2.5, -8.0] {
            let refs: Vec<&Port> = ports.iter().collect();
            let got = market_access(&parish, &refs, theta, &s).unwrap();
            let field = cost_distance(&s, s.snap(parish.centroid).unwrap()).unwrap();
            let want: f64 = ports
                .iter()
                .map(|p| (field.get(s.snap(p.location).unwrap()).unwrap() + 1.0).powf(theta))
                .sum();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn identical_port_sets_give_zero_change() {
    let s = CostSurface::from_classes(10, 10, 1.0, 10.0, vec![CellClass::Water; 100]).unwrap();
    let reg = PortRegistry::new(vec![port("a", 1.5, 1.5, true), port("b", 8.5, 8.5, true)]).unwrap();
    let parishes = vec![ParishSite {
        id: "x".into(),
        centroid: Point::new(4.5, 5.5),
        region: None,
    }];
    let t = compute_market_access(&parishes, &reg, -1.0, &s).unwrap();
    assert_eq!(t.records[0].delta_log_ma, 0.0);
}

#[test]
fn opening_the_channel_raises_access_behind_it() {
    let p = SynthParams::with_seed(42);
    let world = generate_synthetic_world(&p).unwrap();
    let open = CostSurface::from_grid(&world.raster_open, 10.0, 1.0).unwrap();
    let closed = CostSurface::from_grid(&world.raster_closed, 10.0, 1.0).unwrap();
    let ports: Vec<&Port> = world.ports.iter().filter(|p| p.in_counterfactual).collect();
    let mut behind = Vec::new();
    let mut far = Vec::new();
    for parish in &world.parishes {
        let d = market_access(parish, &ports, -8.0, &open).unwrap().ln() - market_access(parish, &ports, -8.0, &closed).unwrap().ln();
        assert!(d >= -1e-12, "{}: {d}", parish.id);
        match parish.region {
            Some(Region::West) => behind.push(d),
            Some(Region::East) => far.push(d),
            _ => {}
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&behind) > 0.0);
    assert!(mean(&far) < 0.1 * mean(&behind), "east {} west {}", mean(&far), mean(&behind));
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * vx).powi(2) + (p.y - a.y - t * vy).powi(2)).sqrt()
}

#[test]
fn classify_thirty_points() {
    // fjord along y = 50, open coast along x = 0, divider at x = 80
    let fjord = vec![vec![Point::new(10.0, 50.0), Point::new(150.0, 50.0)]];
    let coast = vec![vec![Point::new(0.0, 0.0), Point::new(0.0, 100.0)]];
    let divider = [Point::new(80.0, 0.0), Point::new(80.0, 100.0)];
    let c = RegionClassifier::new(fjord.clone(), coast.clone(), divider, 20.0, Projection::Planar).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..30 {
        let p = Point::new(rng.gen_range(0.0..160.0), rng.gen_range(0.0..100.0));
        let near_fjord = seg_dist(p, fjord[0][0], fjord[0][1]) < seg_dist(p, coast[0][0], coast[0][1]);
        let want = if !near_fjord {
            Region::Reference
        } else if (p.x - 80.0).abs() <= 20.0 {
            Region::Middle
        } else if p.x < 80.0 {
            Region::West
        } else {
            Region::East
        };
        assert_eq!(c.classify(p), want, "{p:?}");
        seen.insert(want);
    }
    assert!(seen.len() >= 3);
}
