mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use lopec::rng::rng_from_seed;
use lopec::world::{audible_point, coverage_walk, scan_shadowed, ApField as Field};
use lopec::{
    generate_field, ground_truth_graph, random_walk, scan, signal_at, AccessPoint, ApId, Bounds,
    Point,
};

use common::{small_field, SENSITIVITY, TAU};

fn path_loss(tx: f64, gamma: f64, d: f64) -> f64 {
    tx - 10.0 * gamma * d.max(1.0).log10()
}

fn ap_at(x: f64, y: f64, tx: f64) -> AccessPoint {
    AccessPoint {
        id: ApId::new(7),
        position: Point::new(x, y),
        tx_power: tx,
    }
}

#[test]
fn generation_is_reproducible_and_seed_sensitive() {
    let a = small_field(1);
    let b = small_field(1);
    let c = small_field(2);
    assert_eq!(a, b);
    let pos = |f: &Field| {
        let mut v: Vec<(u64, u64)> = f
            .aps()
            .iter()
            .map(|ap| (ap.position.x.to_bits(), ap.position.y.to_bits()))
            .collect();
        v.sort_unstable();
        v
    };
    assert_ne!(pos(&a), pos(&c));
}

#[test]
fn field_invariants_hold() {
    for seed in 0..20 {
        let f = small_field(seed);
        let ids: HashSet<ApId> = f.aps().iter().map(|ap| ap.id).collect();
        assert_eq!(ids.len(), f.len());
        for ap in f.aps() {
            assert!(f.bounds().contains(&ap.position));
            assert!(ap.tx_power.is_finite());
        }
    }
}

#[test]
fn field_file_roundtrip() {
    let f = small_field(5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("world.json");
    f.save(&path).unwrap();
    assert_eq!(Field::load(&path).unwrap(), f);
}

#[test]
fn edges_agree_with_grid_sampling() {
    // a tiny field so a 0.5 m grid over the whole area is cheap
    let spec = lopec::world::FieldSpec {
        count: 10,
        bounds: Bounds::new(60.0, 60.0).unwrap(),
        ..Default::default()
    };
    for seed in 0..3 {
        let f = generate_field(&spec, seed).unwrap();
        let g = ground_truth_graph(&f, TAU);
        let mut heard: Vec<HashSet<usize>> = Vec::new();
        let (mut x, step) = (-40.0, 0.5);
        while x <= 100.0 {
            let mut y = -40.0;
            while y <= 100.0 {
                let p = Point::new(x, y);
                heard.push(
                    (0..f.len())
                        .filter(|&i| signal_at(&f.aps()[i], &p, &f) >= TAU)
                        .collect(),
                );
                y += step;
            }
            x += step;
        }
        for a in 0..f.len() {
            for b in (a + 1)..f.len() {
                let sampled = heard.iter().any(|s| s.contains(&a) && s.contains(&b));
                let edge = g.has_edge(f.aps()[a].id, f.aps()[b].id);
                if sampled {
                    assert!(edge, "sampled overlap missing from graph");
                } else if edge {
                    // lens thinner than the grid
                    let ra = f.coverage_radius(&f.aps()[a], TAU).unwrap();
                    let rb = f.coverage_radius(&f.aps()[b], TAU).unwrap();
                    let gap = ra + rb - f.aps()[a].position.distance(&f.aps()[b].position);
                    assert!(gap < 0.5, "edge with {gap} m overlap not sampled");
                }
            }
        }
    }
}

#[test]
fn shadowing_off_matches_exact_scan() {
    let f = small_field(3);
    let mut rng = rng_from_seed(9);
    let p = audible_point(&f, SENSITIVITY, &mut rng, 1000).unwrap();
    assert_eq!(scan_shadowed(&f, &p, SENSITIVITY, 0.0, &mut rng), scan(&f, &p, SENSITIVITY));
}

#[test]
fn coverage_walk_spans_the_grid() {
    let f = small_field(3);
    let w = coverage_walk(&f, 5.0).unwrap();
    assert_eq!(w.len(), 30 * 30);
    assert!(w.steps.iter().all(|p| f.bounds().contains(p)));
}

proptest! {
    #[test]
    fn signal_follows_log_distance_law(
        tx in -60.0f64..-20.0, gamma in 1.5f64..4.5,
        x in 0.0f64..100.0, y in 0.0f64..100.0,
    ) {
        let ap = ap_at(50.0, 50.0, tx);
        let f = Field::new(vec![ap.clone()], Bounds::new(100.0, 100.0).unwrap(), gamma, 0).unwrap();
        let p = Point::new(x, y);
        let expect = path_loss(tx, gamma, ((x - 50.0).powi(2) + (y - 50.0).powi(2)).sqrt());
        prop_assert!((signal_at(&ap, &p, &f) - expect).abs() < 1e-9);
    }

    #[test]
    fn signal_is_non_increasing_with_distance(
        tx in -60.0f64..-20.0, d1 in 0.0f64..70.0, extra in 0.0f64..70.0, angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let ap = ap_at(0.0, 0.0, tx);
        let f = Field::new(vec![ap.clone()], Bounds::new(200.0, 200.0).unwrap(), 3.0, 0).unwrap();
        let at = |d: f64| Point::new(d * angle.cos(), d * angle.sin());
        prop_assert!(signal_at(&ap, &at(d1 + extra), &f) <= signal_at(&ap, &at(d1), &f));
    }

    #[test]
    fn scan_lists_exactly_the_audible_aps(seed in 0u64..50, x in 0.0f64..150.0, y in 0.0f64..150.0) {
        let f = small_field(seed);
        let p = Point::new(x, y);
        let fp = scan(&f, &p, SENSITIVITY);
        let expect: HashSet<ApId> = f
            .aps()
            .iter()
            .filter(|ap| signal_at(ap, &p, &f) >= SENSITIVITY)
            .map(|ap| ap.id)
            .collect();
        let got: Vec<ApId> = fp.ap_set();
        prop_assert_eq!(got.len(), expect.len());
        prop_assert!(got.iter().all(|id| expect.contains(id)));
        prop_assert!(fp.observations().iter().all(|o| o.rssi >= SENSITIVITY));
        prop_assert!(fp.observations().windows(2).all(|w| w[0].rssi >= w[1].rssi));
    }

    #[test]
    fn scans_at_tau_are_cliques_of_ground_truth(seed in 0u64..50, x in 0.0f64..150.0, y in 0.0f64..150.0) {
        let f = small_field(seed);
        let g = ground_truth_graph(&f, TAU);
        let fp = scan(&f, &Point::new(x, y), TAU);
        prop_assert!(g.is_clique(&fp.ap_set()));
    }

    #[test]
    fn walks_stay_in_bounds_with_bounded_steps(
        seed in any::<u64>(), steps in 1usize..200, len in 0.5f64..20.0,
        x in 0.0f64..150.0, y in 0.0f64..150.0,
    ) {
        let f = small_field(1);
        let w = random_walk(&f, Point::new(x, y), steps, len, seed).unwrap();
        prop_assert!(w.steps.iter().all(|p| f.bounds().contains(p)));
        prop_assert!(w.steps.windows(2).all(|s| s[0].distance(&s[1]) <= len + 1e-9));
        prop_assert_eq!(&w, &random_walk(&f, Point::new(x, y), steps, len, seed).unwrap());
    }
}
