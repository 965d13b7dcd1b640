#![allow(dead_code)]

use lopec::world::{coverage_walk, FieldSpec};
use lopec::{generate_field, scan, ApField, Bounds, OverlapGraph};

pub const TAU: f64 = -75.0;
pub const SENSITIVITY: f64 = -80.0;

/// A 150 m square with the default AP density.
pub fn small_field(seed: u64) -> ApField {
    let spec = FieldSpec {
        count: 40,
        bounds: Bounds::new(150.0, 150.0).unwrap(),
        ..FieldSpec::default()
    };
    generate_field(&spec, seed).unwrap()
}

/// Graph harvested by exact scans along a lawnmower sweep.
pub fn swept_graph(field: &ApField, spacing: f64, sensitivity: f64) -> OverlapGraph {
    let mut g = OverlapGraph::new();
    for p in &coverage_walk(field, spacing).unwrap().steps {
        g.scsoa_update(&scan(field, p, sensitivity), TAU);
    }
    g.recompute_coefficients();
    g
}
