use crate::graph::OverlapGraph;
use crate::locator::{build_radio_map, RadioMap};
use crate::noise::{csda, e_csda, fabricated_noise, NoiseSet};
use crate::rng::{derive_seed, label, rng_from_seed, SimRng};
use crate::world::{
    audible_point, generate_field, ground_truth_graph, random_walk, scan, scan_shadowed, ApField,
    Fingerprint, Point,
};

use super::{ExperimentConfig, HarnessError};

/// Draws before giving up on finding an audible spot.
const AUDIBLE_ATTEMPTS: usize = 10_000;

/// The fixed part of every experiment: the world, its ground-truth overlap
/// graph and the location provider's radio map.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub cfg: ExperimentConfig,
    pub master_seed: u64,
    pub field: ApField,
    pub truth: OverlapGraph,
    pub map: RadioMap,
}

/// Graph snapshots of one collection run. `snapshots[s]` is the graph after
/// `s` sessions, coefficients up to date; `snapshots[0]` is empty.
#[derive(Debug, Clone)]
pub struct Collection {
    pub snapshots: Vec<OverlapGraph>,
}

impl Collection {
    pub fn last(&self) -> &OverlapGraph {
        self.snapshots.last().expect("collection keeps the empty snapshot")
    }
}

/// Noise for one request, possibly on a trimmed fingerprint.
#[derive(Debug, Clone)]
pub struct Generated {
    /// What the client actually sends as its real set.
    pub real: Fingerprint,
    pub noise: Vec<NoiseSet>,
    /// Readings dropped from the scan to make generation feasible.
    pub trimmed: usize,
    /// No trimming helped; the noise is fabricated and will not resolve.
    pub fabricated: bool,
}

impl Workbench {
    pub fn new(cfg: ExperimentConfig, master_seed: u64) -> Result<Self, HarnessError> {
        let field_seed = cfg
            .world
            .seed
            .unwrap_or_else(|| derive_seed(master_seed, &[label("world")]));
        let field = generate_field(&cfg.world.field, field_seed)?;
        let truth = ground_truth_graph(&field, cfg.world.tau);
        let map = build_radio_map(&field, cfg.locator.grid_spacing, cfg.world.sensitivity)?;
        Ok(Workbench {
            cfg,
            master_seed,
            field,
            truth,
            map,
        })
    }

    pub fn seed(&self, parts: &[u64]) -> u64 {
        derive_seed(self.master_seed, parts)
    }

    /// Collection sessions: each is a walk from a random audible spot whose
    /// scans are fed to SCSOA. Coefficients are recomputed between sessions.
    pub fn collect(&self) -> Result<Collection, HarnessError> {
        let c = &self.cfg.collection;
        let w = &self.cfg.world;
        let mut g = OverlapGraph::new();
        g.recompute_coefficients();
        let mut snapshots = vec![g.clone()];
        for s in 0..c.sessions {
            let seed = self.seed(&[label("collect"), s as u64]);
            let mut rng = rng_from_seed(seed);
            let start = self.audible(&mut rng)?;
            let walk = random_walk(&self.field, start, c.steps, c.step_length, seed)?;
            for p in &walk.steps {
                let fp = scan_shadowed(&self.field, p, w.sensitivity, w.shadowing_sigma, &mut rng);
                g.scsoa_update(&fp, w.tau);
            }
            g.recompute_coefficients();
            snapshots.push(g.clone());
        }
        Ok(Collection { snapshots })
    }

    /// The graph the device holds: the configured graph file, or the end of a
    /// fresh collection run.
    pub fn device_graph(&self) -> Result<OverlapGraph, HarnessError> {
        match &self.cfg.graph_file {
            Some(path) => {
                let mut g = OverlapGraph::load(path)?;
                if !g.has_coefficients() {
                    g.recompute_coefficients();
                }
                Ok(g)
            }
            None => Ok(self.collect()?.last().clone()),
        }
    }

    pub fn audible(&self, rng: &mut SimRng) -> Result<Point, HarnessError> {
        audible_point(&self.field, self.cfg.world.sensitivity, rng, AUDIBLE_ATTEMPTS).ok_or_else(
            || HarnessError::Config("no audible position found; field too sparse".into()),
        )
    }

    /// A real request: the exact scan at a uniformly random audible spot.
    pub fn request(&self, rng: &mut SimRng) -> Result<Fingerprint, HarnessError> {
        let p = self.audible(rng)?;
        Ok(self.scan(&p))
    }

    pub fn scan(&self, p: &Point) -> Fingerprint {
        scan(&self.field, p, self.cfg.world.sensitivity)
    }
}

/// The `n` strongest readings of `fp`.
pub fn strongest(fp: &Fingerprint, n: usize) -> Fingerprint {
    let obs = fp.observations()[..n.min(fp.len())].to_vec();
    Fingerprint::new(obs, fp.position_truth()).expect("subset of a valid fingerprint")
}

/// Client-side generation for sessions: plain CSDA, or e-CSDA chained off
/// `prev` when given. When the full scan is infeasible the client drops its
/// weakest readings one at a time until generation succeeds.
pub fn generate_trimmed(
    g: &OverlapGraph,
    real: &Fingerprint,
    h: usize,
    epsilon: f64,
    prev: Option<&[NoiseSet]>,
    seed: u64,
) -> Generated {
    for keep in (1..=real.len()).rev() {
        let fp = strongest(real, keep);
        let attempt = match prev {
            Some(p) if !p.is_empty() => e_csda(g, &fp, p, epsilon, derive_seed(seed, &[keep as u64])),
            _ => csda(g, &fp, epsilon, h, derive_seed(seed, &[keep as u64])),
        };
        if let Ok(noise) = attempt {
            return Generated {
                real: fp,
                noise,
                trimmed: real.len() - keep,
                fabricated: false,
            };
        }
    }
    Generated {
        noise: fabricated_noise(real, h, seed),
        real: real.clone(),
        trimmed: 0,
        fabricated: true,
    }
}
