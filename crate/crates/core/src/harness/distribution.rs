//! Query-frequency attack over time: the attacker learns AP popularity from a
//! noise-free population, then keeps learning from LoPEC traffic while
//! guessing the real set of each bundle.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::adversary::{distribution_attack, record_traffic, QueryFrequencyTable};
use crate::graph::OverlapGraph;
use crate::noise::{assemble_bundle, SessionId};
use crate::par::map_trials;
use crate::rng::{derive_seed, label, rng_from_seed, SimRng};
use crate::stats::binomial_sigma;
use crate::world::{Fingerprint, Observation, Point};

use super::report::{GraphProvenance, Table};
use super::workbench::generate_trimmed;
use super::{ExperimentReport, HarnessError, Workbench};

/// Draws before giving up on an audible spot near a hotspot.
const HOTSPOT_ATTEMPTS: usize = 1000;

/// Where the simulated population issues requests from.
#[derive(Debug, Clone)]
pub struct Population {
    pub hotspots: Vec<Point>,
    pub spread: f64,
    pub share: f64,
}

impl Population {
    pub fn new(wb: &Workbench) -> Result<Self, HarnessError> {
        let d = &wb.cfg.distribution;
        let mut rng = rng_from_seed(wb.seed(&[label("hotspots")]));
        let hotspots = (0..d.hotspots)
            .map(|_| wb.audible(&mut rng))
            .collect::<Result<_, _>>()?;
        Ok(Population {
            hotspots,
            spread: d.hotspot_spread,
            share: d.hotspot_share,
        })
    }

    /// A user's exact scan, from a hotspot or from anywhere audible.
    pub fn request(&self, wb: &Workbench, rng: &mut SimRng) -> Result<Fingerprint, HarnessError> {
        if rng.random_bool(self.share) {
            let center = self.hotspots[rng.random_range(0..self.hotspots.len())];
            let jitter = Normal::new(0.0, self.spread.max(f64::MIN_POSITIVE)).expect("finite spread");
            let bounds = wb.field.bounds();
            for _ in 0..HOTSPOT_ATTEMPTS {
                let p = bounds.fold(Point::new(
                    center.x + jitter.sample(rng),
                    center.y + jitter.sample(rng),
                ));
                let fp = wb.scan(&p);
                if !fp.is_empty() {
                    return Ok(fp);
                }
            }
        }
        wb.request(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub window: usize,
    pub requests_seen: usize,
    pub h: usize,
    pub hits: usize,
    pub hit_rate: f64,
    pub hit_se: f64,
    pub untrained_hits: usize,
    pub untrained_hit_rate: f64,
    pub entropy_lopec: f64,
    pub entropy_baseline: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DistributionOutcome {
    pub h: usize,
    pub windows: Vec<WindowRow>,
    pub trained_entropy: f64,
    pub graphs: Vec<GraphProvenance>,
}

impl DistributionOutcome {
    pub fn first(&self) -> &WindowRow {
        self.windows.first().expect("at least one window")
    }

    pub fn last(&self) -> &WindowRow {
        self.windows.last().expect("at least one window")
    }
}

struct Served {
    sets: Vec<Vec<Observation>>,
    real_index: usize,
    real: Vec<Observation>,
}

pub fn run_with_graph(wb: &Workbench, g: &OverlapGraph) -> Result<DistributionOutcome, HarnessError> {
    let d = &wb.cfg.distribution;
    let population = Population::new(wb)?;
    let universe = wb.field.len();

    let mut trained = QueryFrequencyTable::new();
    for r in 0..d.train_requests {
        let mut rng = rng_from_seed(wb.seed(&[label("train"), r as u64]));
        let fp = population.request(wb, &mut rng)?;
        record_traffic(&mut trained, &[fp.observations().to_vec()]);
    }
    let trained_entropy = trained.normalized_entropy(universe);

    let seed = wb.seed(&[label("distribution")]);
    let served = map_trials(d.requests, |r| -> Result<Served, HarnessError> {
        let mut rng = rng_from_seed(derive_seed(seed, &[r as u64]));
        let fp = population.request(wb, &mut rng)?;
        let gen = generate_trimmed(g, &fp, d.h, d.epsilon, None, derive_seed(seed, &[r as u64, 1]));
        let bundle = assemble_bundle(&gen.real, &gen.noise, SessionId(format!("d{r}")), derive_seed(seed, &[r as u64, 2]))
            .expect("generator keeps cardinality");
        Ok(Served {
            sets: bundle.sets().to_vec(),
            real_index: bundle.real_index(),
            real: gen.real.observations().to_vec(),
        })
    });
    let served: Vec<Served> = served.into_iter().collect::<Result<_, _>>()?;

    let mut lopec = trained.clone();
    let mut baseline = trained;
    let untrained = QueryFrequencyTable::new();
    let mut rng = rng_from_seed(derive_seed(seed, &[label("attack")]));
    let mut windows = Vec::new();
    let (mut hits, mut untrained_hits, mut in_window) = (0, 0, 0);
    for (r, s) in served.iter().enumerate() {
        let v = distribution_attack(&s.sets, &lopec, &mut rng).expect("bundles are non-empty");
        let u = distribution_attack(&s.sets, &untrained, &mut rng).expect("bundles are non-empty");
        hits += usize::from(v.chosen_index == s.real_index);
        untrained_hits += usize::from(u.chosen_index == s.real_index);
        in_window += 1;
        record_traffic(&mut lopec, &s.sets);
        record_traffic(&mut baseline, std::slice::from_ref(&s.real));
        if in_window == d.window || r + 1 == served.len() {
            let rate = hits as f64 / in_window as f64;
            windows.push(WindowRow {
                window: windows.len(),
                requests_seen: r + 1,
                h: d.h,
                hits,
                hit_rate: rate,
                hit_se: binomial_sigma(rate, in_window),
                untrained_hits,
                untrained_hit_rate: untrained_hits as f64 / in_window as f64,
                entropy_lopec: lopec.normalized_entropy(universe),
                entropy_baseline: baseline.normalized_entropy(universe),
                seed,
            });
            (hits, untrained_hits, in_window) = (0, 0, 0);
        }
    }
    Ok(DistributionOutcome {
        h: d.h,
        windows,
        trained_entropy,
        graphs: vec![
            GraphProvenance::of("truth", &wb.truth),
            GraphProvenance::of("device", g),
        ],
    })
}

pub fn run(wb: &Workbench) -> Result<DistributionOutcome, HarnessError> {
    run_with_graph(wb, &wb.device_graph()?)
}

impl DistributionOutcome {
    pub fn report(&self, wb: &Workbench) -> Result<ExperimentReport, HarnessError> {
        let mut summary = vec![format!(
            "h = {}, luck baseline {:.3}, trained-table entropy {:.4}",
            self.h,
            1.0 / (self.h as f64 + 1.0),
            self.trained_entropy
        )];
        for w in &self.windows {
            summary.push(format!(
                "after {:>6} requests: hit {:.3}±{:.3}, untrained {:.3}, entropy lopec {:.4} vs baseline {:.4}",
                w.requests_seen, w.hit_rate, w.hit_se, w.untrained_hit_rate, w.entropy_lopec, w.entropy_baseline
            ));
        }
        Ok(ExperimentReport {
            id: "distribution".into(),
            master_seed: wb.master_seed,
            field_seed: wb.field.seed(),
            graphs: self.graphs.clone(),
            tables: vec![Table::from_records("windows", &self.windows)?],
            timing_columns: Vec::new(),
            summary,
        })
    }
}
