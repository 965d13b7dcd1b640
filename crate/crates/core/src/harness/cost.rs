//! Wall-clock cost of coefficient-guided generation against exhaustive clique
//! search, over graph scale and privacy level.
//!
//! Timings run on the calling thread only: each measurement is a batch of
//! requests timed as a whole, repeated after warmup runs, and the median
//! per-request time is reported.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::graph::{brute_force_clique_until, OverlapGraph, SearchTimeout};
use crate::noise::{csda, e_csda, NoiseSet, REDRAW_BUDGET_PER_SET};
use crate::par::map_trials_seq;
use crate::rng::{derive_seed, label, rng_from_seed};
use crate::stats::{log_log_slope, median};
use crate::world::{ApId, Fingerprint};

use super::report::{GraphProvenance, Table};
use super::{ExperimentReport, HarnessError, Workbench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    #[serde(rename = "csda")]
    Csda,
    #[serde(rename = "e-csda")]
    ECsda,
    #[serde(rename = "brute-force")]
    BruteForce,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Csda, Algorithm::ECsda, Algorithm::BruteForce];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Csda => "csda",
            Algorithm::ECsda => "e-csda",
            Algorithm::BruteForce => "brute-force",
        }
    }
}

/// `h` distinct noise sets by repeated exhaustive search, the baseline the
/// guided generators are timed against. Returns how many sets were found.
pub fn brute_force_noise(
    g: &OverlapGraph,
    real: &Fingerprint,
    h: usize,
    seed: u64,
    timeout: Duration,
) -> Result<usize, SearchTimeout> {
    let real_set = real.ap_set();
    let mut found: Vec<Vec<ApId>> = Vec::with_capacity(h);
    let mut attempts = 0;
    while found.len() < h && attempts < REDRAW_BUDGET_PER_SET * h.max(1) {
        let deadline = Instant::now() + timeout;
        let hit = brute_force_clique_until(g, real.len(), derive_seed(seed, &[attempts as u64]), Some(deadline))?;
        attempts += 1;
        match hit {
            // no clique of this size anywhere; further searches are futile
            None => break,
            Some(s) => {
                if s != real_set && !found.contains(&s) {
                    found.push(s);
                }
            }
        }
    }
    Ok(found.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub sweep: String,
    pub sessions: usize,
    pub vertices: usize,
    pub edges: usize,
    pub h: usize,
    pub algorithm: Algorithm,
    pub requests: usize,
    pub runs: usize,
    /// Requests for which the algorithm produced all `h` sets.
    pub complete_requests: usize,
    pub censored: bool,
    pub median_us: f64,
    pub min_us: f64,
    pub max_us: f64,
    pub seed: u64,
}

pub const TIMING_COLUMNS: [&str; 3] = ["median_us", "min_us", "max_us"];

#[derive(Debug, Clone)]
pub struct CostOutcome {
    pub rows: Vec<CostRow>,
    pub graphs: Vec<GraphProvenance>,
    pub wall_clock: Duration,
}

impl CostOutcome {
    pub fn cell(&self, sweep: &str, algorithm: Algorithm) -> impl Iterator<Item = &CostRow> {
        let sweep = sweep.to_owned();
        self.rows
            .iter()
            .filter(move |r| r.sweep == sweep && r.algorithm == algorithm)
    }

    /// Largest graph on which brute force finished every run.
    pub fn largest_uncensored(&self) -> Option<(&CostRow, &CostRow)> {
        self.cell("scale", Algorithm::BruteForce)
            .filter(|r| !r.censored)
            .max_by_key(|r| r.vertices)
            .and_then(|bf| {
                self.cell("scale", Algorithm::Csda)
                    .find(|c| c.sessions == bf.sessions)
                    .map(|c| (c, bf))
            })
    }

    /// Log-log slope of median CSDA time against vertex count.
    pub fn csda_scale_slope(&self) -> f64 {
        let rows: Vec<&CostRow> = self
            .cell("scale", Algorithm::Csda)
            .filter(|r| r.vertices > 0)
            .collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.vertices as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.median_us).collect();
        log_log_slope(&xs, &ys)
    }
}

struct Timing {
    per_request_us: Vec<f64>,
    complete: usize,
    censored: bool,
}

fn time_batch<F>(runs: usize, warmups: usize, requests: usize, mut f: F) -> Timing
where
    F: FnMut() -> Result<usize, SearchTimeout>,
{
    let mut per_request_us = Vec::with_capacity(runs);
    let mut complete = 0;
    for r in 0..warmups + runs {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        match outcome {
            Ok(c) => complete = c,
            Err(SearchTimeout) => {
                return Timing {
                    per_request_us,
                    complete,
                    censored: true,
                }
            }
        }
        if r >= warmups {
            per_request_us.push(elapsed.as_secs_f64() * 1e6 / requests as f64);
        }
    }
    Timing {
        per_request_us,
        complete,
        censored: false,
    }
}

#[allow(clippy::too_many_arguments)]
fn measure(
    wb: &Workbench,
    g: &OverlapGraph,
    requests: &[Fingerprint],
    sweep: &str,
    sessions: usize,
    h: usize,
    algorithm: Algorithm,
) -> CostRow {
    let c = &wb.cfg.cost;
    let seed = wb.seed(&[label("cost"), label(sweep), sessions as u64, h as u64, label(algorithm.name())]);
    let eps = c.epsilon;
    let timeout = Duration::from_secs_f64(c.brute_force_timeout_secs);
    // previous-step sets for the chained generator, prepared untimed
    let prev: Vec<Option<Vec<NoiseSet>>> = requests
        .iter()
        .enumerate()
        .map(|(i, fp)| csda(g, fp, eps, h, derive_seed(seed, &[label("prev"), i as u64])).ok())
        .collect();
    let timing = match algorithm {
        Algorithm::Csda => time_batch(c.runs, c.warmups, requests.len(), || {
            Ok(requests
                .iter()
                .enumerate()
                .filter(|(i, fp)| csda(g, fp, eps, h, derive_seed(seed, &[*i as u64])).is_ok())
                .count())
        }),
        Algorithm::ECsda => time_batch(c.runs, c.warmups, requests.len(), || {
            Ok(requests
                .iter()
                .zip(&prev)
                .enumerate()
                .filter(|(i, (fp, p))| match p {
                    Some(p) if !p.is_empty() => {
                        e_csda(g, fp, p, eps, derive_seed(seed, &[*i as u64])).is_ok()
                    }
                    _ => csda(g, fp, eps, h, derive_seed(seed, &[*i as u64])).is_ok(),
                })
                .count())
        }),
        Algorithm::BruteForce => time_batch(c.runs, c.warmups, requests.len(), || {
            let mut complete = 0;
            for (i, fp) in requests.iter().enumerate() {
                let found = brute_force_noise(g, fp, h, derive_seed(seed, &[i as u64]), timeout)?;
                complete += usize::from(found == h);
            }
            Ok(complete)
        }),
    };
    let v = &timing.per_request_us;
    let (med, lo, hi) = if v.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            median(v),
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    CostRow {
        sweep: sweep.into(),
        sessions,
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        h,
        algorithm,
        requests: requests.len(),
        runs: v.len(),
        complete_requests: timing.complete,
        censored: timing.censored,
        median_us: med,
        min_us: lo,
        max_us: hi,
        seed,
    }
}

pub fn run(wb: &Workbench) -> Result<CostOutcome, HarnessError> {
    let started = Instant::now();
    let c = &wb.cfg.cost;
    let collection = wb.collect()?;
    let requests: Vec<Fingerprint> = map_trials_seq(c.requests, |i| {
        let mut rng = rng_from_seed(wb.seed(&[label("cost-request"), i as u64]));
        wb.request(&mut rng)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut graphs = vec![GraphProvenance::of("truth", &wb.truth)];
    for (s, g) in collection.snapshots.iter().enumerate().skip(1) {
        graphs.push(GraphProvenance::of(format!("prefix-{s}"), g));
        for a in Algorithm::ALL {
            rows.push(measure(wb, g, &requests, "scale", s, c.h, a));
        }
    }
    let largest = collection.last();
    let sessions = collection.snapshots.len() - 1;
    for &h in &c.h_values {
        for a in Algorithm::ALL {
            rows.push(measure(wb, largest, &requests, "h", sessions, h, a));
        }
    }
    Ok(CostOutcome {
        rows,
        graphs,
        wall_clock: started.elapsed(),
    })
}

impl CostOutcome {
    pub fn report(&self, wb: &Workbench) -> Result<ExperimentReport, HarnessError> {
        let mut summary = Vec::new();
        if let Some((csda, bf)) = self.largest_uncensored() {
            summary.push(format!(
                "largest uncensored graph (|V| = {}): csda {:.1} us, brute force {:.1} us, ratio {:.4}",
                csda.vertices,
                csda.median_us,
                bf.median_us,
                csda.median_us / bf.median_us
            ));
        }
        summary.push(format!(
            "csda log-log slope against |V|: {:.3}",
            self.csda_scale_slope()
        ));
        let hs: Vec<&CostRow> = self.cell("h", Algorithm::Csda).collect();
        for a in &hs {
            if let Some(b) = hs.iter().find(|b| b.h == 2 * a.h) {
                summary.push(format!(
                    "csda time ratio h {} -> {}: {:.2}",
                    a.h,
                    b.h,
                    b.median_us / a.median_us
                ));
            }
        }
        let censored = self.rows.iter().filter(|r| r.censored).count();
        summary.push(format!("censored cells: {censored}"));
        summary.push(format!("suite wall clock: {:.1} s", self.wall_clock.as_secs_f64()));
        Ok(ExperimentReport {
            id: "cost".into(),
            master_seed: wb.master_seed,
            field_seed: wb.field.seed(),
            graphs: self.graphs.clone(),
            tables: vec![Table::from_records("timings", &self.rows)?],
            timing_columns: TIMING_COLUMNS.iter().map(|s| s.to_string()).collect(),
            summary,
        })
    }
}
