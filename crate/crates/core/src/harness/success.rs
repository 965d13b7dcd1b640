//! Success rate of coefficient-guided noise across privacy level, threshold
//! and graph scale.
//!
//! Two notions are reported side by side. The structural rate is the share
//! of emitted noise sets that are cliques of the ground-truth graph. The
//! operational rate is the share of noise sets the location provider
//! resolves with a signal mismatch within a parity factor of the real set's;
//! infeasible requests count as failed sets there.

use serde::Serialize;

use crate::graph::OverlapGraph;
use crate::locator::{noise_succeeds, serve_bundle, Backend};
use crate::noise::{assemble_bundle, csda, fabricated_noise, SessionId};
use crate::par::map_trials;
use crate::rng::{derive_seed, label, rng_from_seed};
use crate::stats::{mean_se, TrendLevel};

use super::report::{GraphProvenance, Table};
use super::workbench::generate_trimmed;
use super::{ExperimentReport, HarnessError, Workbench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    H,
    Epsilon,
    Scale,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::H => "h",
            Sweep::Epsilon => "epsilon",
            Sweep::Scale => "scale",
        }
    }
}

/// Fingerprint-size class relative to the RADAR AP budget `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeClass {
    All,
    AtMostK,
    MoreThanK,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::All, SizeClass::AtMostK, SizeClass::MoreThanK];

    pub fn name(self) -> &'static str {
        match self {
            SizeClass::All => "all",
            SizeClass::AtMostK => "n<=k",
            SizeClass::MoreThanK => "n>k",
        }
    }

    fn admits(self, n: usize, k: usize) -> bool {
        match self {
            SizeClass::All => true,
            SizeClass::AtMostK => n <= k,
            SizeClass::MoreThanK => n > k,
        }
    }
}

/// Per-backend outcome of one request.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendTrial {
    pub locatable: usize,
    /// Successful noise sets per parity factor.
    pub successes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub n: usize,
    pub feasible: bool,
    pub emitted: usize,
    pub cliques: usize,
    pub backends: Vec<BackendTrial>,
}

/// A rate with the standard error of the mean of per-request fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub requests: usize,
    pub sets: usize,
    pub hits: usize,
    pub rate: f64,
    pub se: f64,
}

impl Rate {
    fn from_fractions(parts: &[(usize, usize)]) -> Rate {
        let fractions: Vec<f64> = parts
            .iter()
            .filter(|(_, sets)| *sets > 0)
            .map(|&(hits, sets)| hits as f64 / sets as f64)
            .collect();
        let (_, se) = mean_se(&fractions);
        let hits: usize = parts.iter().map(|p| p.0).sum();
        let sets: usize = parts.iter().map(|p| p.1).sum();
        Rate {
            requests: fractions.len(),
            sets,
            hits,
            rate: if sets == 0 { 0.0 } else { hits as f64 / sets as f64 },
            se,
        }
    }

    pub fn trend_level(&self, score: f64) -> TrendLevel {
        TrendLevel {
            score,
            successes: self.hits as f64,
            trials: self.sets as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub sweep: Sweep,
    pub h: usize,
    pub epsilon: f64,
    pub sessions: usize,
    pub vertices: usize,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

impl Cell {
    fn select(&self, class: SizeClass, k: usize) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(move |t| class.admits(t.n, k))
    }

    pub fn requests(&self, class: SizeClass, k: usize) -> usize {
        self.select(class, k).count()
    }

    pub fn infeasible(&self, class: SizeClass, k: usize) -> usize {
        self.select(class, k).filter(|t| !t.feasible).count()
    }

    /// Cliques of the ground truth among emitted sets.
    pub fn structural(&self, class: SizeClass, k: usize) -> Rate {
        let parts: Vec<(usize, usize)> = self.select(class, k).map(|t| (t.cliques, t.emitted)).collect();
        Rate::from_fractions(&parts)
    }

    pub fn locatable(&self, class: SizeClass, k: usize, backend: usize) -> Rate {
        let parts: Vec<(usize, usize)> = self
            .select(class, k)
            .map(|t| (t.backends.get(backend).map_or(0, |b| b.locatable), self.h))
            .collect();
        Rate::from_fractions(&parts)
    }

    /// Operational success; infeasible requests contribute `h` failures.
    pub fn operational(&self, class: SizeClass, k: usize, backend: usize, factor: usize) -> Rate {
        let parts: Vec<(usize, usize)> = self
            .select(class, k)
            .map(|t| {
                let hits = t.backends.get(backend).map_or(0, |b| b.successes[factor]);
                (hits, self.h)
            })
            .collect();
        Rate::from_fractions(&parts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRow {
    pub sweep: String,
    pub h: usize,
    pub epsilon: f64,
    pub sessions: usize,
    pub graph_vertices: usize,
    pub n_class: String,
    pub backend: String,
    pub parity_factor: f64,
    pub requests: usize,
    pub infeasible: usize,
    pub emitted_sets: usize,
    pub clique_sets: usize,
    pub clique_rate: f64,
    pub clique_se: f64,
    pub locatable_rate: f64,
    pub successes: usize,
    pub success_rate: f64,
    pub success_se: f64,
    pub cell_seed: u64,
}

/// Fabricated ids against coefficient-guided noise at `epsilon = 1` on the
/// same real sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlRow {
    pub backend: String,
    pub requests: usize,
    pub fabricated_sets: usize,
    pub fabricated_unlocatable: usize,
    pub clique_sets: usize,
    pub clique_locatable: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SuccessOutcome {
    pub backends: Vec<Backend>,
    pub factors: Vec<f64>,
    pub k_aps: usize,
    pub cells: Vec<Cell>,
    pub control: Vec<ControlRow>,
    pub graphs: Vec<GraphProvenance>,
}

impl SuccessOutcome {
    pub fn sweep(&self, sweep: Sweep) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(move |c| c.sweep == sweep)
    }

    pub fn backend_index(&self, b: Backend) -> Option<usize> {
        self.backends.iter().position(|&x| x == b)
    }
}

fn run_cell(
    wb: &Workbench,
    g: &OverlapGraph,
    sweep: Sweep,
    h: usize,
    epsilon: f64,
    sessions: usize,
    trials: usize,
) -> Result<Cell, HarnessError> {
    let cfg = &wb.cfg;
    let seed = wb.seed(&[
        label("success"),
        label(sweep.name()),
        h as u64,
        epsilon.to_bits(),
        sessions as u64,
    ]);
    let results = map_trials(trials, |t| -> Result<Trial, HarnessError> {
        // the same request schedule in every cell
        let mut rng = rng_from_seed(wb.seed(&[label("request"), t as u64]));
        let real = wb.request(&mut rng)?;
        let n = real.len();
        let backends = &cfg.locator.backends;
        let failed = || Trial {
            n,
            feasible: false,
            emitted: 0,
            cliques: 0,
            backends: backends
                .iter()
                .map(|_| BackendTrial {
                    locatable: 0,
                    successes: vec![0; cfg.locator.parity_factors.len()],
                })
                .collect(),
        };
        let gen_seed = derive_seed(seed, &[t as u64]);
        let Ok(noise) = csda(g, &real, epsilon, h, gen_seed) else {
            return Ok(failed());
        };
        let cliques = noise.iter().filter(|s| wb.truth.is_clique(&s.ap_ids)).count();
        let bundle = assemble_bundle(&real, &noise, SessionId(format!("s{t}")), gen_seed)
            .expect("generator keeps cardinality");
        let wire = bundle.wire();
        let per_backend = backends
            .iter()
            .map(|&b| {
                let out = serve_bundle(&wb.map, &wire, b, &cfg.locator.params);
                let real_est = &out[bundle.real_index()].result;
                let noise_out = out.iter().filter(|o| o.set_index != bundle.real_index());
                let mut locatable = 0;
                let mut successes = vec![0; cfg.locator.parity_factors.len()];
                for o in noise_out {
                    locatable += usize::from(o.result.is_ok());
                    for (f, &factor) in cfg.locator.parity_factors.iter().enumerate() {
                        successes[f] += usize::from(noise_succeeds(real_est, &o.result, factor));
                    }
                }
                BackendTrial {
                    locatable,
                    successes,
                }
            })
            .collect();
        Ok(Trial {
            n,
            feasible: true,
            emitted: noise.len(),
            cliques,
            backends: per_backend,
        })
    });
    Ok(Cell {
        sweep,
        h,
        epsilon,
        sessions,
        vertices: g.vertex_count(),
        seed,
        trials: results.into_iter().collect::<Result<_, _>>()?,
    })
}

fn run_control(wb: &Workbench, g: &OverlapGraph, trials: usize) -> Result<Vec<ControlRow>, HarnessError> {
    let cfg = &wb.cfg;
    let h = cfg.success.control_h;
    let seed = wb.seed(&[label("control")]);
    let per_trial = map_trials(trials, |t| -> Result<Vec<(usize, usize, usize, usize)>, HarnessError> {
        let mut rng = rng_from_seed(wb.seed(&[label("request"), t as u64]));
        let scanned = wb.request(&mut rng)?;
        let gen_seed = derive_seed(seed, &[t as u64]);
        let generated = generate_trimmed(g, &scanned, h, 1.0, None, gen_seed);
        let real = &generated.real;
        let fabricated = fabricated_noise(real, h, derive_seed(gen_seed, &[1]));
        // (sets, resolved) for one bundle under one backend
        let resolved = |noise: &[crate::noise::NoiseSet], b: Backend| {
            let bundle = assemble_bundle(real, noise, SessionId(format!("c{t}")), gen_seed)
                .expect("generator keeps cardinality");
            let out = serve_bundle(&wb.map, &bundle.wire(), b, &cfg.locator.params);
            let noise_out = out.iter().filter(|o| o.set_index != bundle.real_index());
            noise_out.fold((0, 0), |(s, k), o| (s + 1, k + usize::from(o.result.is_ok())))
        };
        let counts = cfg
            .locator
            .backends
            .iter()
            .map(|&b| {
                let (fab_sets, fab_resolved) = resolved(&fabricated, b);
                let (sets, ok) = resolved(&generated.noise, b);
                // an unrecoverable request contributes only failures
                let ok = if generated.fabricated { 0 } else { ok };
                (fab_sets, fab_sets - fab_resolved, sets, ok)
            })
            .collect();
        Ok(counts)
    });
    let per_trial: Vec<_> = per_trial.into_iter().collect::<Result<_, _>>()?;
    Ok(cfg
        .locator
        .backends
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let sum = per_trial.iter().fold((0, 0, 0, 0), |a, v| {
                (a.0 + v[i].0, a.1 + v[i].1, a.2 + v[i].2, a.3 + v[i].3)
            });
            ControlRow {
                backend: b.name().into(),
                requests: trials,
                fabricated_sets: sum.0,
                fabricated_unlocatable: sum.1,
                clique_sets: sum.2,
                clique_locatable: sum.3,
                seed,
            }
        })
        .collect())
}

pub fn run(wb: &Workbench) -> Result<SuccessOutcome, HarnessError> {
    let s = &wb.cfg.success;
    let collection = wb.collect()?;
    let device = match &wb.cfg.graph_file {
        Some(_) => wb.device_graph()?,
        None => collection.last().clone(),
    };
    let sessions = wb.cfg.collection.sessions;
    let mut cells = Vec::new();
    for &h in &s.h_values {
        cells.push(run_cell(wb, &device, Sweep::H, h, s.h_epsilon, sessions, s.trials)?);
    }
    for &e in &s.epsilons {
        cells.push(run_cell(wb, &device, Sweep::Epsilon, s.epsilon_h, e, sessions, s.trials)?);
    }
    let mut graphs = vec![
        GraphProvenance::of("truth", &wb.truth),
        GraphProvenance::of("device", &device),
    ];
    for &p in &s.scale_prefixes {
        let g = &collection.snapshots[p];
        graphs.push(GraphProvenance::of(format!("prefix-{p}"), g));
        cells.push(run_cell(wb, g, Sweep::Scale, s.scale_h, s.scale_epsilon, p, s.trials)?);
    }
    let control = run_control(wb, &device, s.trials)?;
    Ok(SuccessOutcome {
        backends: wb.cfg.locator.backends.clone(),
        factors: wb.cfg.locator.parity_factors.clone(),
        k_aps: wb.cfg.locator.params.k_aps,
        cells,
        control,
        graphs,
    })
}

impl SuccessOutcome {
    pub fn rows(&self) -> Vec<SuccessRow> {
        let k = self.k_aps;
        let mut rows = Vec::new();
        for c in &self.cells {
            for class in SizeClass::ALL {
                let structural = c.structural(class, k);
                for (bi, b) in self.backends.iter().enumerate() {
                    let locatable = c.locatable(class, k, bi);
                    for (fi, &factor) in self.factors.iter().enumerate() {
                        let op = c.operational(class, k, bi, fi);
                        rows.push(SuccessRow {
                            sweep: c.sweep.name().into(),
                            h: c.h,
                            epsilon: c.epsilon,
                            sessions: c.sessions,
                            graph_vertices: c.vertices,
                            n_class: class.name().into(),
                            backend: b.name().into(),
                            parity_factor: factor,
                            requests: c.requests(class, k),
                            infeasible: c.infeasible(class, k),
                            emitted_sets: structural.sets,
                            clique_sets: structural.hits,
                            clique_rate: structural.rate,
                            clique_se: structural.se,
                            locatable_rate: locatable.rate,
                            successes: op.hits,
                            success_rate: op.rate,
                            success_se: op.se,
                            cell_seed: c.seed,
                        });
                    }
                }
            }
        }
        rows
    }

    pub fn report(&self, wb: &Workbench) -> Result<ExperimentReport, HarnessError> {
        let k = self.k_aps;
        let mut summary = vec![format!(
            "headline parity factor {}; rates over all fingerprint sizes",
            self.factors[0]
        )];
        for c in &self.cells {
            let s = c.structural(SizeClass::All, k);
            let mut line = format!(
                "{:>7} h={:<2} eps={:<4} sessions={} |V|={}: clique {:.3}±{:.3}, infeasible {}",
                c.sweep.name(),
                c.h,
                c.epsilon,
                c.sessions,
                c.vertices,
                s.rate,
                s.se,
                c.infeasible(SizeClass::All, k),
            );
            for (bi, b) in self.backends.iter().enumerate() {
                let op = c.operational(SizeClass::All, k, bi, 0);
                line.push_str(&format!(", x({}) {:.3}±{:.3}", b.name(), op.rate, op.se));
            }
            summary.push(line);
        }
        for r in &self.control {
            summary.push(format!(
                "control {}: fabricated unlocatable {}/{}, epsilon=1 locatable {}/{}",
                r.backend, r.fabricated_unlocatable, r.fabricated_sets, r.clique_locatable, r.clique_sets
            ));
        }
        Ok(ExperimentReport {
            id: "success".into(),
            master_seed: wb.master_seed,
            field_seed: wb.field.seed(),
            graphs: self.graphs.clone(),
            tables: vec![
                Table::from_records("cells", &self.rows())?,
                Table::from_records("control", &self.control)?,
            ],
            timing_columns: Vec::new(),
            summary,
        })
    }
}
