//! Paired walks served with per-step noise (plain) and chained noise, then
//! attacked by trajectory homogeneity.

use serde::Serialize;

use crate::adversary::homogeneity_attack;
use crate::graph::OverlapGraph;
use crate::locator::{serve_bundle, SetOutcome};
use crate::noise::{assemble_bundle, NoiseSet, SessionId};
use crate::par::map_trials;
use crate::rng::{derive_seed, label, rng_from_seed};
use crate::stats::mcnemar_one_sided;
use crate::world::{random_walk, Point};

use super::report::{GraphProvenance, Table};
use super::workbench::generate_trimmed;
use super::{ExperimentReport, HarnessError, Workbench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arm {
    #[serde(rename = "csda")]
    Plain,
    #[serde(rename = "e-csda")]
    Chained,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Plain, Arm::Chained];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Plain => "csda",
            Arm::Chained => "e-csda",
        }
    }
}

/// One served session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub hit: bool,
    pub chosen_index: usize,
    pub real_index: usize,
    /// Noise slots regenerated from scratch because chaining failed.
    pub fallbacks: usize,
    /// Steps on which the client trimmed its scan to make noise feasible.
    pub trimmed_steps: usize,
    /// Steps with no feasible noise at all.
    pub fabricated_steps: usize,
    /// Consecutive-step distances of located noise chains, in generation
    /// order, split by whether the later step was a flagged fallback.
    pub noise_steps: Vec<f64>,
    pub fallback_steps: Vec<f64>,
    pub real_steps: Vec<f64>,
    /// Located position per step: real first, then noise in generation order.
    pub trace: Vec<Vec<Option<Point>>>,
    pub truth: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPair {
    pub walk: usize,
    pub seed: u64,
    pub plain: Session,
    pub chained: Session,
}

impl WalkPair {
    pub fn arm(&self, arm: Arm) -> &Session {
        match arm {
            Arm::Plain => &self.plain,
            Arm::Chained => &self.chained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkRow {
    pub walk: usize,
    pub arm: Arm,
    pub h: usize,
    pub epsilon: f64,
    pub hit: bool,
    pub chosen_index: usize,
    pub real_index: usize,
    pub fallbacks: usize,
    pub trimmed_steps: usize,
    pub fabricated_steps: usize,
    pub real_step_mean: f64,
    pub noise_step_mean: f64,
    pub noise_step_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub walk: usize,
    pub arm: Arm,
    pub step: usize,
    /// `0` is the real chain, `j >= 1` the j-th noise chain.
    pub chain: usize,
    pub truth_x: Option<f64>,
    pub truth_y: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub h: usize,
    pub epsilon: f64,
    pub pairs: Vec<WalkPair>,
    pub graphs: Vec<GraphProvenance>,
    pub trace_walks: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() - 1) as f64 * q).round() as usize]
}

impl TrajectoryOutcome {
    pub fn hits(&self, arm: Arm) -> usize {
        self.pairs.iter().filter(|p| p.arm(arm).hit).count()
    }

    pub fn hit_rate(&self, arm: Arm) -> f64 {
        self.hits(arm) as f64 / self.pairs.len() as f64
    }

    /// Discordant pairs `(plain only, chained only)`.
    pub fn discordant(&self) -> (usize, usize) {
        self.pairs.iter().fold((0, 0), |(b, c), p| {
            (
                b + usize::from(p.plain.hit && !p.chained.hit),
                c + usize::from(!p.plain.hit && p.chained.hit),
            )
        })
    }

    /// One-sided exact McNemar p-value for "plain is hit more often".
    pub fn mcnemar_p(&self) -> f64 {
        let (b, c) = self.discordant();
        mcnemar_one_sided(b, c)
    }

    pub fn noise_steps(&self, arm: Arm) -> Vec<f64> {
        self.pairs
            .iter()
            .flat_map(|p| p.arm(arm).noise_steps.iter().copied())
            .collect()
    }

    pub fn fallback_steps(&self, arm: Arm) -> Vec<f64> {
        self.pairs
            .iter()
            .flat_map(|p| p.arm(arm).fallback_steps.iter().copied())
            .collect()
    }

    pub fn real_steps(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .flat_map(|p| p.plain.real_steps.iter().copied())
            .collect()
    }

    pub fn total(&self, arm: Arm, f: impl Fn(&Session) -> usize) -> usize {
        self.pairs.iter().map(|p| f(p.arm(arm))).sum()
    }
}

/// Redraws allowed for a walk that is almost entirely out of coverage.
const WALK_ATTEMPTS: u64 = 100;

fn serve_session(
    wb: &Workbench,
    g: &OverlapGraph,
    arm: Arm,
    truth: &[Point],
    seed: u64,
) -> Result<Session, HarnessError> {
    let t_cfg = &wb.cfg.trajectory;
    let h = t_cfg.h;
    let mut prev: Option<Vec<NoiseSet>> = None;
    let mut served: Vec<Vec<SetOutcome>> = Vec::with_capacity(truth.len());
    let mut trace: Vec<Vec<Option<Point>>> = Vec::with_capacity(truth.len());
    let mut flagged: Vec<Vec<bool>> = Vec::with_capacity(truth.len());
    let (mut fallbacks, mut trimmed_steps, mut fabricated_steps) = (0, 0, 0);
    let mut real_index = 0;
    let session = SessionId(format!("{}-{seed:016x}", arm.name()));
    for (t, p) in truth.iter().enumerate() {
        let scanned = wb.scan(p);
        let step_seed = derive_seed(seed, &[label(arm.name()), t as u64]);
        let chain_from = match arm {
            Arm::Chained => prev.as_deref(),
            Arm::Plain => None,
        };
        // a chained session that lost its previous sets starts over
        let restarted = arm == Arm::Chained && t > 0 && chain_from.is_none();
        let gen = generate_trimmed(g, &scanned, h, t_cfg.epsilon, chain_from, step_seed);
        fallbacks += gen.noise.iter().filter(|s| s.fallback).count();
        trimmed_steps += usize::from(gen.trimmed > 0);
        fabricated_steps += usize::from(gen.fabricated);
        let bundle = assemble_bundle(&gen.real, &gen.noise, session.clone(), step_seed)
            .expect("generator keeps cardinality");
        let out = serve_bundle(&wb.map, &bundle.wire(), t_cfg.backend, &wb.cfg.locator.params);
        real_index = bundle.real_index();

        // located positions in generation order, for chain statistics
        let mut located = vec![out[real_index].position()];
        for s in &gen.noise {
            let slot = bundle
                .sets()
                .iter()
                .position(|set| {
                    let mut ids: Vec<_> = set.iter().map(|o| o.ap).collect();
                    ids.sort_unstable();
                    ids == s.ap_ids
                })
                .expect("every noise set is in the bundle");
            located.push(out[slot].position());
        }
        trace.push(located);
        let restarted = restarted || gen.fabricated;
        flagged.push(
            std::iter::once(false)
                .chain(gen.noise.iter().map(|s| s.fallback || restarted))
                .collect(),
        );
        served.push(out);
        prev = (!gen.fabricated).then_some(gen.noise);
    }

    let (mut noise_steps, mut fallback_steps, mut real_steps) = (Vec::new(), Vec::new(), Vec::new());
    for t in 1..trace.len() {
        for j in 0..trace[t].len().min(trace[t - 1].len()) {
            let (Some(a), Some(b)) = (trace[t - 1][j], trace[t][j]) else {
                continue;
            };
            let d = a.distance(&b);
            if j == 0 {
                real_steps.push(d);
            } else if flagged[t][j] {
                fallback_steps.push(d);
            } else {
                noise_steps.push(d);
            }
        }
    }

    let mut rng = rng_from_seed(derive_seed(seed, &[label("attack"), label(arm.name())]));
    let verdict = homogeneity_attack(&served, &t_cfg.attack, &mut rng)
        .expect("sessions have at least two steps");
    Ok(Session {
        hit: verdict.chosen_index == real_index,
        chosen_index: verdict.chosen_index,
        real_index,
        fallbacks,
        trimmed_steps,
        fabricated_steps,
        noise_steps,
        fallback_steps,
        real_steps,
        trace,
        truth: truth.to_vec(),
    })
}

pub fn run_with_graph(wb: &Workbench, g: &OverlapGraph) -> Result<TrajectoryOutcome, HarnessError> {
    let t_cfg = &wb.cfg.trajectory;
    let pairs = map_trials(t_cfg.walks, |w| -> Result<WalkPair, HarnessError> {
        let seed = wb.seed(&[label("trajectory"), w as u64]);
        let mut rng = rng_from_seed(seed);
        // the device only queries where it hears something; redraw walks
        // that leave fewer than two audible steps
        let mut steps: Vec<Point> = Vec::new();
        for attempt in 0..WALK_ATTEMPTS {
            let start = wb.audible(&mut rng)?;
            let walk_seed = derive_seed(seed, &[attempt]);
            let walk = random_walk(&wb.field, start, t_cfg.steps, t_cfg.step_length, walk_seed)?;
            steps = walk
                .steps
                .into_iter()
                .filter(|p| !wb.scan(p).is_empty())
                .collect();
            if steps.len() >= 2 {
                break;
            }
        }
        if steps.len() < 2 {
            return Err(HarnessError::Config("walks never leave two audible steps".into()));
        }
        Ok(WalkPair {
            walk: w,
            seed,
            plain: serve_session(wb, g, Arm::Plain, &steps, seed)?,
            chained: serve_session(wb, g, Arm::Chained, &steps, seed)?,
        })
    });
    Ok(TrajectoryOutcome {
        h: t_cfg.h,
        epsilon: t_cfg.epsilon,
        pairs: pairs.into_iter().collect::<Result<_, _>>()?,
        graphs: vec![
            GraphProvenance::of("truth", &wb.truth),
            GraphProvenance::of("device", g),
        ],
        trace_walks: t_cfg.trace_walks,
    })
}

pub fn run(wb: &Workbench) -> Result<TrajectoryOutcome, HarnessError> {
    run_with_graph(wb, &wb.device_graph()?)
}

impl TrajectoryOutcome {
    pub fn walk_rows(&self) -> Vec<WalkRow> {
        let mut rows = Vec::new();
        for p in &self.pairs {
            for arm in Arm::BOTH {
                let s = p.arm(arm);
                rows.push(WalkRow {
                    walk: p.walk,
                    arm,
                    h: self.h,
                    epsilon: self.epsilon,
                    hit: s.hit,
                    chosen_index: s.chosen_index,
                    real_index: s.real_index,
                    fallbacks: s.fallbacks,
                    trimmed_steps: s.trimmed_steps,
                    fabricated_steps: s.fabricated_steps,
                    real_step_mean: mean(&s.real_steps),
                    noise_step_mean: mean(&s.noise_steps),
                    noise_step_max: s.noise_steps.iter().copied().fold(f64::NAN, f64::max),
                    seed: p.seed,
                });
            }
        }
        rows
    }

    pub fn trace_rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::new();
        for p in self.pairs.iter().take(self.trace_walks) {
            for arm in Arm::BOTH {
                let s = p.arm(arm);
                for (t, located) in s.trace.iter().enumerate() {
                    for (chain, pos) in located.iter().enumerate() {
                        let truth = (chain == 0).then_some(s.truth[t]);
                        rows.push(TraceRow {
                            walk: p.walk,
                            arm,
                            step: t,
                            chain,
                            truth_x: truth.map(|q| q.x),
                            truth_y: truth.map(|q| q.y),
                            x: pos.map(|q| q.x),
                            y: pos.map(|q| q.y),
                        });
                    }
                }
            }
        }
        rows
    }

    pub fn report(&self, wb: &Workbench) -> Result<ExperimentReport, HarnessError> {
        let baseline = 1.0 / (self.h as f64 + 1.0);
        let (b, c) = self.discordant();
        let mut summary = vec![format!(
            "{} paired walks, h = {}, epsilon = {}, luck baseline {:.3}",
            self.pairs.len(),
            self.h,
            self.epsilon,
            baseline
        )];
        for arm in Arm::BOTH {
            let steps = self.noise_steps(arm);
            summary.push(format!(
                "{:>6}: hit rate {:.3}; noise chain steps mean {:.1} m, p95 {:.1} m, max {:.1} m; fallbacks {}, trimmed steps {}, fabricated steps {}",
                arm.name(),
                self.hit_rate(arm),
                mean(&steps),
                quantile(&steps, 0.95),
                quantile(&steps, 1.0),
                self.total(arm, |s| s.fallbacks),
                self.total(arm, |s| s.trimmed_steps),
                self.total(arm, |s| s.fabricated_steps),
            ));
        }
        summary.push(format!(
            "real chain steps mean {:.1} m, p95 {:.1} m",
            mean(&self.real_steps()),
            quantile(&self.real_steps(), 0.95)
        ));
        summary.push(format!(
            "discordant pairs: plain-only {b}, chained-only {c}; one-sided McNemar p = {:.2e}",
            self.mcnemar_p()
        ));
        Ok(ExperimentReport {
            id: "trajectory".into(),
            master_seed: wb.master_seed,
            field_seed: wb.field.seed(),
            graphs: self.graphs.clone(),
            tables: vec![
                Table::from_records("walks", &self.walk_rows())?,
                Table::from_records("trace", &self.trace_rows())?,
            ],
            timing_columns: Vec::new(),
            summary,
        })
    }
}
