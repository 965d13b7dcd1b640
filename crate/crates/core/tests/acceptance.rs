//! End-to-end acceptance checks on the default world. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::Rng;

use lopec::harness::success::{Cell, SizeClass, Sweep};
use lopec::harness::trajectory::Arm;
use lopec::harness::{cost, distribution, graph_quality, success, trajectory};
use lopec::harness::{ExperimentConfig, ExperimentReport, HarnessError, Workbench};
use lopec::rng::{derive_seed, label, rng_from_seed, SimRng};
use lopec::stats::{decreasing_trend_p, within_binomial, TrendLevel};
use lopec::world::{coverage_walk, Observation};
use lopec::{
    brute_force_clique, csda, distribution_attack, homogeneity_attack, luck_guess,
    record_traffic, scan, ApId, Backend, HomogeneityParams, LocationEstimate, OverlapGraph, Point,
    QueryFrequencyTable, SetOutcome,
};

const MASTER_SEED: u64 = 1;

// Pinned tolerances.
const CLIQUE_INVOCATIONS: usize = 1000;
const CLIQUE_MIN_VERTICES: usize = 300;
const CLIQUE_BUDGET: Duration = Duration::from_secs(10);
const CONTAINMENT_SCANS: usize = 10_000;
const CONTAINMENT_BUDGET: Duration = Duration::from_secs(30);
const SUCCESS_TRIALS: usize = 2000;
const H_INDEPENDENCE_SE: f64 = 3.0;
const TREND_ALPHA: f64 = 0.05;
const BACKEND_SE: f64 = 1.0;
const COST_RATIO: f64 = 0.1;
const COST_SLOPE: f64 = 1.2;
const COST_BUDGET: Duration = Duration::from_secs(600);
const COVERAGE_VERTEX_RATIO: f64 = 0.95;
const LUCK_TRIALS: usize = 100_000;
const LUCK_SIGMAS: f64 = 3.0;
const MCNEMAR_ALPHA: f64 = 0.01;
const CHAINED_BASELINE_FACTOR: f64 = 2.0;
const CONTROL_LOCATABLE: f64 = 0.95;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.success.trials = SUCCESS_TRIALS;
    cfg
}

fn workbench() -> Workbench {
    Workbench::new(config(), MASTER_SEED).expect("default config builds")
}

/// Pairwise clique check independent of the graph's own helper.
fn pairwise_complete(g: &OverlapGraph, set: &[ApId]) -> bool {
    set.iter().tuple_combinations().all(|(&a, &b)| g.has_edge(a, b))
}

fn clique_guarantee(wb: &Workbench) -> Verdict {
    let started = Instant::now();
    let mut g = OverlapGraph::new();
    for p in &coverage_walk(&wb.field, wb.cfg.collection.sweep_spacing).unwrap().steps {
        g.scsoa_update(&wb.scan(p), wb.cfg.world.tau);
    }
    g.recompute_coefficients();
    let h = 5;
    let (mut feasible, mut sets, mut bad) = (0, 0, 0);
    for t in 0..CLIQUE_INVOCATIONS {
        let mut rng = rng_from_seed(wb.seed(&[label("clique-guarantee"), t as u64]));
        let real = wb.request(&mut rng).unwrap();
        let Ok(noise) = csda(&g, &real, 1.0, h, rng.random()) else {
            continue;
        };
        feasible += 1;
        for s in &noise {
            sets += 1;
            let verified = g.is_clique(&s.ap_ids)
                && pairwise_complete(&g, &s.ap_ids)
                && brute_force_clique(&g.induced(&s.ap_ids), s.len(), t as u64).is_some();
            bad += usize::from(!verified);
        }
    }
    let elapsed = started.elapsed();
    verdict(
        g.vertex_count() >= CLIQUE_MIN_VERTICES && sets > 0 && bad == 0 && elapsed < CLIQUE_BUDGET,
        format!(
            "|V| = {}, {CLIQUE_INVOCATIONS} invocations, {feasible} feasible, {sets} sets, {bad} not cliques, {:.2} s",
            g.vertex_count(),
            elapsed.as_secs_f64()
        ),
    )
}

fn containment(wb: &Workbench) -> Verdict {
    let started = Instant::now();
    let tau = wb.cfg.world.tau;
    let mut rng = rng_from_seed(wb.seed(&[label("containment")]));
    let bounds = wb.field.bounds();
    let mut bad = 0;
    for _ in 0..CONTAINMENT_SCANS {
        let fp = scan(&wb.field, &bounds.sample(&mut rng), tau);
        bad += usize::from(!wb.truth.is_clique(&fp.ap_set()));
    }
    let elapsed = started.elapsed();
    verdict(
        bad == 0 && elapsed < CONTAINMENT_BUDGET,
        format!("{CONTAINMENT_SCANS} scans at sensitivity = tau, {bad} not cliques, {:.2} s", elapsed.as_secs_f64()),
    )
}

/// (label, rate, se) for the structural rate and each backend's operational rate.
fn rates(outcome: &success::SuccessOutcome, c: &Cell, class: SizeClass) -> Vec<(String, f64, f64)> {
    let k = outcome.k_aps;
    let s = c.structural(class, k);
    let mut v = vec![("clique".to_string(), s.rate, s.se)];
    for (bi, b) in outcome.backends.iter().enumerate() {
        let r = c.operational(class, k, bi, 0);
        v.push((format!("x({})", b.name()), r.rate, r.se));
    }
    v
}

fn h_independence(outcome: &success::SuccessOutcome) -> Verdict {
    let cells: Vec<&Cell> = outcome.sweep(Sweep::H).collect();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for m in 0..rates(outcome, cells[0], SizeClass::All).len() {
        let series: Vec<(f64, f64)> = cells
            .iter()
            .map(|c| {
                let r = &rates(outcome, c, SizeClass::All)[m];
                (r.1, r.2)
            })
            .collect();
        for (a, b) in series.iter().tuple_combinations() {
            let se = (a.1 * a.1 + b.1 * b.1).sqrt();
            if se > 0.0 {
                worst = worst.max((a.0 - b.0).abs() / se);
            } else if a.0 != b.0 {
                worst = f64::INFINITY;
            }
        }
        let name = &rates(outcome, cells[0], SizeClass::All)[m].0;
        lines.push(format!(
            "{name} [{}]",
            series.iter().map(|s| format!("{:.3}", s.0)).join(", ")
        ));
    }
    verdict(
        worst < H_INDEPENDENCE_SE,
        format!(
            "h in [{}], {SUCCESS_TRIALS} trials/cell: {}; largest gap {worst:.2} SE",
            cells.iter().map(|c| c.h).join(", "),
            lines.join("; ")
        ),
    )
}

fn trends(outcome: &success::SuccessOutcome) -> Verdict {
    let mut ok = true;
    let mut lines = Vec::new();
    for (sweep, score) in [
        (Sweep::Epsilon, (|c: &Cell| c.epsilon) as fn(&Cell) -> f64),
        (Sweep::Scale, |c: &Cell| c.vertices as f64),
    ] {
        let cells: Vec<&Cell> = outcome.sweep(sweep).collect();
        let k = outcome.k_aps;
        let mut series: Vec<(String, Vec<TrendLevel>)> = vec![(
            "clique".into(),
            cells.iter().map(|c| c.structural(SizeClass::All, k).trend_level(score(c))).collect(),
        )];
        for (bi, b) in outcome.backends.iter().enumerate() {
            series.push((
                format!("x({})", b.name()),
                cells
                    .iter()
                    .map(|c| c.operational(SizeClass::All, k, bi, 0).trend_level(score(c)))
                    .collect(),
            ));
        }
        for (name, levels) in series {
            let p = decreasing_trend_p(&levels);
            ok &= p >= TREND_ALPHA;
            lines.push(format!("{} {name} p(decreasing) = {p:.3}", sweep.name()));
        }
    }
    verdict(ok, lines.join("; "))
}

fn backend_order(outcome: &success::SuccessOutcome) -> Verdict {
    let (Some(r), Some(p)) = (
        outcome.backend_index(Backend::Radar),
        outcome.backend_index(Backend::Pbl),
    ) else {
        return verdict(false, "both backends must be configured");
    };
    let k = outcome.k_aps;
    let (mut cells, mut violations, mut ties) = (0, 0, 0);
    for c in &outcome.cells {
        if c.requests(SizeClass::MoreThanK, k) == 0 {
            continue;
        }
        cells += 1;
        let xr = c.operational(SizeClass::MoreThanK, k, r, 0);
        let xp = c.operational(SizeClass::MoreThanK, k, p, 0);
        let se = (xr.se * xr.se + xp.se * xp.se).sqrt();
        if xr.rate < xp.rate - BACKEND_SE * se {
            violations += 1;
        } else if xr.rate < xp.rate {
            ties += 1;
        }
    }
    verdict(
        cells > 0 && violations == 0,
        format!("{cells} cells with n > k: {violations} with RADAR below PBL by more than 1 SE, {ties} within 1 SE"),
    )
}

fn cost_claims(outcome: &cost::CostOutcome) -> Verdict {
    let Some((c, bf)) = outcome.largest_uncensored() else {
        return verdict(false, "every brute-force cell was censored");
    };
    let ratio = c.median_us / bf.median_us;
    let slope = outcome.csda_scale_slope();
    verdict(
        ratio <= COST_RATIO && slope <= COST_SLOPE && outcome.wall_clock < COST_BUDGET,
        format!(
            "|V| = {}: csda {:.2} us vs brute force {:.1} us, ratio {ratio:.5}; slope {slope:.3}; suite {:.1} s",
            c.vertices,
            c.median_us,
            bf.median_us,
            outcome.wall_clock.as_secs_f64()
        ),
    )
}

fn graph_shape(outcome: &graph_quality::GraphQualityOutcome, shadowing: f64) -> Verdict {
    let rows: Vec<_> = outcome.session_rows().collect();
    let monotone = rows
        .windows(2)
        .all(|w| w[1].vertex_ratio >= w[0].vertex_ratio && w[1].edge_ratio >= w[0].edge_ratio);
    let cov = outcome.coverage_row();
    let incorrect: usize = outcome.rows.iter().map(|r| r.incorrect_vertices).sum();
    let last = rows.last().unwrap();
    verdict(
        shadowing == 0.0 && monotone && cov.vertex_ratio >= COVERAGE_VERTEX_RATIO && incorrect == 0,
        format!(
            "{} sessions monotone: {monotone} (final |V| ratio {:.3}, |E| ratio {:.3}); coverage |V| ratio {:.3}; incorrect vertices {incorrect}",
            rows.len() - 1,
            last.vertex_ratio,
            last.edge_ratio,
            cov.vertex_ratio
        ),
    )
}

fn located(i: usize, p: Point) -> SetOutcome {
    SetOutcome {
        set_index: i,
        result: Ok(LocationEstimate {
            position: p,
            backend: Backend::Radar,
            score: 0.0,
            mismatch: 0.0,
        }),
    }
}

fn random_set(rng: &mut SimRng) -> Vec<Observation> {
    (0..4)
        .map(|_| Observation {
            ap: ApId::new(rng.random_range(0..50)),
            rssi: -60.0,
        })
        .collect()
}

fn luck_law() -> Verdict {
    let mut ok = true;
    let mut lines = Vec::new();
    for h in [1usize, 4, 9] {
        let mut rng = rng_from_seed(derive_seed(MASTER_SEED, &[label("luck"), h as u64]));
        let mut table = QueryFrequencyTable::new();
        for _ in 0..1000 {
            record_traffic(&mut table, &[random_set(&mut rng)]);
        }
        let params = HomogeneityParams::default();
        let (mut luck, mut dist, mut homo) = (0, 0, 0);
        for _ in 0..LUCK_TRIALS {
            let real = rng.random_range(0..=h);
            luck += usize::from(luck_guess(h + 1, &mut rng).chosen_index == real);
            let sets: Vec<Vec<Observation>> = (0..=h).map(|_| random_set(&mut rng)).collect();
            dist += usize::from(distribution_attack(&sets, &table, &mut rng).unwrap().chosen_index == real);
            let session: Vec<Vec<SetOutcome>> = (0..3)
                .map(|_| {
                    (0..=h)
                        .map(|i| located(i, Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))))
                        .collect()
                })
                .collect();
            homo += usize::from(homogeneity_attack(&session, &params, &mut rng).unwrap().chosen_index == real);
        }
        let p = 1.0 / (h as f64 + 1.0);
        for hits in [luck, dist, homo] {
            ok &= within_binomial(hits, LUCK_TRIALS, p, LUCK_SIGMAS);
        }
        lines.push(format!(
            "h={h} (1/(h+1) = {p:.3}): luck {:.4}, distribution {:.4}, homogeneity {:.4}",
            luck as f64 / LUCK_TRIALS as f64,
            dist as f64 / LUCK_TRIALS as f64,
            homo as f64 / LUCK_TRIALS as f64
        ));
    }
    verdict(ok, lines.join("; "))
}

fn homogeneity_defense(outcome: &trajectory::TrajectoryOutcome) -> Verdict {
    let plain = outcome.hit_rate(Arm::Plain);
    let chained = outcome.hit_rate(Arm::Chained);
    let p = outcome.mcnemar_p();
    let bound = CHAINED_BASELINE_FACTOR / (outcome.h as f64 + 1.0);
    let (b, c) = outcome.discordant();
    verdict(
        plain > chained && p < MCNEMAR_ALPHA && chained <= bound,
        format!(
            "{} walks, h = {}, eps = {}: csda {plain:.3}, e-csda {chained:.3} (bound {bound:.2}); discordant {b}/{c}, McNemar p = {p:.2e}",
            outcome.pairs.len(),
            outcome.h,
            outcome.epsilon
        ),
    )
}

fn equalization(outcome: &distribution::DistributionOutcome) -> Verdict {
    let first = outcome.first();
    let last = outcome.last();
    let entropy_ok = outcome
        .windows
        .iter()
        .all(|w| w.entropy_lopec >= w.entropy_baseline);
    verdict(
        last.hit_rate <= first.hit_rate && entropy_ok,
        format!(
            "hit rate {:.3} in the first {} requests, {:.3} in the last (luck {:.3}); entropy lopec >= baseline at every checkpoint: {entropy_ok} (final {:.4} vs {:.4})",
            first.hit_rate,
            first.requests_seen,
            last.hit_rate,
            1.0 / (outcome.h as f64 + 1.0),
            last.entropy_lopec,
            last.entropy_baseline
        ),
    )
}

fn control(outcome: &success::SuccessOutcome) -> Verdict {
    let mut ok = !outcome.control.is_empty();
    let mut lines = Vec::new();
    for r in &outcome.control {
        let share = r.clique_locatable as f64 / r.clique_sets.max(1) as f64;
        ok &= r.fabricated_sets > 0
            && r.fabricated_unlocatable == r.fabricated_sets
            && r.clique_sets > 0
            && share >= CONTROL_LOCATABLE;
        lines.push(format!(
            "{}: fabricated unlocatable {}/{}, eps=1 locatable {}/{}",
            r.backend, r.fabricated_unlocatable, r.fabricated_sets, r.clique_locatable, r.clique_sets
        ));
    }
    verdict(ok, lines.join("; "))
}

type Rerun = fn(&Workbench) -> Result<ExperimentReport, HarnessError>;

fn determinism(first: &[(&str, ExperimentReport)]) -> Verdict {
    let reruns: [(&str, Rerun); 5] = [
        ("graph-quality", |wb| graph_quality::run(wb)?.report(wb)),
        ("success", |wb| success::run(wb)?.report(wb)),
        ("cost", |wb| cost::run(wb)?.report(wb)),
        ("trajectory", |wb| trajectory::run(wb)?.report(wb)),
        ("distribution", |wb| distribution::run(wb)?.report(wb)),
    ];
    // a fresh workbench, so no state can leak from the first runs
    let wb = workbench();
    let mut differing = Vec::new();
    for (name, rerun) in reruns {
        let a = &first.iter().find(|(n, _)| *n == name).unwrap().1;
        let b = rerun(&wb).unwrap();
        if a.deterministic_csv().unwrap() != b.deterministic_csv().unwrap() {
            differing.push(name);
        }
    }
    verdict(
        differing.is_empty(),
        format!("5 experiments re-run from scratch; differing: [{}]", differing.join(", ")),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let wb = workbench();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n, name, v: Verdict| {
        println!(
            "{} criterion {n:>2} ({name}): {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((n, name, v));
    };

    record(1, "clique guarantee", clique_guarantee(&wb));
    record(2, "scan containment", containment(&wb));

    let succ = success::run(&wb).unwrap();
    record(3, "privacy-level independence", h_independence(&succ));
    record(4, "epsilon and scale trends", trends(&succ));
    record(5, "backend ordering", backend_order(&succ));

    let cost_outcome = cost::run(&wb).unwrap();
    record(6, "cost", cost_claims(&cost_outcome));

    let gq = graph_quality::run(&wb).unwrap();
    record(7, "graph growth", graph_shape(&gq, wb.cfg.world.shadowing_sigma));

    record(8, "luck-guess law", luck_law());

    let traj = trajectory::run(&wb).unwrap();
    record(9, "homogeneity defense", homogeneity_defense(&traj));

    let dist = distribution::run(&wb).unwrap();
    record(10, "equalization", equalization(&dist));

    let reports = vec![
        ("graph-quality", gq.report(&wb).unwrap()),
        ("success", succ.report(&wb).unwrap()),
        ("cost", cost_outcome.report(&wb).unwrap()),
        ("trajectory", traj.report(&wb).unwrap()),
        ("distribution", dist.report(&wb).unwrap()),
    ];
    record(11, "determinism", determinism(&reports));
    record(12, "fabricated-noise control", control(&succ));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} s (master seed {MASTER_SEED})",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
