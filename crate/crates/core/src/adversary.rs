//! Attacks a location provider can run on the bundles it receives.
//!
//! Attacks only ever see wire data: the fingerprint sets and whatever the LP
//! computed from them. They never see the real index or ground-truth
//! positions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::locator::SetOutcome;
use crate::rng::SimRng;
use crate::world::{ApId, Observation, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("a homogeneity attack needs at least two steps, got {0}")]
    SessionTooShort(usize),
    #[error("step {step} has {found} sets, expected {expected}")]
    RaggedSession {
        step: usize,
        expected: usize,
        found: usize,
    },
    #[error("bundle has no sets")]
    EmptyBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AttackKind {
    Luck,
    Distribution,
    Homogeneity,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Luck => "LUCK",
            AttackKind::Distribution => "DISTRIBUTION",
            AttackKind::Homogeneity => "HOMOGENEITY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackVerdict {
    pub chosen_index: usize,
    pub confidence: f64,
    pub attack: AttackKind,
}

/// Uniform guess over `bundle_size` sets.
pub fn luck_guess(bundle_size: usize, rng: &mut SimRng) -> AttackVerdict {
    AttackVerdict {
        chosen_index: if bundle_size <= 1 {
            0
        } else {
            rng.random_range(0..bundle_size)
        },
        confidence: 1.0 / bundle_size.max(1) as f64,
        attack: AttackKind::Luck,
    }
}

/// Uniform pick among the indices attaining the maximum score.
fn argmax_uniform(scores: &[f64], rng: &mut SimRng) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s == best)
        .map(|(i, _)| i)
        .collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Per-AP count of appearances in received sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFrequencyTable {
    counts: BTreeMap<ApId, u64>,
    total_requests: u64,
}

impl QueryFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, ap: ApId) -> u64 {
        self.counts.get(&ap).copied().unwrap_or(0)
    }

    pub fn total_requests(&self) -> u64 {
        self.total_requests
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn distinct_aps(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Shannon entropy of the normalised counts divided by `ln(universe)`, so
    /// a uniform spread over `universe` APs scores 1.
    pub fn normalized_entropy(&self, universe: usize) -> f64 {
        let total = self.total_count() as f64;
        if total == 0.0 || universe < 2 {
            return 0.0;
        }
        let h: f64 = self
            .counts
            .values()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.ln()
            })
            .sum();
        h / (universe as f64).ln()
    }
}

/// Logs one received bundle: every AP of every set counts once per set.
pub fn record_traffic(table: &mut QueryFrequencyTable, sets: &[Vec<Observation>]) {
    if sets.is_empty() {
        return;
    }
    for set in sets {
        for o in set {
            *table.counts.entry(o.ap).or_insert(0) += 1;
        }
    }
    table.total_requests += 1;
}

/// Picks the set whose APs were historically queried most often on average.
/// Falls back to a luck guess when the table holds no history.
pub fn distribution_attack(
    sets: &[Vec<Observation>],
    table: &QueryFrequencyTable,
    rng: &mut SimRng,
) -> Result<AttackVerdict, AdversaryError> {
    if sets.is_empty() {
        return Err(AdversaryError::EmptyBundle);
    }
    if table.is_empty() {
        return Ok(luck_guess(sets.len(), rng));
    }
    let scores: Vec<f64> = sets
        .iter()
        .map(|s| {
            if s.is_empty() {
                0.0
            } else {
                s.iter().map(|o| table.count(o.ap) as f64).sum::<f64>() / s.len() as f64
            }
        })
        .collect();
    let chosen_index = argmax_uniform(&scores, rng);
    Ok(AttackVerdict {
        chosen_index,
        confidence: scores[chosen_index],
        attack: AttackKind::Distribution,
    })
}

/// How the attacker links sets across shuffled steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    /// Greedy nearest-location matching between consecutive steps.
    Greedy,
    /// Set `i` of every step belongs to chain `i`.
    IndexStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomogeneityParams {
    /// Largest distance a walker can plausibly cover between requests, m.
    pub max_step: f64,
    /// Score penalty per unlocatable step or implausible jump, m^2.
    pub penalty: f64,
    pub linkage: Linkage,
}

impl Default for HomogeneityParams {
    fn default() -> Self {
        HomogeneityParams {
            max_step: 60.0,
            penalty: 3600.0,
            linkage: Linkage::Greedy,
        }
    }
}

/// Splits a session into chains of set indices, one per bundle slot.
/// `chains[c][t]` is the set index chain `c` uses at step `t`.
pub fn link_chains(
    session: &[Vec<SetOutcome>],
    linkage: Linkage,
) -> Result<Vec<Vec<usize>>, AdversaryError> {
    let Some(first) = session.first() else {
        return Ok(Vec::new());
    };
    let k = first.len();
    for (step, s) in session.iter().enumerate() {
        if s.len() != k {
            return Err(AdversaryError::RaggedSession {
                step,
                expected: k,
                found: s.len(),
            });
        }
    }
    let mut chains: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
    if linkage == Linkage::IndexStable {
        for chain in &mut chains {
            chain.extend(std::iter::repeat_n(chain[0], session.len() - 1));
        }
        return Ok(chains);
    }
    // last known position of each chain
    let mut tails: Vec<Option<Point>> = first.iter().map(SetOutcome::position).collect();
    for step in &session[1..] {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
        for (c, tail) in tails.iter().enumerate() {
            for (s, out) in step.iter().enumerate() {
                let d = match (tail, out.position()) {
                    (Some(a), Some(b)) => a.distance(&b),
                    _ => f64::INFINITY,
                };
                pairs.push((d, c, s));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut chain_done = vec![false; k];
        let mut set_done = vec![false; k];
        for (_, c, s) in pairs {
            if chain_done[c] || set_done[s] {
                continue;
            }
            chain_done[c] = true;
            set_done[s] = true;
            chains[c].push(s);
            if let Some(p) = step[s].position() {
                tails[c] = Some(p);
            }
        }
    }
    Ok(chains)
}

/// Smoothness of one chain: minus the variance of its step lengths, minus a
/// penalty for every unlocatable step and every step longer than `max_step`.
pub fn chain_smoothness(points: &[Option<Point>], params: &HomogeneityParams) -> f64 {
    let mut violations = points.iter().filter(|p| p.is_none()).count();
    let steps: Vec<f64> = points
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(a.distance(&b)),
            _ => None,
        })
        .collect();
    violations += steps.iter().filter(|&&d| d > params.max_step).count();
    let variance = if steps.len() < 2 {
        0.0
    } else {
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        steps.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / steps.len() as f64
    };
    -(variance + params.penalty * violations as f64)
}

/// Picks the chain whose located positions move most like a walker. The
/// verdict names the set index of the chosen chain at the last step.
pub fn homogeneity_attack(
    session: &[Vec<SetOutcome>],
    params: &HomogeneityParams,
    rng: &mut SimRng,
) -> Result<AttackVerdict, AdversaryError> {
    if session.len() < 2 {
        return Err(AdversaryError::SessionTooShort(session.len()));
    }
    let chains = link_chains(session, params.linkage)?;
    let k = chains.len();
    if k == 0 {
        return Err(AdversaryError::EmptyBundle);
    }
    let traces: Vec<Vec<Option<Point>>> = chains
        .iter()
        .map(|chain| {
            chain
                .iter()
                .enumerate()
                .map(|(t, &s)| session[t][s].position())
                .collect()
        })
        .collect();
    if traces.iter().all(|t| t.iter().all(Option::is_none)) {
        return Ok(luck_guess(k, rng));
    }
    let scores: Vec<f64> = traces
        .iter()
        .map(|t| chain_smoothness(t, params))
        .collect();
    let best = argmax_uniform(&scores, rng);
    Ok(AttackVerdict {
        chosen_index: *chains[best].last().expect("chains are non-empty"),
        confidence: scores[best],
        attack: AttackKind::Homogeneity,
    })
}

/// One attack outcome as emitted to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub experiment: String,
    pub trial: usize,
    pub attack: AttackKind,
    pub h: usize,
    pub epsilon: f64,
    pub chosen_index: usize,
    pub was_real: bool,
}
