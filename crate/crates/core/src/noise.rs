//! Noise fingerprint generation and request bundles.
//!
//! [`csda`] picks "pointer" vertices whose clustering coefficient marks a dense
//! neighbourhood and samples `n` of their neighbours as a decoy AP set, `n`
//! being the size of the real fingerprint. [`e_csda`] chains each new decoy
//! off a member of the previous one so a session of decoys drifts like a
//! walker would. [`assemble_bundle`] shuffles the real set in among the
//! decoys.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::OverlapGraph;
use crate::rng::{rng_from_seed, SimRng};
use crate::world::{permutation, sort_strongest_first, ApId, Fingerprint, Observation};

/// Pointer draws allowed per requested noise set before giving up.
pub const REDRAW_BUDGET_PER_SET: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("no vertex has a clustering coefficient above {epsilon}")]
    NoCandidates { epsilon: f64 },
    #[error("no pointer with {required} neighbours found within the redraw budget (largest candidate degree {max_available})")]
    InsufficientDensity { required: usize, max_available: usize },
    #[error("the real fingerprint is empty")]
    EmptyFingerprint,
    #[error("no previous noise sets to chain from")]
    NoPreviousSets,
    #[error("clustering coefficients have not been computed")]
    CoefficientsUnavailable,
    #[error("noise set {index} has {found} APs, the real fingerprint has {expected}")]
    CardinalityMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{k} noise APs is not a multiple of the real fingerprint size {n}")]
    Integrity { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSet {
    /// Sorted by id.
    pub ap_ids: Vec<ApId>,
    /// The dense-area vertex this set was sampled around; never a member.
    pub pointer: ApId,
    /// Strengths attached for transmission, parallel to `ap_ids`.
    pub synthesized_strengths: Vec<f64>,
    /// Set by [`e_csda`] when the previous set was a dead end and this slot
    /// was redrawn from scratch.
    pub fallback: bool,
}

impl NoiseSet {
    pub fn len(&self) -> usize {
        self.ap_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ap_ids.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.ap_ids
            .iter()
            .zip(&self.synthesized_strengths)
            .map(|(&ap, &rssi)| Observation { ap, rssi })
            .collect()
    }
}

/// Pointer eligibility. The single-shot generator requires `c > epsilon`, the
/// chained one `c >= epsilon`. `epsilon >= 1` is read as `c == 1` in both,
/// since no coefficient exceeds 1.
#[derive(Debug, Clone, Copy)]
enum Threshold {
    Strict(f64),
    Inclusive(f64),
}

impl Threshold {
    fn admits(self, c: f64) -> bool {
        match self {
            Threshold::Strict(eps) => c > eps || (eps >= 1.0 && c >= 1.0),
            Threshold::Inclusive(eps) => c >= eps.min(1.0),
        }
    }
}

struct Draw<'a> {
    g: &'a OverlapGraph,
    real_set: Vec<ApId>,
    strength_range: (f64, f64),
    n: usize,
}

impl<'a> Draw<'a> {
    fn new(g: &'a OverlapGraph, real: &Fingerprint) -> Result<Self, NoiseError> {
        let strength_range = real.strength_range().ok_or(NoiseError::EmptyFingerprint)?;
        if !g.has_coefficients() {
            return Err(NoiseError::CoefficientsUnavailable);
        }
        Ok(Draw {
            g,
            real_set: real.ap_set(),
            strength_range,
            n: real.len(),
        })
    }

    /// `n` neighbours of `pointer`, or `None` when the result would repeat the
    /// real set or an accepted set.
    fn sample_around(
        &self,
        pointer: u32,
        taken: &[NoiseSet],
        fallback: bool,
        rng: &mut SimRng,
    ) -> Option<NoiseSet> {
        let ns = self.g.neighbor_indices(pointer);
        let mut ap_ids: Vec<ApId> = sample(rng, ns.len(), self.n)
            .into_iter()
            .map(|k| self.g.id_at(ns[k]))
            .collect();
        ap_ids.sort_unstable();
        if ap_ids == self.real_set || taken.iter().any(|s| s.ap_ids == ap_ids) {
            return None;
        }
        let (lo, hi) = self.strength_range;
        let synthesized_strengths = ap_ids
            .iter()
            .map(|_| if lo < hi { rng.random_range(lo..=hi) } else { lo })
            .collect();
        Some(NoiseSet {
            ap_ids,
            pointer: self.g.id_at(pointer),
            synthesized_strengths,
            fallback,
        })
    }

    fn candidates(&self, threshold: Threshold) -> Vec<u32> {
        let coeffs = self.g.cached_coefficients().unwrap_or(&[]);
        coeffs
            .iter()
            .enumerate()
            .filter(|&(_, &c)| threshold.admits(c))
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Draws `count` sets from uniformly chosen pointers in `candidates`,
    /// redrawing pointers with too few neighbours and colliding samples.
    fn draw_from_pointers(
        &self,
        candidates: &[u32],
        count: usize,
        taken: &mut Vec<NoiseSet>,
        fallback: bool,
        rng: &mut SimRng,
    ) -> Result<(), NoiseError> {
        let mut budget = REDRAW_BUDGET_PER_SET * count;
        let target = taken.len() + count;
        while taken.len() < target {
            if budget == 0 {
                let max_available = candidates
                    .iter()
                    .map(|&v| self.g.neighbor_indices(v).len())
                    .max()
                    .unwrap_or(0);
                return Err(NoiseError::InsufficientDensity {
                    required: self.n,
                    max_available,
                });
            }
            budget -= 1;
            let v = candidates[rng.random_range(0..candidates.len())];
            if self.g.neighbor_indices(v).len() < self.n {
                continue;
            }
            if let Some(set) = self.sample_around(v, taken, fallback, rng) {
                taken.push(set);
            }
        }
        Ok(())
    }
}

/// Coefficient-guided generation of `h` noise sets for one request.
///
/// Uses the cached coefficient table even when stale; see [`csda_strict`].
pub fn csda(
    g: &OverlapGraph,
    real: &Fingerprint,
    epsilon: f64,
    h: usize,
    seed: u64,
) -> Result<Vec<NoiseSet>, NoiseError> {
    let mut rng = rng_from_seed(seed);
    csda_with_rng(g, real, epsilon, h, &mut rng)
}

pub fn csda_with_rng(
    g: &OverlapGraph,
    real: &Fingerprint,
    epsilon: f64,
    h: usize,
    rng: &mut SimRng,
) -> Result<Vec<NoiseSet>, NoiseError> {
    let draw = Draw::new(g, real)?;
    let mut out = Vec::with_capacity(h);
    if h == 0 {
        return Ok(out);
    }
    let candidates = draw.candidates(Threshold::Strict(epsilon));
    if candidates.is_empty() {
        return Err(NoiseError::NoCandidates { epsilon });
    }
    draw.draw_from_pointers(&candidates, h, &mut out, false, rng)?;
    Ok(out)
}

/// [`csda`] after bringing the coefficient table up to date.
pub fn csda_strict(
    g: &mut OverlapGraph,
    real: &Fingerprint,
    epsilon: f64,
    h: usize,
    seed: u64,
) -> Result<Vec<NoiseSet>, NoiseError> {
    if g.coefficients_dirty() || !g.has_coefficients() {
        g.recompute_coefficients();
    }
    csda(g, real, epsilon, h, seed)
}

/// Trajectory-aware generation: for each previous set, walk its members in
/// random order and take the first with `c >= epsilon` and at least `n`
/// neighbours as the new pointer. A slot whose members all fail is redrawn
/// as in [`csda`] and flagged with `fallback`.
pub fn e_csda(
    g: &OverlapGraph,
    real: &Fingerprint,
    prev: &[NoiseSet],
    epsilon: f64,
    seed: u64,
) -> Result<Vec<NoiseSet>, NoiseError> {
    let mut rng = rng_from_seed(seed);
    e_csda_with_rng(g, real, prev, epsilon, &mut rng)
}

pub fn e_csda_with_rng(
    g: &OverlapGraph,
    real: &Fingerprint,
    prev: &[NoiseSet],
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<Vec<NoiseSet>, NoiseError> {
    if prev.is_empty() {
        return Err(NoiseError::NoPreviousSets);
    }
    let draw = Draw::new(g, real)?;
    let chain = Threshold::Inclusive(epsilon);
    let mut out: Vec<NoiseSet> = Vec::with_capacity(prev.len());
    let mut fresh: Option<Vec<u32>> = None;

    for p in prev {
        let mut chained = None;
        for k in permutation(p.ap_ids.len(), rng) {
            let Some(v) = g.index_of(p.ap_ids[k]) else {
                continue;
            };
            let eligible = g.cached_coefficient(v).is_some_and(|c| chain.admits(c))
                && g.neighbor_indices(v).len() >= draw.n;
            if !eligible {
                continue;
            }
            if let Some(set) = draw.sample_around(v, &out, false, rng) {
                chained = Some(set);
                break;
            }
        }
        match chained {
            Some(set) => out.push(set),
            None => {
                let candidates =
                    fresh.get_or_insert_with(|| draw.candidates(Threshold::Strict(epsilon)));
                if candidates.is_empty() {
                    return Err(NoiseError::NoCandidates { epsilon });
                }
                draw.draw_from_pointers(candidates, 1, &mut out, true, rng)?;
            }
        }
    }
    Ok(out)
}

/// Decoys made of random AP ids that exist nowhere. The control case a
/// location provider rejects outright.
pub fn fabricated_noise(real: &Fingerprint, h: usize, seed: u64) -> Vec<NoiseSet> {
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = real.strength_range().unwrap_or((-80.0, -40.0));
    (0..h)
        .map(|_| {
            let mut ap_ids: Vec<ApId> = (0..real.len()).map(|_| ApId::random(&mut rng)).collect();
            ap_ids.sort_unstable();
            let synthesized_strengths = ap_ids
                .iter()
                .map(|_| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect();
            NoiseSet {
                pointer: ApId::random(&mut rng),
                ap_ids,
                synthesized_strengths,
                fallback: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `h + 1` fingerprint sets as sent to the LP, plus the simulator-side record
/// of which one is genuine.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestBundle {
    session_id: SessionId,
    sets: Vec<Vec<Observation>>,
    real_index: usize,
}

/// What actually crosses the wire: no real index, no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBundle {
    pub session_id: SessionId,
    pub sets: Vec<Vec<Observation>>,
}

/// Simulator-side truth record, stored apart from wire records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleTruth {
    pub session_id: SessionId,
    pub step: usize,
    pub real_index: usize,
}

impl RequestBundle {
    pub fn session_id(&self) -> &SessionId {
        &self.session_id
    }

    pub fn sets(&self) -> &[Vec<Observation>] {
        &self.sets
    }

    pub fn real_index(&self) -> usize {
        self.real_index
    }

    pub fn h(&self) -> usize {
        self.sets.len() - 1
    }

    pub fn wire(&self) -> WireBundle {
        WireBundle {
            session_id: self.session_id.clone(),
            sets: self.sets.clone(),
        }
    }

    pub fn truth(&self, step: usize) -> BundleTruth {
        BundleTruth {
            session_id: self.session_id.clone(),
            step,
            real_index: self.real_index,
        }
    }

    pub fn privacy_metric(&self) -> Result<usize, NoiseError> {
        let n = self.sets[self.real_index].len();
        let k: usize = self
            .sets
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.real_index)
            .map(|(_, s)| s.len())
            .sum();
        privacy_metric(k, n)
    }
}

/// Shuffles the real set in among the noise sets.
pub fn assemble_bundle(
    real: &Fingerprint,
    noise: &[NoiseSet],
    session_id: SessionId,
    seed: u64,
) -> Result<RequestBundle, NoiseError> {
    let mut rng = rng_from_seed(seed);
    assemble_bundle_with_rng(real, noise, session_id, &mut rng)
}

pub fn assemble_bundle_with_rng(
    real: &Fingerprint,
    noise: &[NoiseSet],
    session_id: SessionId,
    rng: &mut SimRng,
) -> Result<RequestBundle, NoiseError> {
    let n = real.len();
    for (index, s) in noise.iter().enumerate() {
        if s.len() != n || s.synthesized_strengths.len() != n {
            return Err(NoiseError::CardinalityMismatch {
                index,
                expected: n,
                found: s.len(),
            });
        }
    }
    let mut pool: Vec<Vec<Observation>> = Vec::with_capacity(noise.len() + 1);
    pool.push(real.observations().to_vec());
    for s in noise {
        let mut obs = s.observations();
        sort_strongest_first(&mut obs);
        pool.push(obs);
    }
    let order = permutation(pool.len(), rng);
    let real_index = order.iter().position(|&k| k == 0).expect("real set present");
    let mut slots: Vec<Option<Vec<Observation>>> = pool.into_iter().map(Some).collect();
    let sets = order
        .iter()
        .map(|&k| slots[k].take().expect("permutation visits each slot once"))
        .collect();
    Ok(RequestBundle {
        session_id,
        sets,
        real_index,
    })
}

/// Decoy locations per request, `H = k / n`.
pub fn privacy_metric(k: usize, n: usize) -> Result<usize, NoiseError> {
    if n == 0 || !k.is_multiple_of(n) {
        return Err(NoiseError::Integrity { k, n });
    }
    Ok(k / n)
}
