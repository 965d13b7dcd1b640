//! Synthetic radio world: AP fields, propagation, scans and walks.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::OverlapGraph;
use crate::rng::{rng_from_seed, SimRng};

pub const FIELD_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed field file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// MAC-like AP identifier. Only the low 48 bits are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApId(u64);

impl ApId {
    pub const MASK: u64 = 0xffff_ffff_ffff;

    pub fn new(raw: u64) -> Self {
        ApId(raw & Self::MASK)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Random locally administered unicast address.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let raw: u64 = rng.random::<u64>() & Self::MASK;
        // first octet: set locally-administered bit, clear multicast bit
        let raw = (raw & !(0x01 << 40)) | (0x02 << 40);
        ApId(raw)
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

impl FromStr for ApId {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(WorldError::Malformed(format!("bad AP id {s:?}")));
        }
        let mut raw = 0u64;
        for p in parts {
            let octet = u8::from_str_radix(p, 16)
                .map_err(|_| WorldError::Malformed(format!("bad AP id {s:?}")))?;
            raw = (raw << 8) | u64::from(octet);
        }
        Ok(ApId(raw))
    }
}

impl Serialize for ApId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ApId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub width: f64,
    pub height: f64,
}

impl Bounds {
    pub fn new(width: f64, height: f64) -> Result<Self, WorldError> {
        let b = Bounds { width, height };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.width.is_finite() && self.height.is_finite())
            || self.width <= 0.0
            || self.height <= 0.0
        {
            return Err(WorldError::Config(format!(
                "bounds must be finite and positive, got {} x {}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Folds `p` back into the rectangle by mirror reflection at the edges.
    pub fn fold(&self, p: Point) -> Point {
        Point::new(fold_axis(p.x, self.width), fold_axis(p.y, self.height))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(0.0..=self.width),
            rng.random_range(0.0..=self.height),
        )
    }
}

fn fold_axis(v: f64, len: f64) -> f64 {
    let m = v.rem_euclid(2.0 * len);
    if m > len {
        2.0 * len - m
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: ApId,
    pub position: Point,
    /// Signal strength in dBm at the 1 m reference distance.
    pub tx_power: f64,
}

/// One `(AP, dBm)` reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ap: ApId,
    pub rssi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Uniform,
    Clustered,
}

impl FromStr for Placement {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Placement::Uniform),
            "clustered" => Ok(Placement::Clustered),
            other => Err(WorldError::Config(format!("unknown placement {other:?}"))),
        }
    }
}

/// Everything [`generate_field`] needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSpec {
    pub count: usize,
    pub bounds: Bounds,
    pub placement: Placement,
    pub path_loss_exponent: f64,
    pub tx_power_min: f64,
    pub tx_power_max: f64,
    /// Cluster count for clustered placement; `None` means `count / 7.5`.
    pub clusters: Option<usize>,
    /// Per-axis standard deviation of APs around their cluster center, meters.
    pub cluster_spread: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            count: 300,
            bounds: Bounds {
                width: 500.0,
                height: 500.0,
            },
            placement: Placement::Clustered,
            path_loss_exponent: 3.0,
            tx_power_min: -55.0,
            tx_power_max: -25.0,
            clusters: None,
            cluster_spread: 40.0,
        }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.bounds.validate()?;
        if self.count == 0 {
            return Err(WorldError::Config("AP count must be at least 1".into()));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(WorldError::Config(
                "path loss exponent must be positive".into(),
            ));
        }
        if !(self.tx_power_min.is_finite()
            && self.tx_power_max.is_finite()
            && self.tx_power_min <= self.tx_power_max)
        {
            return Err(WorldError::Config("invalid tx power range".into()));
        }
        if self.placement == Placement::Clustered
            && !(self.cluster_spread.is_finite() && self.cluster_spread >= 0.0)
        {
            return Err(WorldError::Config("invalid cluster spread".into()));
        }
        Ok(())
    }

    fn cluster_count(&self) -> usize {
        self.clusters
            .unwrap_or_else(|| ((self.count as f64) / 7.5).round() as usize)
            .max(1)
    }
}

/// A generated (or loaded) set of APs plus the propagation constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ApField {
    aps: Vec<AccessPoint>,
    bounds: Bounds,
    path_loss_exponent: f64,
    seed: u64,
}

impl ApField {
    pub fn new(
        aps: Vec<AccessPoint>,
        bounds: Bounds,
        path_loss_exponent: f64,
        seed: u64,
    ) -> Result<Self, WorldError> {
        bounds.validate()?;
        if !(path_loss_exponent.is_finite() && path_loss_exponent > 0.0) {
            return Err(WorldError::Config(
                "path loss exponent must be positive".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(aps.len());
        for ap in &aps {
            if !seen.insert(ap.id) {
                return Err(WorldError::Malformed(format!("duplicate AP id {}", ap.id)));
            }
            if !ap.tx_power.is_finite() || !ap.position.is_finite() {
                return Err(WorldError::Malformed(format!("non-finite AP {}", ap.id)));
            }
            if !bounds.contains(&ap.position) {
                return Err(WorldError::Malformed(format!("AP {} out of bounds", ap.id)));
            }
        }
        Ok(ApField {
            aps,
            bounds,
            path_loss_exponent,
            seed,
        })
    }

    pub fn aps(&self) -> &[AccessPoint] {
        &self.aps
    }

    pub fn len(&self) -> usize {
        self.aps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, id: ApId) -> Option<&AccessPoint> {
        self.aps.iter().find(|ap| ap.id == id)
    }

    pub fn signal_at(&self, ap: &AccessPoint, pos: &Point) -> f64 {
        signal_at(ap, pos, self)
    }

    /// Distance at which `ap` is received at exactly `level` dBm, or `None`
    /// when it never reaches that level.
    pub fn coverage_radius(&self, ap: &AccessPoint, level: f64) -> Option<f64> {
        if ap.tx_power < level {
            return None;
        }
        Some(10f64.powf((ap.tx_power - level) / (10.0 * self.path_loss_exponent)))
    }

    pub fn to_file(&self) -> FieldFile {
        FieldFile {
            version: FIELD_FILE_VERSION,
            bounds: self.bounds,
            path_loss_exponent: self.path_loss_exponent,
            seed: self.seed,
            access_points: self
                .aps
                .iter()
                .map(|ap| ApRecord {
                    id: ap.id,
                    x: ap.position.x,
                    y: ap.position.y,
                    tx_power: ap.tx_power,
                })
                .collect(),
        }
    }

    pub fn from_file(file: FieldFile) -> Result<Self, WorldError> {
        if file.version != FIELD_FILE_VERSION {
            return Err(WorldError::Malformed(format!(
                "unsupported field file version {}",
                file.version
            )));
        }
        let aps = file
            .access_points
            .into_iter()
            .map(|r| AccessPoint {
                id: r.id,
                position: Point::new(r.x, r.y),
                tx_power: r.tx_power,
            })
            .collect();
        ApField::new(aps, file.bounds, file.path_loss_exponent, file.seed)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// On-disk field schema. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub version: u32,
    pub bounds: Bounds,
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub seed: u64,
    pub access_points: Vec<ApRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRecord {
    pub id: ApId,
    pub x: f64,
    pub y: f64,
    pub tx_power: f64,
}

pub fn generate_field(spec: &FieldSpec, seed: u64) -> Result<ApField, WorldError> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let bounds = spec.bounds;

    let positions: Vec<Point> = match spec.placement {
        Placement::Uniform => (0..spec.count).map(|_| bounds.sample(&mut rng)).collect(),
        Placement::Clustered => {
            let centers: Vec<Point> = (0..spec.cluster_count())
                .map(|_| bounds.sample(&mut rng))
                .collect();
            let offset = Normal::new(0.0, spec.cluster_spread)
                .map_err(|e| WorldError::Config(e.to_string()))?;
            (0..spec.count)
                .map(|_| {
                    let c = centers[rng.random_range(0..centers.len())];
                    let p = Point::new(
                        c.x + offset.sample(&mut rng),
                        c.y + offset.sample(&mut rng),
                    );
                    bounds.fold(p)
                })
                .collect()
        }
    };

    let mut ids = HashSet::with_capacity(spec.count);
    let mut aps = Vec::with_capacity(spec.count);
    for position in positions {
        let id = loop {
            let id = ApId::random(&mut rng);
            if ids.insert(id) {
                break id;
            }
        };
        let tx_power = if spec.tx_power_min == spec.tx_power_max {
            spec.tx_power_min
        } else {
            rng.random_range(spec.tx_power_min..spec.tx_power_max)
        };
        aps.push(AccessPoint {
            id,
            position,
            tx_power,
        });
    }
    ApField::new(aps, bounds, spec.path_loss_exponent, seed)
}

/// Log-distance path loss: `tx_power - 10 * gamma * log10(max(d, 1 m))`.
pub fn signal_at(ap: &AccessPoint, pos: &Point, field: &ApField) -> f64 {
    let d = ap.position.distance(pos).max(1.0);
    ap.tx_power - 10.0 * field.path_loss_exponent * d.log10()
}

/// What a device senses at one spot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fingerprint {
    observations: Vec<Observation>,
    position_truth: Option<Point>,
}

impl Fingerprint {
    /// Builds a fingerprint, rejecting duplicate APs. Observations are kept
    /// strongest first (ties by id), the order a scan reports them in.
    pub fn new(
        mut observations: Vec<Observation>,
        position_truth: Option<Point>,
    ) -> Result<Self, WorldError> {
        sort_strongest_first(&mut observations);
        let mut seen = HashSet::with_capacity(observations.len());
        for o in &observations {
            if !seen.insert(o.ap) {
                return Err(WorldError::Malformed(format!("duplicate AP {} in fingerprint", o.ap)));
            }
            if !o.rssi.is_finite() {
                return Err(WorldError::Malformed(format!("non-finite strength for {}", o.ap)));
            }
        }
        Ok(Fingerprint {
            observations,
            position_truth,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn position_truth(&self) -> Option<Point> {
        self.position_truth
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// AP ids sorted by id; the set view used for graph operations.
    pub fn ap_set(&self) -> Vec<ApId> {
        let mut ids: Vec<ApId> = self.observations.iter().map(|o| o.ap).collect();
        ids.sort_unstable();
        ids
    }

    pub fn strength(&self, ap: ApId) -> Option<f64> {
        self.observations.iter().find(|o| o.ap == ap).map(|o| o.rssi)
    }

    /// `(min, max)` strength, `None` for an empty fingerprint.
    pub fn strength_range(&self) -> Option<(f64, f64)> {
        let mut it = self.observations.iter().map(|o| o.rssi);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Drops the simulator-only ground truth.
    pub fn without_truth(&self) -> Fingerprint {
        Fingerprint {
            observations: self.observations.clone(),
            position_truth: None,
        }
    }
}

pub(crate) fn sort_strongest_first(obs: &mut [Observation]) {
    obs.sort_by(|a, b| b.rssi.total_cmp(&a.rssi).then(a.ap.cmp(&b.ap)));
}

/// Deterministic scan: every AP whose `signal_at` reaches `sensitivity`.
pub fn scan(field: &ApField, pos: &Point, sensitivity: f64) -> Fingerprint {
    let observations = field
        .aps
        .iter()
        .filter_map(|ap| {
            let rssi = signal_at(ap, pos, field);
            (rssi >= sensitivity).then_some(Observation { ap: ap.id, rssi })
        })
        .collect();
    Fingerprint::new(observations, Some(*pos)).expect("field ids are unique")
}

/// Scan with zero-mean Gaussian shadowing of `sigma` dB added per reading
/// before the sensitivity cut. `sigma == 0` is identical to [`scan`].
pub fn scan_shadowed(
    field: &ApField,
    pos: &Point,
    sensitivity: f64,
    sigma: f64,
    rng: &mut SimRng,
) -> Fingerprint {
    if sigma <= 0.0 {
        return scan(field, pos, sensitivity);
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let observations = field
        .aps
        .iter()
        .filter_map(|ap| {
            let rssi = signal_at(ap, pos, field) + noise.sample(rng);
            (rssi >= sensitivity).then_some(Observation { ap: ap.id, rssi })
        })
        .collect();
    Fingerprint::new(observations, Some(*pos)).expect("field ids are unique")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Point>,
    pub step_length: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Heading jitter per step for [`random_walk`], radians.
const TURN_SIGMA: f64 = 0.6;

/// Casual walk: the heading drifts by a Gaussian turn each step and each step
/// covers between half and all of `step_length`. Edges reflect both the
/// position and the heading.
pub fn random_walk(
    field: &ApField,
    start: Point,
    steps: usize,
    step_length: f64,
    seed: u64,
) -> Result<Trajectory, WorldError> {
    let bounds = field.bounds;
    if !start.is_finite() || !bounds.contains(&start) {
        return Err(WorldError::Config(format!(
            "walk start ({}, {}) outside bounds",
            start.x, start.y
        )));
    }
    if steps == 0 {
        return Err(WorldError::Config("walk needs at least one step".into()));
    }
    if !(step_length.is_finite() && step_length >= 0.0) {
        return Err(WorldError::Config("step length must be non-negative".into()));
    }
    let mut rng = rng_from_seed(seed);
    let turn = Normal::new(0.0, TURN_SIGMA).expect("constant sigma");
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pos = start;
    let mut out = Vec::with_capacity(steps);
    out.push(pos);
    for _ in 1..steps {
        heading += turn.sample(&mut rng);
        let len = step_length * rng.random_range(0.5..=1.0);
        let mut x = pos.x + len * heading.cos();
        let mut y = pos.y + len * heading.sin();
        // mirror at the walls until inside; each mirror flips one heading component
        while x < 0.0 || x > bounds.width {
            x = if x < 0.0 { -x } else { 2.0 * bounds.width - x };
            heading = std::f64::consts::PI - heading;
        }
        while y < 0.0 || y > bounds.height {
            y = if y < 0.0 { -y } else { 2.0 * bounds.height - y };
            heading = -heading;
        }
        pos = Point::new(x, y);
        out.push(pos);
    }
    Ok(Trajectory {
        steps: out,
        step_length,
    })
}

/// Boustrophedon sweep over the whole field with samples every `spacing`
/// meters, starting half a spacing in from the corner.
pub fn coverage_walk(field: &ApField, spacing: f64) -> Result<Trajectory, WorldError> {
    let b = field.bounds;
    if !(spacing.is_finite() && spacing > 0.0) || spacing > b.width || spacing > b.height {
        return Err(WorldError::Config(format!("invalid sweep spacing {spacing}")));
    }
    let cols = (b.width / spacing).floor() as usize;
    let rows = (b.height / spacing).floor() as usize;
    let mut steps = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = (r as f64 + 0.5) * spacing;
        let xs: Box<dyn Iterator<Item = usize>> = if r % 2 == 0 {
            Box::new(0..cols)
        } else {
            Box::new((0..cols).rev())
        };
        for c in xs {
            steps.push(Point::new((c as f64 + 0.5) * spacing, y));
        }
    }
    Ok(Trajectory {
        steps,
        step_length: spacing,
    })
}

/// Uniformly random start point whose scan is non-empty, if one is found
/// within `attempts` draws.
pub fn audible_point(
    field: &ApField,
    sensitivity: f64,
    rng: &mut SimRng,
    attempts: usize,
) -> Option<Point> {
    (0..attempts)
        .map(|_| field.bounds.sample(rng))
        .find(|p| {
            field
                .aps
                .iter()
                .any(|ap| signal_at(ap, p, field) >= sensitivity)
        })
}

/// Ground-truth overlap graph: an edge wherever the two `tau` coverage disks
/// intersect. Coefficients are computed before returning.
pub fn ground_truth_graph(field: &ApField, tau: f64) -> OverlapGraph {
    let mut g = OverlapGraph::new();
    for ap in &field.aps {
        g.add_vertex(ap.id);
    }
    let radii: Vec<Option<f64>> = field
        .aps
        .iter()
        .map(|ap| field.coverage_radius(ap, tau))
        .collect();
    for (i, ri) in radii.iter().enumerate() {
        let Some(ri) = *ri else { continue };
        for (j, rj) in radii.iter().enumerate().skip(i + 1) {
            let Some(rj) = *rj else { continue };
            let reach = ri + rj;
            // relative slack absorbs log10/powf round-off at the tangent point
            if field.aps[i].position.distance(&field.aps[j].position) <= reach * (1.0 + 1e-9) {
                g.add_edge(field.aps[i].id, field.aps[j].id);
            }
        }
    }
    g.recompute_coefficients();
    g
}

/// Random permutation of `0..n` drawn from `rng`.
pub(crate) fn permutation(n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}
