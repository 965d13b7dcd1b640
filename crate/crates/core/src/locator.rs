//! Simulated location provider.
//!
//! The LP holds a radio map surveyed on a regular grid and resolves each
//! fingerprint set it receives against it. Two backends:
//!
//! * [`Backend::Radar`]: nearest neighbour in signal space over the `k_aps`
//!   strongest APs of the request.
//! * [`Backend::Pbl`]: maximum likelihood under independent Gaussian noise
//!   per AP, using every AP of the request.
//!
//! An AP of the request that is not heard at a calibration point is imputed
//! at the map sensitivity minus [`IMPUTATION_OFFSET_DB`]. Only calibration
//! points hearing at least one requested AP are candidates; a request with no
//! candidate at all is unlocatable.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{SessionId, WireBundle};
use crate::world::{signal_at, ApField, ApId, Bounds, Observation, Point};

pub const IMPUTATION_OFFSET_DB: f64 = 10.0;
pub const RADIO_MAP_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LocatorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed radio map: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no calibration point shares an AP with the request")]
pub struct Unlocatable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Backend {
    Radar,
    Pbl,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Radar, Backend::Pbl];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Radar => "RADAR",
            Backend::Pbl => "PBL",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = LocatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RADAR" => Ok(Backend::Radar),
            "PBL" => Ok(Backend::Pbl),
            other => Err(LocatorError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorParams {
    pub k_aps: usize,
    pub k_nn: usize,
    /// Per-AP Gaussian noise assumed by the likelihood backend, dB.
    pub pbl_sigma: f64,
}

impl Default for LocatorParams {
    fn default() -> Self {
        LocatorParams {
            k_aps: 5,
            k_nn: 1,
            pbl_sigma: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub position: Point,
    /// Audible APs, strongest first.
    pub signature: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    bounds: Bounds,
    grid_spacing: f64,
    sensitivity: f64,
    points: Vec<CalibrationPoint>,
    /// AP -> (point index, level), point indices ascending.
    inverted: HashMap<ApId, Vec<(u32, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub position: Point,
    pub backend: Backend,
    /// Euclidean signal distance for RADAR (lower is better), log-likelihood
    /// for PBL (higher is better).
    pub score: f64,
    /// Signal-space distance in dB over the APs the backend used. Comparable
    /// across backends; zero for a perfect match.
    pub mismatch: f64,
}

pub fn build_radio_map(
    field: &ApField,
    grid_spacing: f64,
    sensitivity: f64,
) -> Result<RadioMap, LocatorError> {
    let b = field.bounds();
    if !(grid_spacing.is_finite() && grid_spacing > 0.0) {
        return Err(LocatorError::Config("grid spacing must be positive".into()));
    }
    if grid_spacing > b.width || grid_spacing > b.height {
        return Err(LocatorError::Config(format!(
            "grid spacing {grid_spacing} exceeds field bounds {} x {}",
            b.width, b.height
        )));
    }
    if !sensitivity.is_finite() {
        return Err(LocatorError::Config("sensitivity must be finite".into()));
    }
    let cols = (b.width / grid_spacing).floor() as usize;
    let rows = (b.height / grid_spacing).floor() as usize;
    let points: Vec<CalibrationPoint> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let position = Point::new(
                (c as f64 + 0.5) * grid_spacing,
                (r as f64 + 0.5) * grid_spacing,
            );
            let mut signature: Vec<Observation> = field
                .aps()
                .iter()
                .filter_map(|ap| {
                    let rssi = signal_at(ap, &position, field);
                    (rssi >= sensitivity).then_some(Observation { ap: ap.id, rssi })
                })
                .collect();
            crate::world::sort_strongest_first(&mut signature);
            CalibrationPoint {
                position,
                signature,
            }
        })
        .collect();
    Ok(RadioMap::assemble(b, grid_spacing, sensitivity, points))
}

impl RadioMap {
    fn assemble(
        bounds: Bounds,
        grid_spacing: f64,
        sensitivity: f64,
        points: Vec<CalibrationPoint>,
    ) -> Self {
        let mut inverted: HashMap<ApId, Vec<(u32, f64)>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            for o in &p.signature {
                inverted.entry(o.ap).or_default().push((i as u32, o.rssi));
            }
        }
        RadioMap {
            bounds,
            grid_spacing,
            sensitivity,
            points,
            inverted,
        }
    }

    pub fn points(&self) -> &[CalibrationPoint] {
        &self.points
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn imputed_level(&self) -> f64 {
        self.sensitivity - IMPUTATION_OFFSET_DB
    }

    pub fn knows(&self, ap: ApId) -> bool {
        self.inverted.contains_key(&ap)
    }

    /// Squared signal distance from `fp` to every candidate point, ascending
    /// by point index.
    fn squared_distances(&self, fp: &[Observation]) -> Vec<(u32, f64)> {
        let imputed = self.imputed_level();
        let mut candidates: Vec<u32> = fp
            .iter()
            .filter_map(|o| self.inverted.get(&o.ap))
            .flat_map(|list| list.iter().map(|&(p, _)| p))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates
            .into_iter()
            .map(|p| {
                let sig = &self.points[p as usize].signature;
                let d: f64 = fp
                    .iter()
                    .map(|o| {
                        let level = sig
                            .iter()
                            .find(|s| s.ap == o.ap)
                            .map_or(imputed, |s| s.rssi);
                        (level - o.rssi).powi(2)
                    })
                    .sum();
                (p, d)
            })
            .collect()
    }

    pub fn to_file(&self) -> RadioMapFile {
        RadioMapFile {
            version: RADIO_MAP_FILE_VERSION,
            bounds: self.bounds,
            grid_spacing: self.grid_spacing,
            sensitivity: self.sensitivity,
            points: self.points.clone(),
        }
    }

    pub fn from_file(file: RadioMapFile) -> Result<Self, LocatorError> {
        if file.version != RADIO_MAP_FILE_VERSION {
            return Err(LocatorError::Malformed(format!(
                "unsupported radio map version {}",
                file.version
            )));
        }
        Ok(RadioMap::assemble(
            file.bounds,
            file.grid_spacing,
            file.sensitivity,
            file.points,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), LocatorError> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LocatorError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMapFile {
    pub version: u32,
    pub bounds: Bounds,
    pub grid_spacing: f64,
    pub sensitivity: f64,
    pub points: Vec<CalibrationPoint>,
}

/// The `k` strongest readings of `fp`, ties broken by AP id.
fn strongest(fp: &[Observation], k: usize) -> Vec<Observation> {
    let mut v = fp.to_vec();
    crate::world::sort_strongest_first(&mut v);
    v.truncate(k);
    v
}

pub fn locate_radar(
    map: &RadioMap,
    fp: &[Observation],
    params: &LocatorParams,
) -> Result<LocationEstimate, Unlocatable> {
    let used = strongest(fp, params.k_aps.max(1));
    let mut d = map.squared_distances(&used);
    if d.is_empty() {
        return Err(Unlocatable);
    }
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let k = params.k_nn.clamp(1, d.len());
    let (mut x, mut y, mut dist) = (0.0, 0.0, 0.0);
    for &(p, d2) in &d[..k] {
        let pos = map.points[p as usize].position;
        x += pos.x;
        y += pos.y;
        dist += d2.sqrt();
    }
    let kf = k as f64;
    Ok(LocationEstimate {
        position: Point::new(x / kf, y / kf),
        backend: Backend::Radar,
        score: dist / kf,
        mismatch: dist / kf,
    })
}

pub fn locate_pbl(
    map: &RadioMap,
    fp: &[Observation],
    params: &LocatorParams,
) -> Result<LocationEstimate, Unlocatable> {
    let d = map.squared_distances(fp);
    // argmax likelihood == argmin squared distance for a shared sigma
    let &(best, d2) = d
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(Unlocatable)?;
    let sigma = params.pbl_sigma;
    let norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let log_likelihood = -d2 / (2.0 * sigma * sigma) - fp.len() as f64 * norm;
    Ok(LocationEstimate {
        position: map.points[best as usize].position,
        backend: Backend::Pbl,
        score: log_likelihood,
        mismatch: d2.sqrt(),
    })
}

pub fn locate(
    map: &RadioMap,
    fp: &[Observation],
    backend: Backend,
    params: &LocatorParams,
) -> Result<LocationEstimate, Unlocatable> {
    match backend {
        Backend::Radar => locate_radar(map, fp, params),
        Backend::Pbl => locate_pbl(map, fp, params),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetOutcome {
    pub set_index: usize,
    pub result: Result<LocationEstimate, Unlocatable>,
}

impl SetOutcome {
    pub fn position(&self) -> Option<Point> {
        self.result.as_ref().ok().map(|e| e.position)
    }
}

// serde for Unlocatable as a unit marker inside Result
impl Serialize for Unlocatable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_unit_struct("Unlocatable")
    }
}

impl<'de> Deserialize<'de> for Unlocatable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <()>::deserialize(d).map(|_| Unlocatable)
    }
}

/// Resolves every set of the bundle independently.
pub fn serve_bundle(
    map: &RadioMap,
    bundle: &WireBundle,
    backend: Backend,
    params: &LocatorParams,
) -> Vec<SetOutcome> {
    bundle
        .sets
        .iter()
        .enumerate()
        .map(|(set_index, set)| SetOutcome {
            set_index,
            result: locate(map, set, backend, params),
        })
        .collect()
}

/// Operational success of one noise set: it resolved, and its signal
/// mismatch is within `factor` times that of the real set under the same
/// backend.
pub fn noise_succeeds(
    real: &Result<LocationEstimate, Unlocatable>,
    noise: &Result<LocationEstimate, Unlocatable>,
    factor: f64,
) -> bool {
    match (real, noise) {
        (Ok(r), Ok(n)) => n.mismatch <= factor * r.mismatch,
        (Err(_), Ok(_)) => true,
        (_, Err(_)) => false,
    }
}

/// One row of served output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeRecord {
    pub session_id: SessionId,
    pub step: usize,
    pub set_index: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub score: Option<f64>,
    pub status: String,
}

pub fn serve_records(session_id: &SessionId, step: usize, outcomes: &[SetOutcome]) -> Vec<ServeRecord> {
    outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(e) => ServeRecord {
                session_id: session_id.clone(),
                step,
                set_index: o.set_index,
                x: Some(e.position.x),
                y: Some(e.position.y),
                score: Some(e.score),
                status: "ok".into(),
            },
            Err(_) => ServeRecord {
                session_id: session_id.clone(),
                step,
                set_index: o.set_index,
                x: None,
                y: None,
                score: None,
                status: "unlocatable".into(),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AccessPoint, ApField};

    fn field() -> ApField {
        let aps = vec![
            AccessPoint {
                id: ApId::new(1),
                position: Point::new(2.5, 2.5),
                tx_power: -30.0,
            },
            AccessPoint {
                id: ApId::new(2),
                position: Point::new(8.0, 6.0),
                tx_power: -35.0,
            },
        ];
        ApField::new(aps, Bounds::new(10.0, 10.0).unwrap(), 3.0, 0).unwrap()
    }

    #[test]
    fn grid_shape() {
        let m = build_radio_map(&field(), 5.0, -80.0).unwrap();
        assert_eq!(m.points().len(), 4);
        assert!(build_radio_map(&field(), 20.0, -80.0).is_err());
        assert!(build_radio_map(&field(), 0.0, -80.0).is_err());
    }

    #[test]
    fn own_grid_point_hears_ap() {
        let m = build_radio_map(&field(), 5.0, -80.0).unwrap();
        let p = &m.points()[0];
        assert_eq!(p.position, Point::new(2.5, 2.5));
        assert!(p.signature.iter().any(|o| o.ap == ApId::new(1)));
    }

    #[test]
    fn exact_signature_resolves_to_its_point() {
        let m = build_radio_map(&field(), 5.0, -80.0).unwrap();
        let params = LocatorParams::default();
        for p in m.points() {
            let r = locate_radar(&m, &p.signature, &params).unwrap();
            assert_eq!(r.position, p.position);
            assert!(r.mismatch < 1e-9);
            let q = locate_pbl(&m, &p.signature, &params).unwrap();
            assert_eq!(q.position, p.position);
        }
    }

    #[test]
    fn unknown_aps_are_unlocatable() {
        let m = build_radio_map(&field(), 5.0, -80.0).unwrap();
        let fp = [Observation {
            ap: ApId::new(77),
            rssi: -50.0,
        }];
        let params = LocatorParams::default();
        assert_eq!(locate_radar(&m, &fp, &params), Err(Unlocatable));
        assert_eq!(locate_pbl(&m, &fp, &params), Err(Unlocatable));
        assert_eq!(locate_pbl(&m, &[], &params), Err(Unlocatable));
    }

    #[test]
    fn success_rule() {
        let est = |m: f64| {
            Ok(LocationEstimate {
                position: Point::new(0.0, 0.0),
                backend: Backend::Radar,
                score: m,
                mismatch: m,
            })
        };
        assert!(noise_succeeds(&est(2.0), &est(4.0), 2.0));
        assert!(!noise_succeeds(&est(2.0), &est(4.1), 2.0));
        assert!(!noise_succeeds(&est(2.0), &Err(Unlocatable), 2.0));
    }

    #[test]
    fn map_file_roundtrip() {
        let m = build_radio_map(&field(), 5.0, -80.0).unwrap();
        assert_eq!(RadioMap::from_file(m.to_file()).unwrap(), m);
    }
}
