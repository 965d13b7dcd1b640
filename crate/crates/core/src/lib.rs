//! Simulation workbench for clique-based noise fingerprints.
//!
//! A device that asks a location provider (LP) to resolve its Wi-Fi
//! fingerprint leaks its position. This crate models the countermeasure in
//! which the device mixes the real fingerprint with `h` decoy fingerprints
//! whose access points (APs) are real and spatially coherent, so that the LP
//! resolves `h + 1` plausible locations.
//!
//! The pieces:
//!
//! * [`world`]: synthetic AP fields, log-distance propagation, scans, walks
//!   and the ground-truth overlap graph.
//! * [`graph`]: the overlap graph harvested on the device, clustering
//!   coefficients, clique checks and the exhaustive clique baseline.
//! * [`noise`]: coefficient-guided noise generation for single requests and
//!   trajectory sessions, bundle assembly and the privacy metric.
//! * [`locator`]: the simulated LP with a nearest-neighbour backend that uses a
//!   fixed number of APs and a likelihood backend that uses all of them.
//! * [`adversary`]: attacks the LP can mount against the bundles it receives.
//! * [`harness`]: seeded experiments emitting CSV reports.

pub mod adversary;
pub mod graph;
pub mod harness;
pub mod locator;
pub mod noise;
pub mod par;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod world;

pub use adversary::{
    distribution_attack, homogeneity_attack, luck_guess, record_traffic, AttackKind,
    AttackVerdict, HomogeneityParams, Linkage, QueryFrequencyTable,
};
pub use graph::{brute_force_clique, OverlapGraph};
pub use locator::{
    build_radio_map, locate_pbl, locate_radar, serve_bundle, Backend, LocationEstimate,
    LocatorParams, RadioMap, SetOutcome,
};
pub use noise::{
    assemble_bundle, csda, e_csda, privacy_metric, NoiseError, NoiseSet, RequestBundle,
    WireBundle,
};
pub use world::{
    generate_field, ground_truth_graph, random_walk, scan, signal_at, AccessPoint, ApField, ApId,
    Bounds, Fingerprint, Observation, Placement, Point, Trajectory,
};
