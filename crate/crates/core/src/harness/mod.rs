//! Seeded experiments. Each runner takes a [`Workbench`] (world, ground
//! truth, radio map) and returns a typed result that renders to an
//! [`ExperimentReport`] of CSV tables plus a summary.
//!
//! Every trial draws from `derive_seed(master, ..)`, so a report is
//! reproducible from its config and master seed alone, and rows carry the
//! seed of the cell that produced them.

pub mod config;
pub mod cost;
pub mod distribution;
pub mod graph_quality;
pub mod report;
pub mod success;
pub mod trajectory;
pub mod workbench;

use std::str::FromStr;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use report::{ExperimentReport, GraphProvenance, Table};
pub use workbench::Workbench;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Locator(#[from] crate::locator::LocatorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    GraphQuality,
    Success,
    Cost,
    Trajectory,
    Distribution,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::GraphQuality,
        ExperimentKind::Success,
        ExperimentKind::Cost,
        ExperimentKind::Trajectory,
        ExperimentKind::Distribution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GraphQuality => "graph-quality",
            ExperimentKind::Success => "success",
            ExperimentKind::Cost => "cost",
            ExperimentKind::Trajectory => "trajectory",
            ExperimentKind::Distribution => "distribution",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment {s:?}")))
    }
}

/// Builds the workbench and runs one experiment.
pub fn run_experiment(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let wb = Workbench::new(cfg.clone(), master_seed)?;
    Ok(match kind {
        ExperimentKind::GraphQuality => graph_quality::run(&wb)?.report(&wb)?,
        ExperimentKind::Success => success::run(&wb)?.report(&wb)?,
        ExperimentKind::Cost => cost::run(&wb)?.report(&wb)?,
        ExperimentKind::Trajectory => trajectory::run(&wb)?.report(&wb)?,
        ExperimentKind::Distribution => distribution::run(&wb)?.report(&wb)?,
    })
}
