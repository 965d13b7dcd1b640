//! How much of the ground-truth overlap graph the device harvests as it
//! travels.

use serde::Serialize;

use crate::graph::OverlapGraph;
use crate::rng::label;
use crate::world::coverage_walk;

use super::report::{GraphProvenance, Table};
use super::{ExperimentReport, HarnessError, Workbench};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphQualityRow {
    /// `sessions` for the collection run, `coverage` for the full sweep.
    pub run: String,
    pub sessions: usize,
    pub vertices: usize,
    pub edges: usize,
    pub truth_vertices: usize,
    pub truth_edges: usize,
    pub vertex_ratio: f64,
    pub edge_ratio: f64,
    pub incorrect_vertices: usize,
    pub incorrect_edges: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GraphQualityOutcome {
    pub rows: Vec<GraphQualityRow>,
    pub graphs: Vec<GraphProvenance>,
}

impl GraphQualityOutcome {
    pub fn session_rows(&self) -> impl Iterator<Item = &GraphQualityRow> {
        self.rows.iter().filter(|r| r.run == "sessions")
    }

    pub fn coverage_row(&self) -> &GraphQualityRow {
        self.rows
            .iter()
            .find(|r| r.run == "coverage")
            .expect("coverage row is always emitted")
    }
}

fn measure(run: &str, sessions: usize, g: &OverlapGraph, truth: &OverlapGraph, seed: u64) -> GraphQualityRow {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    GraphQualityRow {
        run: run.into(),
        sessions,
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        truth_vertices: truth.vertex_count(),
        truth_edges: truth.edge_count(),
        vertex_ratio: ratio(g.vertex_count(), truth.vertex_count()),
        edge_ratio: ratio(g.edge_count(), truth.edge_count()),
        incorrect_vertices: g.vertices().iter().filter(|v| !truth.contains(**v)).count(),
        incorrect_edges: g.edges().filter(|&(a, b)| !truth.has_edge(a, b)).count(),
        seed,
    }
}

pub fn run(wb: &Workbench) -> Result<GraphQualityOutcome, HarnessError> {
    let collection = wb.collect()?;
    let mut rows = Vec::new();
    let mut graphs = vec![GraphProvenance::of("truth", &wb.truth)];
    for (s, g) in collection.snapshots.iter().enumerate() {
        let seed = if s == 0 { 0 } else { wb.seed(&[label("collect"), s as u64 - 1]) };
        rows.push(measure("sessions", s, g, &wb.truth, seed));
    }
    graphs.push(GraphProvenance::of("collected", collection.last()));

    // exact scans at every sweep sample, no shadowing
    let sweep = coverage_walk(&wb.field, wb.cfg.collection.sweep_spacing)?;
    let mut g = OverlapGraph::new();
    for p in &sweep.steps {
        g.scsoa_update(&wb.scan(p), wb.cfg.world.tau);
    }
    rows.push(measure("coverage", sweep.len(), &g, &wb.truth, 0));
    graphs.push(GraphProvenance::of("coverage", &g));
    Ok(GraphQualityOutcome { rows, graphs })
}

impl GraphQualityOutcome {
    pub fn report(&self, wb: &Workbench) -> Result<ExperimentReport, HarnessError> {
        let mut summary = Vec::new();
        for r in self.session_rows() {
            summary.push(format!(
                "after {} sessions: |V|/|Vt| = {:.3}, |E|/|Et| = {:.3}, incorrect vertices {}, incorrect edges {}",
                r.sessions, r.vertex_ratio, r.edge_ratio, r.incorrect_vertices, r.incorrect_edges
            ));
        }
        let c = self.coverage_row();
        summary.push(format!(
            "coverage sweep ({} samples): |V|/|Vt| = {:.3}, |E|/|Et| = {:.3}",
            c.sessions, c.vertex_ratio, c.edge_ratio
        ));
        Ok(ExperimentReport {
            id: "graph-quality".into(),
            master_seed: wb.master_seed,
            field_seed: wb.field.seed(),
            graphs: self.graphs.clone(),
            tables: vec![Table::from_records("sessions", &self.rows)?],
            timing_columns: Vec::new(),
            summary,
        })
    }
}
